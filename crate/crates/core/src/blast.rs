//! The BLAST representation and constructors for the structured matrices it
//! embeds.
//!
//! An `m x n` BLAST matrix is split into a `b x b` grid of `p x q` blocks
//! (`p = m / b`, `q = n / b`). Block `(i, j)` is `U_i diag(s_ij) V_j^T`: the
//! left factor `U_i` (`p x r`) is shared along block-row `i`, the right factor
//! `V_j` (`q x r`) along block-column `j`, and every block owns its own
//! length-`r` coupling vector `s_ij`.
//!
//! Storage is three contiguous row-major buffers: `U` as `b` blocks of
//! `p x r`, `V` as `b` blocks of `q x r`, and `S` as a `b x b x r` array.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dimensions of a BLAST matrix. Constructed only through [`BlastShape::new`],
/// so `b` always divides both `m` and `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlastShape {
    m: usize,
    n: usize,
    b: usize,
    r: usize,
}

impl BlastShape {
    pub fn new(m: usize, n: usize, b: usize, r: usize) -> Result<Self> {
        if m == 0 || n == 0 || b == 0 || r == 0 {
            return Err(Error::dims(format!(
                "m, n, b and r must be positive (got m={m}, n={n}, b={b}, r={r})"
            )));
        }
        if m % b != 0 || n % b != 0 {
            return Err(Error::dims(format!(
                "block count b={b} must divide both m={m} and n={n}"
            )));
        }
        Ok(Self { m, n, b, r })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }
    #[inline]
    pub fn b(&self) -> usize {
        self.b
    }
    #[inline]
    pub fn r(&self) -> usize {
        self.r
    }
    /// Rows per block.
    #[inline]
    pub fn p(&self) -> usize {
        self.m / self.b
    }
    /// Columns per block.
    #[inline]
    pub fn q(&self) -> usize {
        self.n / self.b
    }

    /// `(m + n) r + r b^2`: every stored factor scalar.
    pub fn param_count(&self) -> usize {
        (self.m + self.n) * self.r + self.r * self.b * self.b
    }

    /// Multiplications in one structured matrix-vector product:
    /// `n r` for the right factors, `b^2 r` for the couplings, `m r` for the left factors.
    pub fn matvec_flops(&self) -> usize {
        (self.m + self.n + self.b * self.b) * self.r
    }

    /// `1 - params / (m n)`.
    pub fn compression_ratio(&self) -> f64 {
        1.0 - self.param_count() as f64 / (self.m as f64 * self.n as f64)
    }

    pub(crate) fn u_len(&self) -> usize {
        self.m * self.r
    }
    pub(crate) fn v_len(&self) -> usize {
        self.n * self.r
    }
    pub(crate) fn s_len(&self) -> usize {
        self.b * self.b * self.r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlastMatrix<T> {
    shape: BlastShape,
    u: Vec<T>,
    v: Vec<T>,
    s: Vec<T>,
}

impl<T: Scalar> BlastMatrix<T> {
    /// Builds a BLAST matrix from per-block factors: `u[i]` is `p x r`, `v[j]` is
    /// `q x r`, and `s` holds the `b^2` coupling vectors in row-major `(i, j)` order.
    pub fn new(
        m: usize,
        n: usize,
        b: usize,
        r: usize,
        u: &[DenseMatrix<T>],
        v: &[DenseMatrix<T>],
        s: &[Vec<T>],
    ) -> Result<Self> {
        let shape = BlastShape::new(m, n, b, r)?;
        let (p, q) = (shape.p(), shape.q());
        check_blocks("U", u, b, p, r)?;
        check_blocks("V", v, b, q, r)?;
        if s.len() != b * b {
            return Err(Error::dims(format!("S needs {} coupling vectors, got {}", b * b, s.len())));
        }
        if let Some(bad) = s.iter().position(|x| x.len() != r) {
            return Err(Error::dims(format!(
                "coupling vector {bad} has length {}, expected {r}",
                s[bad].len()
            )));
        }
        Self::from_parts(
            shape,
            u.iter().flat_map(|blk| blk.as_slice().iter().copied()).collect(),
            v.iter().flat_map(|blk| blk.as_slice().iter().copied()).collect(),
            s.iter().flat_map(|x| x.iter().copied()).collect(),
        )
    }

    /// Builds a BLAST matrix from flat buffers in the storage layout described
    /// in the module docs.
    pub fn from_parts(shape: BlastShape, u: Vec<T>, v: Vec<T>, s: Vec<T>) -> Result<Self> {
        for (name, buf, want) in [
            ("U", &u, shape.u_len()),
            ("V", &v, shape.v_len()),
            ("S", &s, shape.s_len()),
        ] {
            if buf.len() != want {
                return Err(Error::dims(format!(
                    "{name} buffer has {} elements, expected {want}",
                    buf.len()
                )));
            }
        }
        let out = Self { shape, u, v, s };
        if !out.is_finite() {
            return Err(Error::NonFiniteInput("BLAST factors"));
        }
        Ok(out)
    }

    pub(crate) fn from_parts_unchecked(shape: BlastShape, u: Vec<T>, v: Vec<T>, s: Vec<T>) -> Self {
        debug_assert_eq!(u.len(), shape.u_len());
        debug_assert_eq!(v.len(), shape.v_len());
        debug_assert_eq!(s.len(), shape.s_len());
        Self { shape, u, v, s }
    }

    pub fn zeros(shape: BlastShape) -> Self {
        Self::from_parts_unchecked(
            shape,
            vec![T::zero(); shape.u_len()],
            vec![T::zero(); shape.v_len()],
            vec![T::zero(); shape.s_len()],
        )
    }

    #[inline]
    pub fn shape(&self) -> BlastShape {
        self.shape
    }

    pub fn param_count(&self) -> usize {
        self.shape.param_count()
    }

    pub fn matvec_flops(&self) -> usize {
        self.shape.matvec_flops()
    }

    /// Number of scalars actually held in the three factor buffers.
    pub fn stored_len(&self) -> usize {
        self.u.len() + self.v.len() + self.s.len()
    }

    /// `U_i` as a row-major `p x r` slice.
    #[inline]
    pub fn u_block(&self, i: usize) -> &[T] {
        let len = self.shape.p() * self.shape.r;
        &self.u[i * len..(i + 1) * len]
    }

    /// `V_j` as a row-major `q x r` slice.
    #[inline]
    pub fn v_block(&self, j: usize) -> &[T] {
        let len = self.shape.q() * self.shape.r;
        &self.v[j * len..(j + 1) * len]
    }

    /// `s_ij`.
    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> &[T] {
        let r = self.shape.r;
        let k = i * self.shape.b + j;
        &self.s[k * r..(k + 1) * r]
    }

    pub fn u_matrix(&self, i: usize) -> DenseMatrix<T> {
        DenseMatrix::from_vec_unchecked(self.shape.p(), self.shape.r, self.u_block(i).to_vec())
    }

    pub fn v_matrix(&self, j: usize) -> DenseMatrix<T> {
        DenseMatrix::from_vec_unchecked(self.shape.q(), self.shape.r, self.v_block(j).to_vec())
    }

    pub fn u_data(&self) -> &[T] {
        &self.u
    }
    pub fn v_data(&self) -> &[T] {
        &self.v
    }
    pub fn s_data(&self) -> &[T] {
        &self.s
    }

    pub(crate) fn u_block_mut(&mut self, i: usize) -> &mut [T] {
        let len = self.shape.p() * self.shape.r;
        &mut self.u[i * len..(i + 1) * len]
    }

    pub(crate) fn v_block_mut(&mut self, j: usize) -> &mut [T] {
        let len = self.shape.q() * self.shape.r;
        &mut self.v[j * len..(j + 1) * len]
    }

    pub(crate) fn coupling_mut(&mut self, i: usize, j: usize) -> &mut [T] {
        let r = self.shape.r;
        let k = i * self.shape.b + j;
        &mut self.s[k * r..(k + 1) * r]
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .chain(&self.s)
            .all(|x| x.is_finite())
    }

    /// Multiplies every entry of `U` and `V` by `c`; couplings are left alone.
    pub fn scale_bases(&self, c: T) -> Self {
        let mut out = self.clone();
        out.u.iter_mut().chain(out.v.iter_mut()).for_each(|x| *x = *x * c);
        out
    }

    pub fn cast<U: Scalar>(&self) -> BlastMatrix<U> {
        let conv = |buf: &[T]| buf.iter().map(|x| U::from_f64_lossy(x.to_f64_lossless())).collect();
        BlastMatrix::from_parts_unchecked(self.shape, conv(&self.u), conv(&self.v), conv(&self.s))
    }
}

fn check_blocks<T: Scalar>(
    name: &str,
    blocks: &[DenseMatrix<T>],
    b: usize,
    rows: usize,
    r: usize,
) -> Result<()> {
    if blocks.len() != b {
        return Err(Error::dims(format!("{name} needs {b} blocks, got {}", blocks.len())));
    }
    if let Some((k, blk)) = blocks.iter().enumerate().find(|(_, x)| x.shape() != (rows, r)) {
        return Err(Error::dims(format!(
            "{name} block {k} is {}x{}, expected {rows}x{r}",
            blk.rows(),
            blk.cols()
        )));
    }
    Ok(())
}

/// Embeds the low-rank matrix `uf * vf^T` with every coupling vector set to ones.
///
/// `U_i` is the `i`-th row chunk of `uf`, `V_j` the `j`-th row chunk of `vf`.
pub fn low_rank_embed<T: Scalar>(
    uf: &DenseMatrix<T>,
    vf: &DenseMatrix<T>,
    b: usize,
) -> Result<BlastMatrix<T>> {
    if uf.cols() != vf.cols() {
        return Err(Error::dims(format!(
            "left factor has rank {}, right factor has rank {}",
            uf.cols(),
            vf.cols()
        )));
    }
    let shape = BlastShape::new(uf.rows(), vf.rows(), b, uf.cols())?;
    // Row chunks of a row-major m x r matrix are already the stacked-blocks layout.
    BlastMatrix::from_parts(
        shape,
        uf.as_slice().to_vec(),
        vf.as_slice().to_vec(),
        vec![T::one(); shape.s_len()],
    )
}

/// Block-diagonal matrix with full-rank diagonal blocks (`r = p`).
///
/// Uses `U_i = D_i`, `V_i = I`, `s_ii = 1` and `s_ij = 0` off the diagonal, so
/// the diagonal blocks are reproduced exactly and the rest are exact zeros.
pub fn block_diagonal_embed<T: Scalar>(blocks: &[DenseMatrix<T>]) -> Result<BlastMatrix<T>> {
    let Some(first) = blocks.first() else {
        return Err(Error::dims("block-diagonal embedding needs at least one block"));
    };
    let p = first.rows();
    if let Some(k) = blocks.iter().position(|d| d.shape() != (p, p)) {
        return Err(Error::dims(format!(
            "diagonal block {k} is {}x{}, expected {p}x{p}",
            blocks[k].rows(),
            blocks[k].cols()
        )));
    }
    let identity = DenseMatrix::identity(p);
    let pairs: Vec<_> = blocks.iter().map(|d| (d.clone(), identity.clone())).collect();
    block_diagonal_embed_factored(&pairs)
}

/// Block-diagonal matrix whose diagonal blocks are given in factored form
/// `D_i = L_i R_i^T` (`L_i` is `p x r`, `R_i` is `q x r`).
pub fn block_diagonal_embed_factored<T: Scalar>(
    pairs: &[(DenseMatrix<T>, DenseMatrix<T>)],
) -> Result<BlastMatrix<T>> {
    let Some((l0, r0)) = pairs.first() else {
        return Err(Error::dims("block-diagonal embedding needs at least one block"));
    };
    let b = pairs.len();
    let (p, q, r) = (l0.rows(), r0.rows(), l0.cols());
    let left: Vec<_> = pairs.iter().map(|(l, _)| l.clone()).collect();
    let right: Vec<_> = pairs.iter().map(|(_, rt)| rt.clone()).collect();
    let s: Vec<Vec<T>> = (0..b * b)
        .map(|k| {
            let fill = if k / b == k % b { T::one() } else { T::zero() };
            vec![fill; r]
        })
        .collect();
    BlastMatrix::new(b * p, b * q, b, r, &left, &right, &s)
}

/// Embeds a block low-rank matrix with uniform per-block rank `t`.
///
/// `grid[i][j] = (L_ij, R_ij)` with `L_ij` `p x t` and `R_ij` `q x t`, so block
/// `(i, j)` is `L_ij R_ij^T`. The result has rank parameter `r = b t`: factor
/// columns are grouped into `b` slots of width `t`, block `(i, j)` lives in
/// slot `(i + j) mod b`, and `s_ij` is the indicator of that slot. The cyclic
/// slot assignment gives every `U_i` and every `V_j` each slot exactly once.
pub fn blr_embed<T: Scalar>(
    grid: &[Vec<(DenseMatrix<T>, DenseMatrix<T>)>],
) -> Result<BlastMatrix<T>> {
    let b = grid.len();
    if b == 0 || grid.iter().any(|row| row.len() != b) {
        return Err(Error::dims("BLR factor grid must be square and non-empty"));
    }
    let (l0, r0) = &grid[0][0];
    let (p, q, t) = (l0.rows(), r0.rows(), l0.cols());
    for (i, row) in grid.iter().enumerate() {
        for (j, (l, rt)) in row.iter().enumerate() {
            if l.cols() != t || rt.cols() != t {
                return Err(Error::RankMismatch(format!(
                    "block ({i}, {j}) has ranks ({}, {}), expected {t}",
                    l.cols(),
                    rt.cols()
                )));
            }
            if l.rows() != p || rt.rows() != q {
                return Err(Error::dims(format!(
                    "block ({i}, {j}) factors are {}x{t} and {}x{t}, expected {p}x{t} and {q}x{t}",
                    l.rows(),
                    rt.rows()
                )));
            }
        }
    }
    let r = b * t;
    let shape = BlastShape::new(b * p, b * q, b, r)?;
    let mut out = BlastMatrix::zeros(shape);
    for i in 0..b {
        for j in 0..b {
            let slot = (i + j) % b;
            let (l, rt) = &grid[i][j];
            let u = out.u_block_mut(i);
            for row in 0..p {
                u[row * r + slot * t..row * r + (slot + 1) * t].copy_from_slice(l.row(row));
            }
            let v = out.v_block_mut(j);
            for row in 0..q {
                v[row * r + slot * t..row * r + (slot + 1) * t].copy_from_slice(rt.row(row));
            }
            out.coupling_mut(i, j)[slot * t..(slot + 1) * t].fill(T::one());
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFiniteInput("BLR factors"));
    }
    Ok(out)
}
