//! File formats: NPY dense matrices, the BLAST factor container and
//! convergence-history CSV.

pub mod container;
pub mod history;
pub mod npy;

pub use container::{read_blast, write_blast, Manifest, FORMAT_VERSION};
pub use history::{read_history_csv, write_history_csv};
pub use npy::{read_dense, read_dense_with_dtype, write_dense, Dtype, NpyElement};
