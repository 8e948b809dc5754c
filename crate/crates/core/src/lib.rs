//! Laser-threshold magnetometry with NV-doped diamond in an external-cavity
//! diode laser.
//!
//! The chain runs from NV level populations ([`nv_levels`]) through the
//! equivalent cavity ([`cavity`]) and diode rate equations ([`laser`]) to
//! ODMR spectra and field sensitivity ([`sensing`]), with parameter search in
//! [`optimize`] and file formats in [`config_io`].

pub mod cavity;
pub mod config_io;
pub mod constants;
pub mod error;
pub mod laser;
pub mod nv_levels;
pub mod optimize;
pub mod sensing;

pub use error::{Error, ErrorCategory, Result};

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
/// Output order always matches the index order.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
