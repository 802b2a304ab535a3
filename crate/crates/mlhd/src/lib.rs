//! File formats, synthetic data, PCA and the command-line front end for
//! [`mlhd_core`].

mod error;
pub mod io;
pub mod model_file;
pub mod pca;
pub mod toy;

pub use error::{Error, Result};
