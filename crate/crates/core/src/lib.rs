//! Strand-based hair built from chains of cylindrical 3D Gaussians.
//!
//! The crate covers the full pipeline: the hair model ([`model`]), tiled
//! differentiable splatting ([`raster`]), the fiber scattering model
//! ([`scatter`]), losses ([`loss`]) and gradients ([`grad`]), SGD with
//! density control ([`optim`]), Gabor orientation maps ([`gabor`]), file
//! formats ([`io`]) and the reconstruction stages ([`pipeline`]).

pub mod camera;
pub mod edit;
pub mod error;
pub mod exec;
pub mod field;
pub mod gabor;
pub mod grad;
pub mod grid;
pub mod io;
pub mod loss;
pub mod math;
pub mod mesh;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod raster;
pub mod scatter;
pub mod sh;
pub mod synthetic;

pub use error::{Error, Result};
