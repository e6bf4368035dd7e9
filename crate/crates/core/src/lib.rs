pub mod error;
pub mod jets;
pub mod lattice;
pub mod linalg;
pub mod measure;
pub mod minimizer;
pub mod operator;
pub mod scaling;
pub mod surface;
pub mod vacuum;
