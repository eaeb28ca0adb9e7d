//! Compression of psd factorizations and quantum models by complex Gaussian
//! sketches, with error certification and dimension lower bounds.

pub mod bounds;
pub mod compressor;
pub mod models;
pub mod numerics;
pub mod projection;
pub mod rng;
