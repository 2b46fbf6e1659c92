pub mod io;
pub mod rng;
pub mod stats;
