pub mod chern;
pub mod cohomology;
pub mod exact;
pub mod frequency;
pub mod harness;
pub mod odometer;
pub mod random;
pub mod spectral;
