//! Superstabilizing compensator synthesis from noisy ARX data.

pub mod arx;
pub mod certify;
pub mod conic;
pub mod data;
pub mod lp;
pub mod poly;
pub mod sos;
pub mod synth;
pub mod verify;
