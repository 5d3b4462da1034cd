pub mod complexity;
pub mod experiment;
pub mod simulate;
pub mod synth;
pub mod verify;
