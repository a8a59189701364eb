pub mod imgcore;
pub mod geom;
pub mod layers;
pub mod verifier;
pub mod synth;
pub mod rewards;
pub mod flowlab;
pub mod bench;
