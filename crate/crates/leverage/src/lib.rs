pub mod agents;
pub mod dynamics;
pub mod emulator;
pub mod expfit;
pub mod market;
pub mod nn;
pub mod util;
