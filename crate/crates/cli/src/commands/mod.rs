pub mod evaluate;
pub mod fuse;
pub mod generate;
pub mod ot_loss;
pub mod stats;
