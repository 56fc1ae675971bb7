pub mod discount;
pub mod dist;
pub mod fit;
pub mod io;
pub mod optim;
pub mod report;
pub mod screen;
pub mod series;
pub mod sim;
pub mod special;
pub mod synth;
