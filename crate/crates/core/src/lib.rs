pub mod dynamics;
pub mod tabular;
pub mod neural;
pub mod env;
pub mod imitation;
pub mod expert;
pub mod analysis;
