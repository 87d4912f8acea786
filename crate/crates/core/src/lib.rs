pub mod dist;
pub mod error;
pub mod experiment;
pub mod game;
pub mod ldp;
pub mod quad;
pub mod special;

pub use dist::{Atom, ConditionedDistribution, Continuous, Kind, Law, PayoffDistribution};
pub use error::{Error, Result};
