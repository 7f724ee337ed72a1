pub mod dome;
pub mod error;
pub mod format;
pub mod grid;
pub mod joints;
pub mod objective;
pub mod occlusion;
pub mod planner;
pub mod scenario;
pub mod training;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/dome.md")]
    pub struct Dome;
    #[doc = include_str!("../../../book/src/occupancy.md")]
    pub struct Occupancy;
    #[doc = include_str!("../../../book/src/objective.md")]
    pub struct Objective;
    #[doc = include_str!("../../../book/src/planner.md")]
    pub struct Planner;
    #[doc = include_str!("../../../book/src/training.md")]
    pub struct Training;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
