//! Desk-scale laboratory for studying how dataset overlap and task overlap
//! between two training sets drive representational similarity of the
//! resulting models.
//!
//! The pipeline is: [`synthgen`] renders a compositional shape/digit/color
//! image dataset, [`splitkit`] builds training-set pairs with an exact overlap
//! level, [`tinynet`] trains small models on each side, [`simmetrics`]
//! compares their backbone representations, and [`analysis`] relates overlap
//! to similarity. [`runner`] orchestrates full sweeps.

pub mod analysis;
pub mod par;
pub mod rng;
pub mod runner;
pub mod simmetrics;
pub mod splitkit;
pub mod synthgen;
pub mod tinynet;
