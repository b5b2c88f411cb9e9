//! Numerical laboratory for fractional Sobolev maps into Riemannian coverings.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: the three model coverings (universal cover of the circle,
//!   d-fold self-covers of the circle, antipodal cover of projective space),
//!   their exact geodesic distances, fibers and deck groups.
//! - [`sampling`]: cell-centre discretisations of maps on intervals and cubes.
//! - [`seminorm`]: Gagliardo seminorm and oscillation-functional quadrature.
//! - [`lifting`]: monodromy continuation of sampled paths and grids.
//! - [`constructions`]: helix, bubble and vortex maps, ball schedules and
//!   bubble towers.
//! - [`experiments`]: seeded verification suites with CSV/JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod constructions;
pub mod defaults;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod lifting;
pub mod random;
pub mod sampling;
pub mod seminorm;
pub mod sum;

pub use error::{Error, Result};
pub use geometry::{Covering, DeckElement, ManifoldPoint, PointKind, Side};
pub use lifting::{LiftClassification, LiftResult, MonodromyResult};
pub use sampling::{FractionalParams, GridMap, MapDescriptor, SampledPath, SubsetSelector};
pub use seminorm::{Metric, SeminormKind, SeminormOptions, SeminormReport};
