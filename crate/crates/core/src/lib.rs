#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fatigue;
pub mod fem;
pub mod geometry;
pub mod material;
pub mod matfit;
pub mod mesh;
mod plot;
pub mod rig;
pub mod units;

pub use analysis::{AnalysisOptions, CampaignReport, StepSummary};
pub use error::{Error, Result};
pub use fatigue::{DamageState, FatigueParams};
pub use fem::{FemModel, MaterialAssignment, StaticCurve};
pub use geometry::{ChannelMode, PneuNetGeometry, RegionTag};
pub use mesh::{generate_mesh, Mesh};
pub use rig::{AngleMap, NoiseParams, StaircaseProtocol, TrialLog};
