//! Formal transversalization: the rank-1 inductive step with locus surgery,
//! the ball-local extension and the global covering.

mod distance;
mod extend;
mod extension;
mod locus;
mod perturb;
mod step;
mod surgery;

pub use extension::{
    global_extension, local_extension, Ball, BallRecord, ExtensionConfig, GlobalExtensionOutput,
    LocalExtensionOutput, Region,
};
pub use locus::{trace_zero_set, LevelCurve};
pub use step::{
    inductive_step, singular_locus, FaultBump, InductiveStepConfig, PlateRecord, Rank1Field,
    StepCertificate, StepOutput, SurgeryRecord, EPS_FLOOR_CELLS,
};
pub use surgery::{s_curve_reconnect, segments_cross, Clearance};
