//! Analytic side: the Laplace root and renewal solver behind the
//! contraction rate, the overlap deficit of the intake density, the age
//! coalescence bounds, and the resulting bound curves.

mod age;
mod bounds;
mod eta;
mod renewal;
mod report;

pub use age::{age_bound_params, tau_a_tail_bound, AgeBound, AgeCase, AgeParams, AgeTailBound};
pub use bounds::{
    exp_case_bounds, main_tv_curve, main_w1_curve, phase_split, BoundCurve, CurveForm, CurveKind,
    ExpCaseBounds, ExpCaseInputs, PhaseConstants, PhaseSplit, RateTerm,
};
pub use eta::{eta, eta_envelope, EnvelopeSource, EtaEnvelope, HolderData, TailData};
pub use renewal::{
    exponential_case_decay, find_w, rho, solve_renewal, solve_with, LaplaceRoot, RenewalKernel,
    RenewalSolution,
};
pub use report::{
    compute_rates, AgeSummary, ContractionRoute, InitialMoments, Quantity, RateReport,
    RateSettings, RenewalSummary, SCHEMA_VERSION,
};
