//! Every analytic quantity of a run, with a provenance string per constant.

use serde::{Deserialize, Serialize};

use crate::distributions::Family;
use crate::error::{invalid, Result};
use crate::pdmp_sim::Model;

use super::age::{tau_a_tail_bound, AgeBound, AgeCase, AgeParams, AgeTailBound};
use super::bounds::{
    exp_case_bounds, main_tv_curve, main_w1_curve, phase_split, BoundCurve, ExpCaseBounds,
    ExpCaseInputs, PhaseConstants, PhaseSplit,
};
use super::eta::{eta_envelope, EtaEnvelope, HolderData};
use super::renewal::{find_w, rho, solve_renewal, LaplaceRoot, RenewalKernel};

pub const SCHEMA_VERSION: u32 = 1;

/// How the contraction rate `v2'` is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractionRoute {
    /// Exponential formula when `G` is exponential, renewal solver otherwise.
    #[default]
    Auto,
    Exponential,
    Renewal,
}

/// Knobs of the analytic computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSettings {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub age: Option<AgeParams>,
    pub age_case: Option<AgeCase>,
    pub holder: Option<HolderData>,
    pub v3: Option<f64>,
    pub route: ContractionRoute,
    /// Renewal tilt is `w (1 - w_eps_fraction)`.
    pub w_eps_fraction: f64,
    pub w_cap: f64,
    pub renewal_step: f64,
    /// Set when the tilted forcing is known to be directly Riemann integrable.
    pub dri: bool,
    pub age_draws: usize,
    pub eps_max: f64,
    pub seed: u64,
}

impl Default for RateSettings {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: None,
            age: None,
            age_case: None,
            holder: None,
            v3: None,
            route: ContractionRoute::Auto,
            w_eps_fraction: 0.05,
            w_cap: 1e3,
            renewal_step: 1e-3,
            dri: false,
            age_draws: 1_000_000,
            eps_max: 1.0,
            seed: 0,
        }
    }
}

/// Moments of the two initial laws entering the constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialMoments {
    /// `E[X0 + X0~]`.
    pub mean_sum: f64,
    /// `E[X0 v X0~]`.
    pub mean_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub provenance: String,
}

fn q(value: f64, provenance: &str) -> Quantity {
    Quantity {
        value,
        provenance: provenance.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeSummary {
    pub case: AgeCase,
    pub params: Option<AgeParams>,
    pub p1: Quantity,
    pub p2: Quantity,
    pub c1: Quantity,
    pub v1: Quantity,
    pub v1_cap: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalSummary {
    pub w: LaplaceRoot,
    pub tilt: f64,
    pub c_renewal: Quantity,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub schema_version: u32,
    pub model: Model,
    pub moments: InitialMoments,
    pub rho: Quantity,
    pub v_g: Quantity,
    pub renewal: Option<RenewalSummary>,
    pub age: AgeSummary,
    pub eta_envelope: EtaEnvelope,
    pub constants: PhaseConstants,
    pub split: PhaseSplit,
    pub provenance: Vec<(String, String)>,
    pub tv_curve: BoundCurve,
    pub w1_curve: BoundCurve,
    pub exp_case: Option<ExpCaseBounds>,
}

const P_AGE: &str = "age coalescence tail bound (geometric/exponential combination)";
const P_AGE_FLOOR: &str = "age coalescence under a positive hazard floor: Exp(zeta(0)) domination";
const P_RHO: &str = "mean contraction per renewal: 1 - E[exp(-Theta dT)]";
const P_VG: &str = "exponential moment abscissa of G";
const P_W: &str = "Laplace root of the renewal kernel: sup{u : psi_J(u) < 1}";
const P_CREN: &str = "grid maximum of the tilted renewal solution";
const P_EXP: &str = "contraction for exponential waits: Z(t) <= exp(-lambda rho t)";
const P_MOMENT: &str = "moment bound E[X0+X0~](1 + 1/(1-rho)) + 2E[U]/rho";

fn lambda_of(family: &Family) -> Option<f64> {
    match *family {
        Family::Exponential { rate } => Some(rate),
        Family::Gamma { shape, scale } if shape == 1.0 => Some(1.0 / scale),
        Family::Weibull { shape, scale } if shape == 1.0 => Some(1.0 / scale),
        Family::ShiftedExponential { shift, rate } if shift == 0.0 => Some(rate),
        _ => None,
    }
}

/// Computes every constant, rate and bound curve for `model` started from
/// initial laws with the given moments.
pub fn compute_rates(model: &Model, moments: InitialMoments, s: &RateSettings) -> Result<RateReport> {
    let g = &model.inter_arrival;
    let h = &model.metabolic;
    let f = &model.intake;
    let profile = model.profile();
    let mut prov: Vec<(String, String)> = Vec::new();

    let rho_v = rho(g, h);
    if !(rho_v > 0.0 && rho_v < 1.0) {
        return Err(invalid(format!("rho = {rho_v} outside (0, 1)")));
    }
    let v_g = g.family.laplace_abscissa();
    let lambda = lambda_of(&g.family);

    // Phase 1: age coalescence.
    let case = s.age_case.unwrap_or_else(|| AgeCase::detect(profile));
    let params = match (case, s.age) {
        (AgeCase::PositiveFloor, _) => None,
        (_, Some(p)) => Some(p),
        (_, None) => Some(AgeParams::default_for(profile)?),
    };
    let bound = AgeBound::new(
        case,
        profile,
        params.unwrap_or(AgeParams { eps: 0.0, b: 0.0, c: 0.0 }),
    )?;
    let tail: AgeTailBound = tau_a_tail_bound(&bound, s.age_draws, s.seed)?;
    let p_age = if case == AgeCase::PositiveFloor { P_AGE_FLOOR } else { P_AGE };
    let age = AgeSummary {
        case,
        params,
        p1: q(bound.p1, p_age),
        p2: q(bound.p2, p_age),
        c1: q(tail.c1, p_age),
        v1: q(tail.v1, p_age),
        v1_cap: q(tail.cap, p_age),
    };

    // Phase 2: contraction.
    let use_exp = match s.route {
        ContractionRoute::Auto => lambda.is_some(),
        ContractionRoute::Exponential => {
            if lambda.is_none() {
                return Err(invalid("exponential contraction route needs exponential G"));
            }
            true
        }
        ContractionRoute::Renewal => false,
    };
    let (c2_prime, v2_prime, renewal) = if use_exp {
        let l = lambda.expect("checked");
        prov.push(("v2_prime".into(), P_EXP.into()));
        (1.0, l * rho_v, None)
    } else {
        let kernel = RenewalKernel::new(g, h, 1.0)?;
        let w = find_w(&kernel, s.w_cap)?;
        let tilt = w.value() * (1.0 - s.w_eps_fraction);
        let sol = solve_renewal(&kernel, tilt, s.renewal_step, 10.0 / w.value(), s.dri)?;
        prov.push(("w".into(), P_W.into()));
        prov.push(("v2_prime".into(), "renewal tilt w - eps_w".into()));
        let summary = RenewalSummary {
            w,
            tilt,
            c_renewal: q(sol.c_renewal(), P_CREN),
            residual: sol.residual(),
        };
        (sol.c_renewal(), tilt, Some(summary))
    };

    // Phase 3: waiting for an intake.
    let (c3, v3) = match (s.v3, lambda) {
        (Some(v), _) => (g.laplace(v), v),
        (None, Some(l)) => (1.0, l),
        (None, None) => {
            let v = if v_g.is_finite() { v_g / 2.0 } else { 1.0 / g.mean() };
            (g.laplace(v), v)
        }
    };
    if !c3.is_finite() {
        return Err(invalid(format!("psi_G({v3}) is infinite; choose v3 < {v_g}")));
    }
    prov.push(("c3".into(), "exponential moment of G: psi_G(v3)".into()));

    // Phase 4: jump coupling.
    let env = eta_envelope(s.eps_max, &f.family, s.holder.as_ref())?;
    prov.push(("c4".into(), "envelope sup_{x<=e} eta(x) <= C e^v".into()));

    let moment_factor =
        moments.mean_sum * (1.0 + 1.0 / (1.0 - rho_v)) + 2.0 * f.mean() / rho_v;
    prov.push(("moment_factor".into(), P_MOMENT.into()));
    let constants = PhaseConstants {
        c1: tail.c1,
        v1: tail.v1,
        c2_prime,
        v2_prime,
        c3,
        v3,
        c4: env.c,
        v4_prime: env.v,
        moment_factor,
        mean_theta: h.mean(),
        mean_wait: g.mean(),
    };
    let split = phase_split(&constants, s.alpha, s.beta)?;

    let exp_case = match lambda {
        Some(l) => Some(exp_case_bounds(&ExpCaseInputs {
            lambda: l,
            rho: rho_v,
            eta_constant: env.c,
            h: env.v,
            mean_sum_x0: moments.mean_sum,
            mean_max_x0: moments.mean_max,
            mean_u: f.mean(),
        })?),
        None => None,
    };

    Ok(RateReport {
        schema_version: SCHEMA_VERSION,
        model: model.clone(),
        moments,
        rho: q(rho_v, P_RHO),
        v_g: q(v_g, P_VG),
        renewal,
        age,
        eta_envelope: env,
        tv_curve: main_tv_curve(&constants, &split),
        w1_curve: main_w1_curve(&constants, &split),
        constants,
        split,
        provenance: prov,
        exp_case,
    })
}
