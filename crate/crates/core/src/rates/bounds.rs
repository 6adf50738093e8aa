//! Bound curves `t -> bound` for the total variation and Wasserstein
//! distances between the laws of two copies of the process.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `c exp(-v fraction t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTerm {
    pub label: String,
    pub c: f64,
    pub v: f64,
    pub fraction: f64,
}

impl RateTerm {
    pub fn new(label: &str, c: f64, v: f64, fraction: f64) -> Self {
        Self {
            label: label.to_string(),
            c,
            v,
            fraction,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.c * (-self.v * self.fraction * t).exp()
    }

    /// Overall exponent `v fraction`.
    pub fn exponent(&self) -> f64 {
        self.v * self.fraction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Tv,
    W1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CurveForm {
    /// `1 - prod_i (1 - term_i(t))_+`.
    Product { terms: Vec<RateTerm> },
    /// `sum_i term_i(t)`.
    Sum { terms: Vec<RateTerm> },
    /// Random division of `[0, t]` at the first and last intakes, for
    /// exponential inter-intake times.
    RandomDivision {
        lambda: f64,
        rho: f64,
        h: f64,
        eta_constant: f64,
        mean_max_x0: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub kind: CurveKind,
    pub provenance: String,
    #[serde(flatten)]
    pub form: CurveForm,
}

impl BoundCurve {
    pub fn new(kind: CurveKind, provenance: &str, form: CurveForm) -> Self {
        Self {
            kind,
            provenance: provenance.to_string(),
            form,
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let raw = match &self.form {
            CurveForm::Product { terms } => {
                1.0 - terms
                    .iter()
                    .map(|term| (1.0 - term.value(t)).max(0.0))
                    .product::<f64>()
            }
            CurveForm::Sum { terms } => terms.iter().map(|term| term.value(t)).sum(),
            CurveForm::RandomDivision {
                lambda,
                rho,
                h,
                eta_constant,
                mean_max_x0,
            } => {
                let eps = (-lambda * rho * t / (1.0 + h)).exp();
                let m = 1.0 - rho;
                // e^{-lt}(e^{l m t} - 1 - l m t) rewritten without overflow.
                let growth = (-lambda * rho * t).exp() - (-lambda * t).exp() * (1.0 + lambda * m * t);
                let late = (-lambda * t).exp() * (1.0 + lambda * t)
                    + mean_max_x0 / (eps * m * m) * growth;
                let jump = eta_constant * eps.powf(*h);
                1.0 - (1.0 - late).max(0.0) * (1.0 - jump).max(0.0)
            }
        };
        match self.kind {
            CurveKind::Tv => raw.clamp(0.0, 1.0),
            CurveKind::W1 => raw.max(0.0),
        }
    }

    /// Slowest exponent among the terms, where defined.
    pub fn rate(&self) -> Option<f64> {
        match &self.form {
            CurveForm::Product { terms } | CurveForm::Sum { terms } => terms
                .iter()
                .map(RateTerm::exponent)
                .min_by(f64::total_cmp),
            CurveForm::RandomDivision { lambda, rho, h, .. } => Some(lambda * rho * h / (1.0 + h)),
        }
    }
}

/// Constants of the three-phase bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseConstants {
    pub c1: f64,
    pub v1: f64,
    /// Contraction constant and rate of the Wasserstein phase.
    pub c2_prime: f64,
    pub v2_prime: f64,
    pub c3: f64,
    pub v3: f64,
    pub c4: f64,
    pub v4_prime: f64,
    /// `E[X0 + X0~](1 + 1/(1 - rho)) + 2 E[U] / rho`.
    pub moment_factor: f64,
    pub mean_theta: f64,
    pub mean_wait: f64,
}

/// Derived exponents and splitting fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSplit {
    pub v_prime: f64,
    pub v2: f64,
    pub v4: f64,
    pub c2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_w1: f64,
}

impl PhaseSplit {
    /// Phase-3 threshold `exp(-v' (beta - alpha) t)`.
    pub fn epsilon_at(&self, t: f64) -> f64 {
        (-self.v_prime * (self.beta - self.alpha) * t).exp()
    }
}

/// `v' = v2'/(1 + v4')`, and `alpha`, `beta` equalising
/// `alpha v1 = (beta - alpha) v2 = (1 - beta) v3` unless given.
pub fn phase_split(k: &PhaseConstants, alpha: Option<f64>, beta: Option<f64>) -> Result<PhaseSplit> {
    let v_prime = k.v2_prime / (1.0 + k.v4_prime);
    let v2 = k.v2_prime - v_prime;
    let v4 = k.v4_prime * v_prime;
    let r = 1.0 / (1.0 / k.v1 + 1.0 / v2 + 1.0 / k.v3);
    let alpha = alpha.unwrap_or(r / k.v1);
    let beta = beta.unwrap_or(alpha + r / v2);
    if !(0.0 < alpha && alpha < beta && beta < 1.0) {
        return Err(invalid(format!("need 0 < alpha < beta < 1, got {alpha}, {beta}")));
    }
    Ok(PhaseSplit {
        v_prime,
        v2,
        v4,
        c2: k.moment_factor * k.c2_prime,
        alpha,
        beta,
        alpha_w1: k.v2_prime / (k.v1 + k.v2_prime),
    })
}

pub const TV_PROVENANCE: &str =
    "three-phase total variation bound: age coalescence, Wasserstein contraction, waiting for an intake, TV jump coupling";
pub const W1_PROVENANCE: &str =
    "Wasserstein bound: age coalescence tail plus contraction after coalescence";

pub fn main_tv_curve(k: &PhaseConstants, s: &PhaseSplit) -> BoundCurve {
    BoundCurve::new(
        CurveKind::Tv,
        TV_PROVENANCE,
        CurveForm::Product {
            terms: vec![
                RateTerm::new("age coalescence", k.c1, k.v1, s.alpha),
                RateTerm::new("contraction", s.c2, s.v2, s.beta - s.alpha),
                RateTerm::new("next intake", k.c3, k.v3, 1.0 - s.beta),
                RateTerm::new("jump coupling", k.c4, s.v4, s.beta - s.alpha),
            ],
        },
    )
}

pub fn main_w1_curve(k: &PhaseConstants, s: &PhaseSplit) -> BoundCurve {
    let c1 = (k.moment_factor + 2.0 * k.mean_theta + 2.0 * k.mean_wait) * k.c1;
    BoundCurve::new(
        CurveKind::W1,
        W1_PROVENANCE,
        CurveForm::Sum {
            terms: vec![
                RateTerm::new("age coalescence", c1, k.v1, s.alpha_w1),
                RateTerm::new("contraction", k.moment_factor * k.c2_prime, k.v2_prime, 1.0 - s.alpha_w1),
            ],
        },
    )
}

/// The two bounds available when inter-intake times are exponential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpCaseBounds {
    pub rho: f64,
    pub rate_method1: f64,
    pub rate_method2: f64,
    /// Deterministic division at `alpha = rho h/(1 + h + 2 rho h)`,
    /// `beta = 1 - alpha`, product form.
    pub method1_product: BoundCurve,
    /// `C exp(-rate_method1 t)`.
    pub method1: BoundCurve,
    pub method2_full: BoundCurve,
    /// `C exp(-rate_method2 t)`.
    pub method2: BoundCurve,
}

/// Inputs of the exponential-case bounds. `eta_constant` and `h` are the
/// envelope `sup_{x <= e} eta(x) <= eta_constant e^h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpCaseInputs {
    pub lambda: f64,
    pub rho: f64,
    pub eta_constant: f64,
    pub h: f64,
    pub mean_sum_x0: f64,
    pub mean_max_x0: f64,
    pub mean_u: f64,
}

pub fn exp_case_bounds(i: &ExpCaseInputs) -> Result<ExpCaseBounds> {
    let ExpCaseInputs { lambda, rho, eta_constant, h, mean_sum_x0, mean_max_x0, mean_u } = *i;
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda must be > 0, got {lambda}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !(h > 0.0 && eta_constant > 0.0) {
        return Err(invalid("jump-coupling envelope needs positive constants"));
    }
    let rate1 = lambda * rho * h / (1.0 + h + 2.0 * rho * h);
    let rate2 = lambda * rho * h / (1.0 + h);
    let c = mean_sum_x0 * (1.0 + 1.0 / (1.0 - rho)) + 2.0 * mean_u / rho;
    let alpha = rho * h / (1.0 + h + 2.0 * rho * h);
    let beta = 1.0 - alpha;
    let mid_rate = lambda * rho * h / (1.0 + h);
    let method1_product = BoundCurve::new(
        CurveKind::Tv,
        "exponential waits, deterministic division of [0, t]",
        CurveForm::Product {
            terms: vec![
                RateTerm::new("first intake", 1.0, lambda, alpha),
                RateTerm::new("next intake", 1.0, lambda, 1.0 - beta),
                RateTerm::new("contraction", c, mid_rate, beta - alpha),
                RateTerm::new("jump coupling", eta_constant, mid_rate, beta - alpha),
            ],
        },
    );
    let method1 = BoundCurve::new(
        CurveKind::Tv,
        "exponential waits, deterministic division, developed to one exponential",
        CurveForm::Sum {
            terms: vec![RateTerm::new("all phases", 2.0 + c + eta_constant, rate1, 1.0)],
        },
    );
    let method2_full = BoundCurve::new(
        CurveKind::Tv,
        "exponential waits, random division at the first and last intakes",
        CurveForm::RandomDivision {
            lambda,
            rho,
            h,
            eta_constant,
            mean_max_x0,
        },
    );
    let kappa = 1.0 - rho * h / (1.0 + h);
    let poisson = if kappa < 1.0 { (kappa - 1.0).exp() / kappa } else { 1.0 };
    let c2 = eta_constant + poisson + mean_max_x0 / (1.0 - rho).powi(2);
    let method2 = BoundCurve::new(
        CurveKind::Tv,
        "exponential waits, random division, developed to one exponential",
        CurveForm::Sum {
            terms: vec![RateTerm::new("all phases", c2, rate2, 1.0)],
        },
    );
    Ok(ExpCaseBounds {
        rho,
        rate_method1: rate1,
        rate_method2: rate2,
        method1_product,
        method1,
        method2_full,
        method2,
    })
}
