//! Stochastic upper bounds for the age coalescence time `tau_A`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Geometric};
use serde::{Deserialize, Serialize};

use crate::distributions::HazardProfile;
use crate::error::{hypothesis, invalid, Result};
use crate::rng::{map_replicas, stream};

/// Which hazard regime the bound is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeCase {
    /// `zeta(0) > 0`: `tau_A` is dominated by `Exp(zeta(0))`.
    PositiveFloor,
    /// Case (i): `d < inf`.
    FiniteSupport,
    /// Case (ii): `d = inf`, `sup zeta < inf`.
    BoundedHazard,
    /// Case (iii): `d = inf`, `sup zeta = inf`.
    UnboundedHazard,
}

impl AgeCase {
    pub fn detect(profile: &HazardProfile) -> Self {
        if profile.zeta(0.0) > 0.0 {
            AgeCase::PositiveFloor
        } else if profile.d.is_finite() {
            AgeCase::FiniteSupport
        } else if profile.sup_zeta.is_finite() {
            AgeCase::BoundedHazard
        } else {
            AgeCase::UnboundedHazard
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeCase::PositiveFloor => "floor",
            AgeCase::FiniteSupport => "i",
            AgeCase::BoundedHazard => "ii",
            AgeCase::UnboundedHazard => "iii",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        Ok(match s {
            "floor" | "positive_floor" => AgeCase::PositiveFloor,
            "i" | "finite_support" => AgeCase::FiniteSupport,
            "ii" | "bounded_hazard" => AgeCase::BoundedHazard,
            "iii" | "unbounded_hazard" => AgeCase::UnboundedHazard,
            _ => return Err(invalid(format!("unknown age case {s:?}"))),
        })
    }
}

/// Tuning of the age coalescence construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeParams {
    pub eps: f64,
    pub b: f64,
    pub c: f64,
}

impl AgeParams {
    /// A valid choice spaced inside the constraints `eps > a/2`,
    /// `a < b < c < d`, `c > b + eps`.
    pub fn default_for(profile: &HazardProfile) -> Result<Self> {
        let a = profile.a;
        if profile.d.is_finite() {
            let s = profile.d - 1.5 * a;
            if !(s > 0.0) {
                return Err(hypothesis(
                    "case (i)",
                    format!("needs d > 3a/2, got a = {a}, d = {}", profile.d),
                ));
            }
            let eps = a / 2.0 + s / 4.0;
            let b = a + s / 4.0;
            Ok(Self { eps, b, c: b + eps + s / 4.0 })
        } else {
            let s = profile.family().quantile(0.5) - a;
            let s = if s > 0.0 { s } else { 1.0 };
            let eps = a / 2.0 + s / 4.0;
            let b = a + s / 2.0;
            Ok(Self { eps, b, c: b + eps + s / 2.0 })
        }
    }
}

/// The bound variable of one case, with its success probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeBound {
    pub case: AgeCase,
    pub params: AgeParams,
    pub p1: f64,
    pub p2: f64,
    pub d: f64,
    /// Rate of the exponential pieces: `zeta(0)` for the floor case,
    /// `zeta(b)` in case (ii), `zeta(c)` in case (iii).
    pub rate: f64,
}

/// `(p1, p2)` for a case after checking its hypotheses against the profile.
pub fn age_bound_params(
    case: AgeCase,
    profile: &HazardProfile,
    eps: f64,
    b: f64,
    c: f64,
) -> Result<(f64, f64)> {
    let bound = AgeBound::new(case, profile, AgeParams { eps, b, c })?;
    Ok((bound.p1, bound.p2))
}

impl AgeBound {
    pub fn new(case: AgeCase, profile: &HazardProfile, params: AgeParams) -> Result<Self> {
        let z = |t: f64| profile.zeta(t);
        let (a, d) = (profile.a, profile.d);
        if case == AgeCase::PositiveFloor {
            if !(z(0.0) > 0.0) {
                return Err(hypothesis("zeta(0) > 0", "the hazard vanishes at 0"));
            }
            return Ok(Self { case, params, p1: 1.0, p2: 1.0, d, rate: z(0.0) });
        }
        let AgeParams { eps, b, c } = params;
        if !(eps > a / 2.0) {
            return Err(hypothesis("eps > a/2", format!("eps = {eps}, a = {a}")));
        }
        if !(a < b && b < c && c < d) {
            return Err(hypothesis(
                "a < b < c < d",
                format!("a = {a}, b = {b}, c = {c}, d = {d}"),
            ));
        }
        if !(c > b + eps) {
            return Err(hypothesis("c > b + eps", format!("b = {b}, c = {c}, eps = {eps}")));
        }
        if !(z(b) > 0.0) {
            return Err(hypothesis("zeta(b) > 0", format!("b = {b}")));
        }
        let step = (-b * z(b + eps)).exp() * -(-(c - b - eps) * z(b)).exp_m1();
        let p1_common = -(-(eps - a / 2.0) * z(eps + a / 2.0)).exp_m1();
        let (p1, p2, rate) = match case {
            AgeCase::FiniteSupport => {
                if !d.is_finite() {
                    return Err(hypothesis("case (i)", "needs d < inf"));
                }
                if !(d > 1.5 * a) {
                    return Err(hypothesis("case (i)", format!("needs d > 3a/2, got a = {a}, d = {d}")));
                }
                (p1_common, step, f64::NAN)
            }
            AgeCase::BoundedHazard => {
                if d.is_finite() || !profile.sup_zeta.is_finite() {
                    return Err(hypothesis("case (ii)", "needs d = inf and sup zeta < inf"));
                }
                let top = profile.sup_zeta;
                ((-b * top).exp(), z(b) / top, z(b))
            }
            AgeCase::UnboundedHazard => {
                if d.is_finite() || profile.sup_zeta.is_finite() {
                    return Err(hypothesis("case (iii)", "needs d = inf and sup zeta = inf"));
                }
                (p1_common, z(b) / z(c) * step, z(c))
            }
            AgeCase::PositiveFloor => unreachable!(),
        };
        if !(p1 > 0.0 && p2 > 0.0) {
            return Err(hypothesis(
                "positive coalescence probabilities",
                format!("p1 = {p1}, p2 = {p2}"),
            ));
        }
        Ok(Self { case, params, p1, p2, d, rate })
    }

    /// One draw of the bound variable.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let AgeParams { eps, b, c } = self.params;
        if self.case == AgeCase::PositiveFloor {
            return Exp::new(self.rate).expect("positive rate").sample(rng);
        }
        let h = geometric(self.p2, rng);
        match self.case {
            AgeCase::FiniteSupport => {
                let g: u64 = (0..h).map(|_| geometric(self.p1, rng)).sum();
                c + (2.0 * h as f64 - 1.0) * eps + (self.d - eps) * g as f64
            }
            AgeCase::BoundedHazard => {
                let g: u64 = (0..h).map(|_| geometric(self.p1, rng)).sum();
                g as f64 * b + gamma_sum(g, self.rate, rng)
            }
            AgeCase::UnboundedHazard => {
                let g: u64 = (0..h).map(|_| geometric(self.p1, rng)).sum();
                c - eps + 2.0 * eps * h as f64 + g as f64 * (c - eps) + gamma_sum(g, self.rate, rng)
            }
            AgeCase::PositiveFloor => unreachable!(),
        }
    }

    /// Upper limit for the tail exponent `v1`.
    ///
    /// Case (i) uses `1/2 min(-log(1-p2)/(2 eps), -log(1-p1 p2)/(d - eps))`.
    /// Cases (ii) and (iii) use half the abscissa of the moment generating
    /// function of the bound variable, found by bisection.
    pub fn tail_cap(&self) -> f64 {
        let AgeParams { eps, b, c } = self.params;
        match self.case {
            AgeCase::PositiveFloor => self.rate,
            AgeCase::FiniteSupport => {
                let a1 = -(-self.p2).ln_1p() / (2.0 * eps);
                let a2 = -(-self.p1 * self.p2).ln_1p() / (self.d - eps);
                0.5 * a1.min(a2)
            }
            AgeCase::BoundedHazard => 0.5 * mgf_abscissa(self.p1, self.p2, b, self.rate, 0.0),
            AgeCase::UnboundedHazard => {
                0.5 * mgf_abscissa(self.p1, self.p2, c - eps, self.rate, 2.0 * eps)
            }
        }
    }
}

/// Geometric on `{1, 2, ...}` with success probability `p`.
fn geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    1 + Geometric::new(p).expect("p in (0, 1)").sample(rng)
}

/// Sum of `n` independent `Exp(rate)` draws.
fn gamma_sum<R: Rng + ?Sized>(n: u64, rate: f64, rng: &mut R) -> f64 {
    if n == 0 {
        return 0.0;
    }
    Gamma::new(n as f64, 1.0 / rate).expect("positive shape").sample(rng)
}

/// `sup { u : E[exp(u B)] < inf }` for the nested geometric sums of (ii)/(iii).
fn mgf_abscissa(p1: f64, p2: f64, lead: f64, rate: f64, extra: f64) -> f64 {
    let finite = |u: f64| {
        let phi = (u * lead).exp() * rate / (rate - u);
        if (1.0 - p1) * phi >= 1.0 {
            return false;
        }
        let k = p1 * phi / (1.0 - (1.0 - p1) * phi) * (extra * u).exp();
        (1.0 - p2) * k < 1.0
    };
    let (mut lo, mut hi) = (0.0, rate);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if finite(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Monte Carlo tail of the bound variable and the exponential envelope
/// `P(bound > t) <= c1 exp(-v1 t)` fitted on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeTailBound {
    pub bound: AgeBound,
    pub c1: f64,
    pub v1: f64,
    pub cap: f64,
    pub draws: usize,
    pub grid: Vec<f64>,
    pub survival: Vec<f64>,
    #[serde(skip)]
    sorted: Vec<f64>,
}

const TAIL_GRID: usize = 60;
const CHUNK: usize = 10_000;

pub fn tau_a_tail_bound(bound: &AgeBound, draws: usize, seed: u64) -> Result<AgeTailBound> {
    if bound.case == AgeCase::PositiveFloor {
        return Ok(AgeTailBound {
            bound: *bound,
            c1: 1.0,
            v1: bound.rate,
            cap: bound.rate,
            draws: 0,
            grid: Vec::new(),
            survival: Vec::new(),
            sorted: Vec::new(),
        });
    }
    if draws < 1000 {
        return Err(invalid(format!("need at least 1000 draws, got {draws}")));
    }
    let chunks = draws.div_ceil(CHUNK);
    let mut sorted: Vec<f64> = map_replicas(chunks, |k| {
        let mut rng = stream(seed, k as u64);
        let n = CHUNK.min(draws - k * CHUNK);
        (0..n).map(|_| bound.sample(&mut rng)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    sorted.sort_by(f64::total_cmp);

    let n = sorted.len() as f64;
    let t_max = sorted[((1.0 - 1e-3) * n) as usize];
    let grid: Vec<f64> = (0..TAIL_GRID)
        .map(|i| t_max * i as f64 / (TAIL_GRID - 1) as f64)
        .collect();
    let survival: Vec<f64> = grid.iter().map(|&t| tail_fraction(&sorted, t)).collect();

    let upper: Vec<(f64, f64)> = grid
        .iter()
        .zip(&survival)
        .skip(TAIL_GRID / 2)
        .filter(|(_, &s)| s > 0.0)
        .map(|(&t, &s)| (t, s.ln()))
        .collect();
    let slope = {
        let m = upper.len() as f64;
        let mx = upper.iter().map(|p| p.0).sum::<f64>() / m;
        let my = upper.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = upper.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = upper.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    let cap = bound.tail_cap();
    let v1 = if slope < 0.0 { (-slope).min(cap) } else { cap };
    let c1 = grid
        .iter()
        .zip(&survival)
        .map(|(&t, &s)| s * (v1 * t).exp())
        .fold(1.0, f64::max);
    Ok(AgeTailBound {
        bound: *bound,
        c1,
        v1,
        cap,
        draws: sorted.len(),
        grid,
        survival,
        sorted,
    })
}

fn tail_fraction(sorted: &[f64], t: f64) -> f64 {
    let above = sorted.len() - sorted.partition_point(|&x| x <= t);
    above as f64 / sorted.len() as f64
}

impl AgeTailBound {
    /// `P(bound > t)`: exact for the floor case, Monte Carlo otherwise.
    pub fn probability(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if self.bound.case == AgeCase::PositiveFloor {
            return (-self.bound.rate * t).exp();
        }
        tail_fraction(&self.sorted, t)
    }

    pub fn envelope(&self, t: f64) -> f64 {
        (self.c1 * (-self.v1 * t).exp()).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Family;
    use crate::rng::stream;

    fn profile(f: Family) -> HazardProfile {
        HazardProfile::new(&f).unwrap()
    }

    fn rayleigh() -> HazardProfile {
        profile(Family::Weibull { shape: 2.0, scale: 2f64.sqrt() })
    }

    #[test]
    fn rayleigh_case_three_probabilities() {
        let p = rayleigh();
        assert!((p.zeta(1.7) - 1.7).abs() < 1e-12);
        assert_eq!(AgeCase::detect(&p), AgeCase::UnboundedHazard);
        let (p1, p2) = age_bound_params(AgeCase::UnboundedHazard, &p, 0.5, 1.0, 2.0).unwrap();
        assert!((p1 - (1.0 - (-0.25f64).exp())).abs() < 1e-12);
        let expect = 0.5 * (-1.5f64).exp() * (1.0 - (-0.5f64).exp());
        assert!((p2 - expect).abs() < 1e-12);
        assert!((p1 - 0.2212).abs() < 1e-4 && (p2 - 0.0439).abs() < 1e-4);
    }

    #[test]
    fn shifted_exponential_case_two() {
        let p = profile(Family::ShiftedExponential { shift: 1.0, rate: 2.0 });
        assert_eq!(AgeCase::detect(&p), AgeCase::BoundedHazard);
        let (p1, p2) = age_bound_params(AgeCase::BoundedHazard, &p, 0.6, 1.5, 2.5).unwrap();
        assert!((p1 - (-3.0f64).exp()).abs() < 1e-12);
        assert_eq!(p2, 1.0);
    }

    #[test]
    fn hypotheses_are_checked() {
        let p = profile(Family::ShiftedExponential { shift: 1.0, rate: 2.0 });
        assert!(age_bound_params(AgeCase::BoundedHazard, &p, 0.4, 1.5, 2.5).is_err());
        assert!(age_bound_params(AgeCase::BoundedHazard, &p, 0.6, 1.5, 2.0).is_err());
        assert!(age_bound_params(AgeCase::UnboundedHazard, &p, 0.6, 1.5, 2.5).is_err());
        let r = rayleigh();
        assert!(age_bound_params(AgeCase::FiniteSupport, &r, 0.5, 1.0, 2.0).is_err());
        // a = 1, d = 1.2 <= 3a/2.
        let u = profile(Family::Uniform { lo: 1.0, hi: 1.2 });
        assert!(AgeParams::default_for(&u).is_err());
    }

    #[test]
    fn default_params_are_valid() {
        for f in [
            Family::Uniform { lo: 0.5, hi: 3.0 },
            Family::ShiftedExponential { shift: 0.5, rate: 1.0 },
            Family::Weibull { shape: 2.0, scale: 1.0 },
            Family::Gamma { shape: 3.0, scale: 1.0 },
        ] {
            let p = profile(f);
            let params = AgeParams::default_for(&p).unwrap();
            AgeBound::new(AgeCase::detect(&p), &p, params).unwrap();
        }
    }

    #[test]
    fn finite_support_variable_has_floor() {
        let p = profile(Family::Uniform { lo: 0.5, hi: 3.0 });
        let b = AgeBound::new(AgeCase::FiniteSupport, &p, AgeParams::default_for(&p).unwrap()).unwrap();
        let mut rng = stream(1, 0);
        for _ in 0..1000 {
            assert!(b.sample(&mut rng) >= b.params.c + b.params.eps - 1e-12);
        }
    }

    #[test]
    fn floor_case_is_exact() {
        let p = profile(Family::Exponential { rate: 1.5 });
        let b = AgeBound::new(AgeCase::PositiveFloor, &p, AgeParams { eps: 0.0, b: 0.0, c: 0.0 }).unwrap();
        let tail = tau_a_tail_bound(&b, 0, 0).unwrap();
        assert_eq!(tail.probability(0.0), 1.0);
        assert!((tail.probability(2.0) - (-3.0f64).exp()).abs() < 1e-15);
        assert_eq!((tail.c1, tail.v1), (1.0, 1.5));
    }

    #[test]
    fn fitted_envelope_dominates_and_respects_cap() {
        let p = rayleigh();
        let b = AgeBound::new(AgeCase::UnboundedHazard, &p, AgeParams { eps: 0.5, b: 1.0, c: 2.0 }).unwrap();
        let tail = tau_a_tail_bound(&b, 200_000, 7).unwrap();
        assert!(tail.v1 <= tail.cap && tail.v1 > 0.0);
        for (&t, &s) in tail.grid.iter().zip(&tail.survival) {
            assert!(tail.envelope(t) >= s - 1e-12);
        }
        // Far tail lies under the capped exponential.
        let far = 50.0;
        assert!(tail.probability(far) <= tail.c1 * (-tail.cap * far).exp() + 1e-12);
    }

    #[test]
    fn abscissa_matches_geometric_exponential_sum() {
        // p1 = p2 = 1, lead = 0: a single Exp(r), abscissa r.
        assert!((mgf_abscissa(1.0, 1.0, 0.0, 2.0, 0.0) - 2.0).abs() < 1e-9);
        // Geom(p) sum of Exp(r) is Exp(p r).
        assert!((mgf_abscissa(0.25, 1.0, 0.0, 2.0, 0.0) - 0.5).abs() < 1e-9);
    }
}
