//! Parametric laws for the intake sizes (F), inter-intake times (G) and
//! metabolic rates (H), together with the hazard machinery of G.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Weibull};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur, ln_gamma};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{simpson, simpson_pieces, simpson_to_infinity, DEFAULT_TOL};

/// A one-dimensional parametric family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    Exponential { rate: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    Weibull { shape: f64, scale: f64 },
    Dirac { value: f64 },
    ShiftedExponential { shift: f64, rate: f64 },
}

/// What a law is used for in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// F, the law of the intake sizes U_n.
    Intake,
    /// G, the law of the inter-intake times.
    InterArrival,
    /// H, the law of the metabolic rates.
    Metabolic,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Exponential { rate } => positive("rate", rate),
            Family::Gamma { shape, scale } | Family::Weibull { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
            Family::Uniform { lo, hi } => {
                if lo.is_finite() && hi.is_finite() && lo < hi {
                    Ok(())
                } else {
                    Err(invalid(format!("uniform needs lo < hi, got [{lo}, {hi}]")))
                }
            }
            Family::Dirac { value } => {
                if value >= 0.0 && value.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("dirac value must be >= 0, got {value}")))
                }
            }
            Family::ShiftedExponential { shift, rate } => {
                if !(shift >= 0.0 && shift.is_finite()) {
                    return Err(invalid(format!("shift must be >= 0, got {shift}")));
                }
                positive("rate", rate)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Exponential { .. } => "exponential",
            Family::Gamma { .. } => "gamma",
            Family::Uniform { .. } => "uniform",
            Family::Weibull { .. } => "weibull",
            Family::Dirac { .. } => "dirac",
            Family::ShiftedExponential { .. } => "shifted_exponential",
        }
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, Family::Dirac { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Family::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
            Family::Gamma { shape, scale } => {
                Gamma::new(shape, scale).expect("validated").sample(rng)
            }
            Family::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Family::Weibull { shape, scale } => {
                Weibull::new(scale, shape).expect("validated").sample(rng)
            }
            Family::Dirac { value } => value,
            Family::ShiftedExponential { shift, rate } => {
                shift + Exp::new(rate).expect("validated").sample(rng)
            }
        }
    }

    /// Support as a closed interval (possibly unbounded above).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Family::Uniform { lo, hi } => (lo, hi),
            Family::Dirac { value } => (value, value),
            Family::ShiftedExponential { shift, .. } => (shift, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Points where the density is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            Family::Uniform { lo, hi } => vec![lo, hi],
            Family::ShiftedExponential { shift, .. } => vec![shift],
            Family::Dirac { value } => vec![value],
            _ => vec![0.0],
        }
    }

    /// Density with respect to Lebesgue measure.
    pub fn density(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            Family::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Family::Gamma { shape, scale } => {
                if x < 0.0 || (x == 0.0 && shape > 1.0) {
                    0.0
                } else if x == 0.0 {
                    if shape == 1.0 {
                        1.0 / scale
                    } else {
                        f64::INFINITY
                    }
                } else {
                    ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln())
                        .exp()
                }
            }
            Family::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Family::Weibull { shape, scale } => {
                if x < 0.0 {
                    0.0
                } else if x == 0.0 {
                    match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0 / scale,
                        _ => 0.0,
                    }
                } else {
                    let z = x / scale;
                    shape / scale * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
                }
            }
            Family::Dirac { .. } => return Err(Error::NoDensity("dirac".into())),
            Family::ShiftedExponential { shift, rate } => {
                if x < shift {
                    0.0
                } else {
                    rate * (-rate * (x - shift)).exp()
                }
            }
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Family::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Family::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else if !x.is_finite() {
                    1.0
                } else {
                    gamma_lr(shape, x / scale)
                }
            }
            Family::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Family::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
            Family::Dirac { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
            Family::ShiftedExponential { shift, rate } => {
                if x <= shift {
                    0.0
                } else {
                    -(-rate * (x - shift)).exp_m1()
                }
            }
        }
    }

    /// `P(X > x)`, computed directly rather than as `1 - cdf` where possible.
    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            Family::Exponential { rate } => (-rate * x.max(0.0)).exp(),
            Family::Gamma { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else if !x.is_finite() {
                    0.0
                } else {
                    gamma_ur(shape, x / scale)
                }
            }
            Family::Weibull { shape, scale } => (-(x.max(0.0) / scale).powf(shape)).exp(),
            Family::ShiftedExponential { shift, rate } => (-rate * (x - shift).max(0.0)).exp(),
            _ => 1.0 - self.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match *self {
            Family::Exponential { rate } => -(-p).ln_1p() / rate,
            Family::Uniform { lo, hi } => lo + p * (hi - lo),
            Family::Weibull { shape, scale } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            Family::Dirac { value } => value,
            Family::ShiftedExponential { shift, rate } => shift - (-p).ln_1p() / rate,
            Family::Gamma { shape, scale } => {
                if p == 0.0 {
                    return 0.0;
                }
                if p == 1.0 {
                    return f64::INFINITY;
                }
                let mut hi = shape * scale;
                while self.cdf(hi) < p {
                    hi *= 2.0;
                }
                bisect(|x| self.cdf(x) - p, 0.0, hi, 1e-13)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Family::Exponential { rate } => 1.0 / rate,
            Family::Gamma { shape, scale } => shape * scale,
            Family::Uniform { lo, hi } => 0.5 * (lo + hi),
            Family::Weibull { shape, scale } => scale * gamma(1.0 + 1.0 / shape),
            Family::Dirac { value } => value,
            Family::ShiftedExponential { shift, rate } => shift + 1.0 / rate,
        }
    }

    /// `psi(u) = E[exp(u X)]`, with `f64::INFINITY` outside the domain of
    /// finiteness.
    pub fn laplace(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 1.0;
        }
        match *self {
            Family::Exponential { rate } => {
                if u < rate {
                    rate / (rate - u)
                } else {
                    f64::INFINITY
                }
            }
            Family::Gamma { shape, scale } => {
                if u * scale < 1.0 {
                    (1.0 - u * scale).powf(-shape)
                } else {
                    f64::INFINITY
                }
            }
            Family::Uniform { lo, hi } => {
                let w = hi - lo;
                (u * lo).exp() * (u * w).exp_m1() / (u * w)
            }
            Family::Weibull { shape, scale } => {
                if u > 0.0 && shape < 1.0 {
                    return f64::INFINITY;
                }
                if shape == 1.0 {
                    return Family::Exponential { rate: 1.0 / scale }.laplace(u);
                }
                // y = (x/scale)^shape turns the law into Exp(1).
                let integrand = |y: f64| (u * scale * y.powf(1.0 / shape) - y).exp();
                simpson_to_infinity(&integrand, 0.0, &[], 1.0, DEFAULT_TOL)
            }
            Family::Dirac { value } => (u * value).exp(),
            Family::ShiftedExponential { shift, rate } => {
                if u < rate {
                    (u * shift).exp() * rate / (rate - u)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `sup { u : psi(u) < inf }`.
    pub fn laplace_abscissa(&self) -> f64 {
        match *self {
            Family::Exponential { rate } | Family::ShiftedExponential { rate, .. } => rate,
            Family::Gamma { scale, .. } => 1.0 / scale,
            Family::Weibull { shape, scale } => {
                if shape > 1.0 {
                    f64::INFINITY
                } else if shape == 1.0 {
                    1.0 / scale
                } else {
                    0.0
                }
            }
            Family::Uniform { .. } | Family::Dirac { .. } => f64::INFINITY,
        }
    }

    /// `E[phi(X)]` for a bounded measurable `phi`, by quadrature against the
    /// density (or exactly for a point mass).
    pub fn expect<P: Fn(f64) -> f64>(&self, phi: P) -> f64 {
        match *self {
            Family::Dirac { value } => phi(value),
            Family::Uniform { lo, hi } => simpson(&|x| phi(x), lo, hi, DEFAULT_TOL) / (hi - lo),
            Family::Gamma { shape, .. } | Family::Weibull { shape, .. } if shape < 1.0 => {
                // Density is unbounded at 0: integrate against the quantile.
                simpson(&|p| phi(self.quantile(p)), 0.0, 1.0 - 1e-12, DEFAULT_TOL)
            }
            _ => {
                let (lo, _) = self.support();
                let f = |x: f64| {
                    let d = self.density(x).unwrap_or(0.0);
                    if d == 0.0 {
                        0.0
                    } else {
                        phi(x) * d
                    }
                };
                simpson_to_infinity(&f, lo, &self.kinks(), self.mean().max(1e-3), DEFAULT_TOL)
            }
        }
    }
}

pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A law together with the role it plays in the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub family: Family,
    pub role: Role,
}

impl DistributionSpec {
    pub fn new(family: Family, role: Role) -> Result<Self> {
        family.validate()?;
        let (lo, _) = family.support();
        match role {
            Role::InterArrival => {
                if !family.has_density() {
                    return Err(Error::NoDensity(
                        "dirac inter-intake law (G needs a hazard rate)".into(),
                    ));
                }
                HazardProfile::new(&family)?;
            }
            Role::Metabolic => {
                if lo < 0.0 || matches!(family, Family::Dirac { value } if value <= 0.0) {
                    return Err(invalid("metabolic law must live on (0, inf)"));
                }
            }
            Role::Intake => {
                if lo < 0.0 {
                    return Err(invalid("intake law must live on [0, inf)"));
                }
            }
        }
        Ok(Self { family, role })
    }

    pub fn intake(family: Family) -> Result<Self> {
        Self::new(family, Role::Intake)
    }

    pub fn inter_arrival(family: Family) -> Result<Self> {
        Self::new(family, Role::InterArrival)
    }

    pub fn metabolic(family: Family) -> Result<Self> {
        Self::new(family, Role::Metabolic)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.family.sample(rng)
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        self.family.density(x)
    }

    pub fn laplace(&self, u: f64) -> f64 {
        self.family.laplace(u)
    }

    pub fn mean(&self) -> f64 {
        self.family.mean()
    }

    pub fn hazard_profile(&self) -> Result<HazardProfile> {
        HazardProfile::new(&self.family)
    }
}

/// The hazard rate of an inter-intake law, with its positivity point `a`,
/// its blow-up point `d` and its extreme values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardProfile {
    family: Family,
    /// `inf { t : zeta(t) > 0 }`.
    pub a: f64,
    /// `sup { t : zeta(t) < inf }`.
    pub d: f64,
    pub inf_zeta: f64,
    pub sup_zeta: f64,
}

impl HazardProfile {
    /// Builds the profile, rejecting laws whose hazard is not non-decreasing
    /// with a positive limit (H3).
    pub fn new(family: &Family) -> Result<Self> {
        family.validate()?;
        let inf = f64::INFINITY;
        let (a, d, inf_zeta, sup_zeta) = match *family {
            Family::Exponential { rate } => (0.0, inf, rate, rate),
            Family::Gamma { shape, scale } => {
                if shape < 1.0 {
                    return Err(crate::error::hypothesis(
                        "H3",
                        format!("gamma hazard with shape {shape} < 1 is decreasing"),
                    ));
                }
                if shape == 1.0 {
                    (0.0, inf, 1.0 / scale, 1.0 / scale)
                } else {
                    (0.0, inf, 0.0, 1.0 / scale)
                }
            }
            Family::Weibull { shape, scale } => {
                if shape < 1.0 {
                    return Err(crate::error::hypothesis(
                        "H3",
                        format!("weibull hazard with shape {shape} < 1 is decreasing"),
                    ));
                }
                if shape == 1.0 {
                    (0.0, inf, 1.0 / scale, 1.0 / scale)
                } else {
                    (0.0, inf, 0.0, inf)
                }
            }
            Family::Uniform { lo, hi } => {
                let floor = if lo > 0.0 { 0.0 } else { 1.0 / (hi - lo) };
                (lo, hi, floor, inf)
            }
            Family::ShiftedExponential { shift, rate } => {
                let floor = if shift > 0.0 { 0.0 } else { rate };
                (shift, inf, floor, rate)
            }
            Family::Dirac { .. } => {
                return Err(Error::NoDensity("dirac has no hazard rate".into()));
            }
        };
        Ok(Self {
            family: *family,
            a,
            d,
            inf_zeta,
            sup_zeta,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_constant(&self) -> bool {
        self.inf_zeta == self.sup_zeta
    }

    /// `zeta(t)`, infinite from `d` on.
    pub fn zeta(&self, t: f64) -> f64 {
        if t >= self.d {
            return f64::INFINITY;
        }
        let t = t.max(0.0);
        match self.family {
            Family::Exponential { rate } => rate,
            Family::Weibull { shape, scale } => {
                if shape == 1.0 {
                    1.0 / scale
                } else {
                    shape / scale * (t / scale).powf(shape - 1.0)
                }
            }
            Family::Gamma { shape, scale } => {
                if shape == 1.0 {
                    return 1.0 / scale;
                }
                if t <= 0.0 {
                    return 0.0;
                }
                if !t.is_finite() {
                    return 1.0 / scale;
                }
                let s = gamma_ur(shape, t / scale);
                if s > 1e-280 {
                    self.family.density(t).unwrap_or(0.0) / s
                } else {
                    // S(x) ~ f(x) scale (1 + (shape-1) scale / x)
                    1.0 / (scale * (1.0 + (shape - 1.0) * scale / t))
                }
            }
            Family::Uniform { lo, hi } => {
                if t < lo {
                    0.0
                } else {
                    1.0 / (hi - t)
                }
            }
            Family::ShiftedExponential { shift, rate } => {
                if t < shift {
                    0.0
                } else {
                    rate
                }
            }
            Family::Dirac { .. } => unreachable!("rejected at construction"),
        }
    }

    /// `zeta(t)`, rejecting `t >= d`.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t >= self.d {
            return Err(Error::Domain {
                what: "hazard",
                value: t,
            });
        }
        Ok(self.zeta(t))
    }

    /// `int_0^t zeta(s) ds`, i.e. `-log P(dT > t)`.
    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.d {
            return f64::INFINITY;
        }
        match self.family {
            Family::Exponential { rate } => rate * t,
            Family::Weibull { shape, scale } => (t / scale).powf(shape),
            Family::Uniform { lo, hi } => {
                if t <= lo {
                    0.0
                } else {
                    -((hi - t) / (hi - lo)).ln()
                }
            }
            Family::ShiftedExponential { shift, rate } => rate * (t - shift).max(0.0),
            Family::Gamma { .. } => -self.family.survival(t).ln(),
            Family::Dirac { .. } => unreachable!("rejected at construction"),
        }
    }

    /// Residual waiting time from age `a0`: the `s` solving
    /// `int_0^s zeta(a0 + u) du = target`.
    ///
    /// With `target ~ Exp(1)` this is an exact draw of the time to the next
    /// event of a process currently aged `a0`.
    pub fn integrated_hazard_inverse(&self, a0: f64, target: f64) -> Result<f64> {
        if !(a0 >= 0.0) || a0 >= self.d {
            return Err(Error::Domain {
                what: "integrated hazard inverse (age)",
                value: a0,
            });
        }
        if !(target > 0.0) || !target.is_finite() {
            return Err(Error::Domain {
                what: "integrated hazard inverse (target)",
                value: target,
            });
        }
        let s = match self.family {
            Family::Exponential { rate } => target / rate,
            Family::Weibull { shape, scale } => {
                let z0 = (a0 / scale).powf(shape);
                scale * (z0 + target).powf(1.0 / shape) - a0
            }
            Family::Uniform { lo, hi } => {
                let level = self.cumulative(a0) + target;
                let t = hi - (hi - lo) * (-level).exp();
                t - a0
            }
            Family::ShiftedExponential { shift, rate } => {
                let level = self.cumulative(a0) + target;
                shift + level / rate - a0
            }
            Family::Gamma { .. } => {
                let base = self.cumulative(a0);
                let level = base + target;
                let mut hi = 1.0_f64.max(a0);
                while self.cumulative(a0 + hi) < level {
                    hi *= 2.0;
                    if hi > 1e15 {
                        return Err(Error::Domain {
                            what: "integrated hazard inverse (no root)",
                            value: target,
                        });
                    }
                }
                bisect(|s| self.cumulative(a0 + s) - level, 0.0, hi, 1e-10)
            }
            Family::Dirac { .. } => unreachable!("rejected at construction"),
        };
        Ok(s.max(0.0))
    }
}

/// Integral of a density over its support, for sanity checks.
pub fn total_mass(family: &Family) -> Result<f64> {
    if !family.has_density() {
        return Err(Error::NoDensity(family.name().into()));
    }
    let (lo, hi) = family.support();
    let f = |x: f64| family.density(x).unwrap_or(0.0);
    Ok(if hi.is_finite() {
        simpson_pieces(&f, lo, hi, &family.kinks(), DEFAULT_TOL)
    } else {
        simpson_to_infinity(&f, lo, &family.kinks(), family.mean(), DEFAULT_TOL)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g_families() -> Vec<Family> {
        vec![
            Family::Exponential { rate: 1.5 },
            Family::Gamma { shape: 2.5, scale: 0.7 },
            Family::Uniform { lo: 0.5, hi: 2.0 },
            Family::Weibull { shape: 2.0, scale: 1.0 },
            Family::ShiftedExponential { shift: 0.4, rate: 2.0 },
        ]
    }

    #[test]
    fn dirac_sample_is_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(Family::Dirac { value: 2.0 }.sample(&mut rng), 2.0);
    }

    #[test]
    fn exponential_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let f = Family::Exponential { rate: 1.0 };
        let mean = (0..n).map(|_| f.sample(&mut rng)).sum::<f64>() / n as f64;
        // 4 sigma / sqrt(N)
        assert!((mean - 1.0).abs() < 4e-3, "{mean}");
    }

    #[test]
    fn uniform_samples_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Family::Uniform { lo: 0.0, hi: 1.0 };
        assert!((0..10_000).all(|_| (0.0..=1.0).contains(&f.sample(&mut rng))));
    }

    #[test]
    fn density_values() {
        assert_eq!(Family::Uniform { lo: 0.0, hi: 1.0 }.density(0.5).unwrap(), 1.0);
        assert_eq!(Family::Exponential { rate: 2.0 }.density(0.0).unwrap(), 2.0);
        let g = Family::Gamma { shape: 2.0, scale: 1.0 }.density(1.0).unwrap();
        assert_abs_diff_eq!(g, (-1.0f64).exp(), epsilon = 1e-12);
        assert!(matches!(
            Family::Dirac { value: 1.0 }.density(1.0),
            Err(Error::NoDensity(_))
        ));
    }

    #[test]
    fn densities_integrate_to_one() {
        for f in g_families() {
            assert_abs_diff_eq!(total_mass(&f).unwrap(), 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn hazard_closed_forms() {
        let e = HazardProfile::new(&Family::Exponential { rate: 3.0 }).unwrap();
        for t in [0.0, 0.5, 7.0] {
            assert_eq!(e.hazard(t).unwrap(), 3.0);
        }
        let w = HazardProfile::new(&Family::Weibull { shape: 2.0, scale: 1.0 }).unwrap();
        for t in [0.0, 0.3, 2.0] {
            assert_abs_diff_eq!(w.hazard(t).unwrap(), 2.0 * t, epsilon = 1e-12);
        }
        let s = HazardProfile::new(&Family::ShiftedExponential { shift: 1.0, rate: 2.0 }).unwrap();
        assert_eq!(s.hazard(0.5).unwrap(), 0.0);
        assert_eq!(s.hazard(1.0).unwrap(), 2.0);
        assert_eq!(s.hazard(3.0).unwrap(), 2.0);
        assert_eq!((s.a, s.d, s.inf_zeta, s.sup_zeta), (1.0, f64::INFINITY, 0.0, 2.0));
    }

    #[test]
    fn hazard_domain_error() {
        let u = HazardProfile::new(&Family::Uniform { lo: 1.0, hi: 2.0 }).unwrap();
        assert!(u.hazard(1.5).is_ok());
        assert!(matches!(u.hazard(2.0), Err(Error::Domain { .. })));
        assert_eq!(u.sup_zeta, f64::INFINITY);
    }

    #[test]
    fn hazard_matches_density_over_survival() {
        for f in g_families() {
            let p = HazardProfile::new(&f).unwrap();
            for i in 0..20 {
                let t = 0.05 + i as f64 * 0.09;
                if t >= p.d {
                    continue;
                }
                let direct = f.density(t).unwrap() / f.survival(t);
                assert_abs_diff_eq!(p.zeta(t), direct, epsilon = 1e-9 * direct.max(1.0));
            }
        }
    }

    #[test]
    fn hazard_is_non_decreasing() {
        for f in g_families() {
            let p = HazardProfile::new(&f).unwrap();
            let mut prev = 0.0;
            for i in 0..400 {
                let t = i as f64 * 0.01;
                let z = p.zeta(t);
                assert!(z >= prev - 1e-12, "{f:?} at {t}");
                prev = z;
            }
        }
    }

    #[test]
    fn decreasing_hazard_rejected() {
        assert!(DistributionSpec::inter_arrival(Family::Gamma { shape: 0.5, scale: 1.0 }).is_err());
        assert!(DistributionSpec::inter_arrival(Family::Dirac { value: 1.0 }).is_err());
        assert!(DistributionSpec::metabolic(Family::Dirac { value: 0.0 }).is_err());
        assert!(DistributionSpec::metabolic(Family::Uniform { lo: -1.0, hi: 1.0 }).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Family::Uniform { lo: 1.0, hi: 1.0 }.validate().is_err());
        assert!(Family::Exponential { rate: 0.0 }.validate().is_err());
        assert!(Family::Dirac { value: -1.0 }.validate().is_err());
        assert!(Family::Gamma { shape: 1.0, scale: f64::NAN }.validate().is_err());
    }

    #[test]
    fn integrated_hazard_inverse_examples() {
        let c = HazardProfile::new(&Family::Exponential { rate: 4.0 }).unwrap();
        assert_abs_diff_eq!(c.integrated_hazard_inverse(2.0, 3.0).unwrap(), 0.75);
        let w = HazardProfile::new(&Family::Weibull { shape: 2.0, scale: 1.0 }).unwrap();
        assert_abs_diff_eq!(w.integrated_hazard_inverse(0.0, 2.0).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(w.integrated_hazard_inverse(1.0, 3.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn integrated_hazard_inverse_roundtrip() {
        for f in g_families() {
            let p = HazardProfile::new(&f).unwrap();
            for a0 in [0.0, 0.3, 0.9] {
                if a0 >= p.d {
                    continue;
                }
                for target in [0.01, 0.5, 2.0, 6.0] {
                    let s = p.integrated_hazard_inverse(a0, target).unwrap();
                    let got = p.cumulative(a0 + s) - p.cumulative(a0);
                    assert_abs_diff_eq!(got, target, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn hazard_reproduces_cdf() {
        for f in g_families() {
            let p = HazardProfile::new(&f).unwrap();
            for i in 1..=50 {
                let t = i as f64 * 0.06;
                if t >= p.d {
                    continue;
                }
                // integrate zeta numerically, independent of the closed forms
                let kinks = f.kinks();
                let integral = simpson_pieces(&|s| p.zeta(s), 0.0, t, &kinks, 1e-12);
                let from_hazard = 1.0 - (-integral).exp();
                assert_abs_diff_eq!(from_hazard, f.cdf(t), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn laplace_examples() {
        let e = Family::Exponential { rate: 1.0 };
        assert_abs_diff_eq!(e.laplace(0.5), 2.0);
        assert!(e.laplace(1.5).is_infinite());
        for f in g_families() {
            assert_eq!(f.laplace(0.0), 1.0);
        }
    }

    #[test]
    fn laplace_matches_quadrature() {
        let fams = [
            Family::Gamma { shape: 2.5, scale: 0.7 },
            Family::Uniform { lo: 0.5, hi: 2.0 },
            Family::ShiftedExponential { shift: 0.4, rate: 2.0 },
            Family::Weibull { shape: 2.0, scale: 1.0 },
            Family::Weibull { shape: 1.5, scale: 0.8 },
        ];
        for f in fams {
            for u in [-2.0, -0.3, 0.4, 1.0] {
                let direct = f.expect(|x| (u * x).exp());
                assert_abs_diff_eq!(f.laplace(u), direct, epsilon = 1e-7 * direct.max(1.0));
            }
        }
    }

    #[test]
    fn laplace_log_convex_non_decreasing() {
        for f in g_families() {
            let grid: Vec<f64> = (0..60).map(|i| -3.0 + i as f64 * 0.05).collect();
            let vals: Vec<f64> = grid.iter().map(|&u| f.laplace(u)).collect();
            for w in vals.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
            for w in vals.windows(3) {
                if w.iter().all(|v| v.is_finite()) {
                    let (a, b, c) = (w[0].ln(), w[1].ln(), w[2].ln());
                    assert!(a + c - 2.0 * b >= -1e-9, "{f:?}");
                }
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for f in g_families() {
            for p in [0.01, 0.3, 0.5, 0.9, 0.999] {
                assert_abs_diff_eq!(f.cdf(f.quantile(p)), p, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn serde_tagged_record() {
        let spec = DistributionSpec::intake(Family::Uniform { lo: 0.0, hi: 1.0 }).unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"family":"uniform","params":{"lo":0.0,"hi":1.0},"role":"intake"}"#);
        let back: DistributionSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }
}
