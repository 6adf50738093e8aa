//! The defective renewal equation `Z = z + J * Z` governing
//! `Z(t) = E[exp(-p int_0^t Theta_s ds)]` for a process started at age 0.

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Family};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{simpson_to_infinity, DEFAULT_TOL};

/// Kernel `j(x) = E[exp(-p Theta x)] g(x)` and forcing
/// `z(t) = E[exp(-p Theta t)] P(dT > t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalKernel {
    inter_arrival: Family,
    metabolic: Family,
    p: f64,
}

impl RenewalKernel {
    pub fn new(g: &DistributionSpec, h: &DistributionSpec, p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("order p must be >= 1, got {p}")));
        }
        let k = Self {
            inter_arrival: g.family,
            metabolic: h.family,
            p,
        };
        let mass = k.laplace(0.0);
        if !(mass < 1.0) {
            return Err(Error::NotDefective {
                shift: 0.0,
                value: mass,
            });
        }
        Ok(k)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `E[exp(-p Theta x)]`.
    pub fn theta_transform(&self, x: f64) -> f64 {
        self.metabolic.laplace(-self.p * x)
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let g = self.inter_arrival.density(x).unwrap_or(0.0);
        if g == 0.0 {
            0.0
        } else {
            g * self.theta_transform(x)
        }
    }

    pub fn forcing(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.inter_arrival.survival(t) * self.theta_transform(t)
    }

    /// `J(R) = E[exp(-p Theta dT)]`.
    pub fn mass(&self) -> f64 {
        self.laplace(0.0)
    }

    /// `psi_J(u) = int exp(u x) j(x) dx`, infinite past the abscissa.
    pub fn laplace(&self, u: f64) -> f64 {
        match (self.inter_arrival, self.metabolic) {
            (Family::Exponential { rate }, Family::Dirac { value }) => {
                let s = rate + self.p * value;
                if u < s {
                    rate / (s - u)
                } else {
                    f64::INFINITY
                }
            }
            (g, _) => {
                let (lo, hi) = g.support();
                let f = |x: f64| {
                    let j = self.density(x);
                    if j == 0.0 {
                        0.0
                    } else {
                        (u * x).exp() * j
                    }
                };
                if hi.is_finite() {
                    crate::quadrature::simpson_pieces(&f, lo, hi, &g.kinks(), DEFAULT_TOL)
                } else {
                    simpson_to_infinity(&f, lo, &g.kinks(), g.mean(), DEFAULT_TOL)
                }
            }
        }
    }
}

/// Root of `psi_J = 1`, or the probe cap when `psi_J < 1` everywhere below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LaplaceRoot {
    Finite(f64),
    Unbounded(f64),
}

impl LaplaceRoot {
    /// The root, or the cap for an unbounded root.
    pub fn value(self) -> f64 {
        match self {
            LaplaceRoot::Finite(w) | LaplaceRoot::Unbounded(w) => w,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, LaplaceRoot::Finite(_))
    }
}

/// `w = sup { u : psi_J(u) < 1 }` by bracketing and bisection, to `1e-11`.
pub fn find_w(kernel: &RenewalKernel, cap: f64) -> Result<LaplaceRoot> {
    if !(cap > 0.0) {
        return Err(invalid(format!("probe cap must be > 0, got {cap}")));
    }
    let below = |u: f64| kernel.laplace(u) < 1.0;
    let mut lo = 0.0;
    let mut hi = 1.0_f64.min(cap);
    while below(hi) {
        if hi >= cap {
            return Ok(LaplaceRoot::Unbounded(cap));
        }
        lo = hi;
        hi = (2.0 * hi).min(cap);
    }
    while hi - lo > 1e-11 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LaplaceRoot::Finite(0.5 * (lo + hi)))
}

/// Grid solution of the tilted equation `Z' = z' + J' * Z'` with
/// `Z'(t) = exp(shift t) Z(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSolution {
    pub step: f64,
    pub shift: f64,
    /// `Z'` on `t_k = k step`.
    pub tilted: Vec<f64>,
    forcing: Vec<f64>,
    kernel: Vec<f64>,
}

impl RenewalSolution {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.tilted.len()).map(move |k| k as f64 * self.step)
    }

    /// `Z(t_k) = exp(-shift t_k) Z'(t_k)`.
    pub fn values(&self) -> Vec<f64> {
        self.times()
            .zip(&self.tilted)
            .map(|(t, z)| (-self.shift * t).exp() * z)
            .collect()
    }

    /// Linear interpolation of `Z`; `None` past the grid.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if t < 0.0 {
            return None;
        }
        let pos = t / self.step;
        let k = pos.floor() as usize;
        if k + 1 >= self.tilted.len() {
            return (k + 1 == self.tilted.len() && pos == k as f64)
                .then(|| (-self.shift * t).exp() * self.tilted[k]);
        }
        let w = pos - k as f64;
        let z = (1.0 - w) * self.tilted[k] + w * self.tilted[k + 1];
        Some((-self.shift * t).exp() * z)
    }

    /// `sup_t Z'(t)` over the grid.
    pub fn c_renewal(&self) -> f64 {
        self.tilted.iter().copied().fold(0.0, f64::max)
    }

    /// `max_k |Z'_k - z'_k - (J' * Z')_k|` with the trapezoid convolution.
    pub fn residual(&self) -> f64 {
        let h = self.step;
        let mut worst: f64 = 0.0;
        for n in 0..self.tilted.len() {
            let conv = trapezoid_conv(&self.kernel, &self.tilted, n, h);
            let r = self.tilted[n] - self.forcing[n] - conv;
            worst = worst.max(r.abs());
        }
        worst
    }
}

fn trapezoid_conv(j: &[f64], z: &[f64], n: usize, h: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut s = 0.5 * (j[0] * z[n] + j[n] * z[0]);
    for k in 1..n {
        s += j[k] * z[n - k];
    }
    h * s
}

/// Solves the renewal equation tilted by `exp(shift t)` on `[0, horizon]`.
///
/// `dri` allows a shift with `psi_J(shift) >= 1`, which is legitimate only
/// when the tilted forcing is directly Riemann integrable.
pub fn solve_renewal(
    kernel: &RenewalKernel,
    shift: f64,
    step: f64,
    horizon: f64,
    dri: bool,
) -> Result<RenewalSolution> {
    solve_with(|x| kernel.density(x), |t| kernel.forcing(t), kernel.laplace(shift), shift, step, horizon, dri)
}

/// Same solver with explicit kernel and forcing functions; `psi_at_shift`
/// is the tilted kernel mass used for the defectiveness check.
pub fn solve_with<J: Fn(f64) -> f64, Z: Fn(f64) -> f64>(
    j: J,
    z: Z,
    psi_at_shift: f64,
    shift: f64,
    step: f64,
    horizon: f64,
    dri: bool,
) -> Result<RenewalSolution> {
    if !(step > 0.0 && horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!(
            "renewal grid needs step > 0 and finite horizon > 0 (got {step}, {horizon})"
        )));
    }
    if !(shift >= 0.0) {
        return Err(invalid(format!("tilt must be >= 0, got {shift}")));
    }
    if !(psi_at_shift < 1.0) && !dri {
        return Err(Error::NotDefective {
            shift,
            value: psi_at_shift,
        });
    }
    let n = (horizon / step).ceil() as usize + 1;
    let tilt = |k: usize| (shift * k as f64 * step).exp();
    let kernel: Vec<f64> = (0..n).map(|k| tilt(k) * j(k as f64 * step)).collect();
    let forcing: Vec<f64> = (0..n).map(|k| tilt(k) * z(k as f64 * step)).collect();
    let mut tilted = vec![0.0; n];
    tilted[0] = forcing[0];
    let diag = 1.0 - 0.5 * step * kernel[0];
    for m in 1..n {
        let mut s = 0.5 * kernel[m] * tilted[0];
        for k in 1..m {
            s += kernel[k] * tilted[m - k];
        }
        tilted[m] = (forcing[m] + step * s) / diag;
    }
    Ok(RenewalSolution {
        step,
        shift,
        tilted,
        forcing,
        kernel,
    })
}

/// `1 - E[exp(-Theta dT)]`.
pub fn rho(g: &DistributionSpec, h: &DistributionSpec) -> f64 {
    1.0 - h.family.expect(|theta| g.family.laplace(-theta))
}

/// Decay exponent for exponential inter-intake times:
/// `lambda (1 - E[exp(-p Theta dT)])` with `dT ~ Exp(lambda)`.
pub fn exponential_case_decay(lambda: f64, h: &DistributionSpec, p: f64) -> f64 {
    lambda * (1.0 - h.family.expect(|theta| lambda / (lambda + p * theta)))
}
