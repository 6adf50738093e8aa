//! Overlap deficit `eta(e) = 1/2 int |f(u) - f(u - e)| du` of the intake
//! density and envelopes `sup_{x <= e} eta(x) <= C e^v`.

use serde::{Deserialize, Serialize};

use crate::distributions::Family;
use crate::error::{hypothesis, invalid, Error, Result};
use crate::quadrature::{simpson_pieces, simpson_to_infinity, DEFAULT_TOL};

/// `eta(eps)`, computed as one minus the overlap `int min(f(u), f(u - eps))`.
pub fn eta(eps: f64, f: &Family) -> Result<f64> {
    if !f.has_density() {
        return Err(Error::NoDensity(format!("{} intake law", f.name())));
    }
    let eps = eps.abs();
    if eps == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = f.support();
    let start = lo + eps;
    if start >= hi {
        return Ok(1.0);
    }
    let overlap = |u: f64| {
        let a = f.density(u).unwrap_or(0.0);
        let b = f.density(u - eps).unwrap_or(0.0);
        a.min(b)
    };
    let mut breaks = f.kinks();
    breaks.extend(f.kinks().iter().map(|k| k + eps));
    let shared = if hi.is_finite() {
        simpson_pieces(&overlap, start, hi, &breaks, DEFAULT_TOL)
    } else {
        simpson_to_infinity(&overlap, start, &breaks, f.mean().max(eps), DEFAULT_TOL)
    };
    Ok((1.0 - shared).clamp(0.0, 1.0))
}

/// Tail data of the intake density: `int_{D}^inf f <= C' D^{1 - p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailData {
    pub c_prime: f64,
    pub p: f64,
}

/// Hölder data `|f(x) - f(y)| <= K |x - y|^h`, with either a support bound
/// `M` or tail data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderData {
    pub k: f64,
    pub h: f64,
    #[serde(default)]
    pub support_bound: Option<f64>,
    #[serde(default)]
    pub tail: Option<TailData>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeSource {
    /// `K (M + 1) / 2` with exponent `h`.
    CompactHolder,
    /// Hölder data with a polynomial tail.
    TailHolder,
    /// Least-squares fit in log-log coordinates, lifted to dominate.
    Fitted,
}

/// `sup_{x <= e} eta(x) <= c e^v` for `e <= eps_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaEnvelope {
    pub c: f64,
    pub v: f64,
    pub eps_max: f64,
    pub source: EnvelopeSource,
}

impl EtaEnvelope {
    pub fn bound(&self, eps: f64) -> f64 {
        self.c * eps.abs().powf(self.v)
    }
}

const ENVELOPE_GRID: usize = 1000;

/// Envelope for `eta` on `[0, eps_max]`.
///
/// Supplied Hölder data gives the closed-form constants, which are then
/// checked against the numerical `eta` on a 1000-point grid. Without data,
/// `v` is fitted by least squares and `c` is the smallest constant that
/// dominates on the grid.
pub fn eta_envelope(eps_max: f64, f: &Family, holder: Option<&HolderData>) -> Result<EtaEnvelope> {
    if !(eps_max > 0.0 && eps_max.is_finite()) {
        return Err(invalid(format!("eps_max must be > 0, got {eps_max}")));
    }
    let grid: Vec<f64> = (1..=ENVELOPE_GRID)
        .map(|i| eps_max * i as f64 / ENVELOPE_GRID as f64)
        .collect();
    let values = grid.iter().map(|&e| eta(e, f)).collect::<Result<Vec<_>>>()?;

    let env = match holder {
        Some(hd) => {
            if !(hd.k > 0.0 && hd.h > 0.0 && hd.h <= 1.0) {
                return Err(invalid("Hölder data needs K > 0 and h in (0, 1]"));
            }
            if let Some(m) = hd.support_bound {
                if !(m > 0.0) {
                    return Err(invalid("support bound M must be > 0"));
                }
                EtaEnvelope {
                    c: hd.k * (m + 1.0) / 2.0,
                    v: hd.h,
                    eps_max,
                    source: EnvelopeSource::CompactHolder,
                }
            } else if let Some(tail) = hd.tail {
                if !(tail.p > 2.0 && tail.c_prime > 0.0) {
                    return Err(hypothesis(
                        "H4b",
                        "tail exponent p must exceed 2 and C' be positive",
                    ));
                }
                let q = tail.p - 1.0;
                EtaEnvelope {
                    c: hd.k * ((tail.c_prime / q).powf(1.0 / q) + 1.0) / 2.0 + 1.0,
                    v: hd.h - hd.h / q,
                    eps_max,
                    source: EnvelopeSource::TailHolder,
                }
            } else {
                return Err(invalid("Hölder data needs a support bound or tail data"));
            }
        }
        None => fit_envelope(&grid, &values, eps_max),
    };

    if env.source != EnvelopeSource::Fitted {
        for (&e, &v) in grid.iter().zip(&values) {
            if env.bound(e) < v - 1e-9 {
                return Err(hypothesis(
                    "H4a",
                    format!(
                        "supplied Hölder data gives {} < eta({e}) = {v}",
                        env.bound(e)
                    ),
                ));
            }
        }
    }
    Ok(env)
}

fn fit_envelope(grid: &[f64], values: &[f64], eps_max: f64) -> EtaEnvelope {
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&e, &v)| (e.ln(), v.ln()))
        .collect();
    let v = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).clamp(1e-3, 1.0)
    } else {
        1.0
    };
    let c = grid
        .iter()
        .zip(values)
        .map(|(&e, &val)| val / e.powf(v))
        .fold(0.0, f64::max);
    EtaEnvelope {
        c,
        v,
        eps_max,
        source: EnvelopeSource::Fitted,
    }
}
