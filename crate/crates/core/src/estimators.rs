//! Monte Carlo estimates of distances and tails, with 95% intervals.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::coupling::CouplingReport;
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    CouplingTailTv,
    HistogramTv,
    SortedW1,
    SurvivalTail,
    CouplingW1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCurve {
    pub kind: EstimatorKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Number of failures behind each proportion (for tails), else 0.
    pub counts: Vec<usize>,
    pub n_replicas: usize,
}

impl EmpiricalCurve {
    pub fn half_widths(&self) -> Vec<f64> {
        self.ci_low
            .iter()
            .zip(&self.ci_high)
            .map(|(lo, hi)| 0.5 * (hi - lo))
            .collect()
    }
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Sample mean and the half-width of its normal-approximation interval.
pub fn mean_ci(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, Z95 * (var / n).sqrt()))
}

/// `P(T > t)` on `grid` from a sample of times (infinite times count as
/// beyond every grid point), with Wilson intervals.
pub fn tail_curve(times: &[f64], grid: &[f64], kind: EstimatorKind) -> Result<EmpiricalCurve> {
    if times.is_empty() {
        return Err(Error::EmptyInput("times"));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut curve = EmpiricalCurve {
        kind,
        grid: grid.to_vec(),
        values: Vec::with_capacity(grid.len()),
        ci_low: Vec::with_capacity(grid.len()),
        ci_high: Vec::with_capacity(grid.len()),
        counts: Vec::with_capacity(grid.len()),
        n_replicas: n,
    };
    for &t in grid {
        let k = n - sorted.partition_point(|&x| x <= t);
        let (lo, hi) = wilson(k, n);
        curve.values.push(k as f64 / n as f64);
        curve.ci_low.push(lo);
        curve.ci_high.push(hi);
        curve.counts.push(k);
    }
    Ok(curve)
}

/// Coupling-tail TV estimate `P(tau > t)`.
pub fn tv_via_coupling(reports: &[CouplingReport], grid: &[f64]) -> Result<EmpiricalCurve> {
    let taus: Vec<f64> = reports.iter().map(|r| r.tau).collect();
    tail_curve(&taus, grid, EstimatorKind::CouplingTailTv)
}

/// Mean of a non-negative quantity per grid point with normal intervals.
pub fn mean_curve(columns: &[Vec<f64>], grid: &[f64], kind: EstimatorKind) -> Result<EmpiricalCurve> {
    if columns.len() != grid.len() {
        return Err(Error::SizeMismatch(columns.len(), grid.len()));
    }
    let mut curve = EmpiricalCurve {
        kind,
        grid: grid.to_vec(),
        values: Vec::new(),
        ci_low: Vec::new(),
        ci_high: Vec::new(),
        counts: vec![0; grid.len()],
        n_replicas: columns.first().map_or(0, Vec::len),
    };
    for col in columns {
        let (m, h) = mean_ci(col)?;
        curve.values.push(m);
        curve.ci_low.push((m - h).max(0.0));
        curve.ci_high.push(m + h);
    }
    Ok(curve)
}

/// Exact empirical `W1` between two equal-size samples on the line: mean
/// absolute difference of order statistics.
pub fn w1_sorted(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    FreedmanDiaconis,
    Count(usize),
    Width(f64),
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let k = pos.floor() as usize;
    let w = pos - k as f64;
    if k + 1 < sorted.len() {
        (1.0 - w) * sorted[k] + w * sorted[k + 1]
    } else {
        sorted[k]
    }
}

/// Half the L1 distance between normalised histograms on a common grid.
/// Biased upwards by sampling noise; diagnostics only.
pub fn tv_histogram(a: &[f64], b: &[f64], binning: Binning) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let (lo, hi) = (pooled[0], pooled[pooled.len() - 1]);
    if hi == lo {
        return 0.0;
    }
    let width = match binning {
        Binning::Width(w) => w,
        Binning::Count(n) => (hi - lo) / n.max(1) as f64,
        Binning::FreedmanDiaconis => {
            let iqr = quantile_sorted(&pooled, 0.75) - quantile_sorted(&pooled, 0.25);
            let w = 2.0 * iqr / (pooled.len() as f64).cbrt();
            if w > 0.0 {
                w
            } else {
                (hi - lo) / (pooled.len() as f64).sqrt()
            }
        }
    };
    let bins = (((hi - lo) / width).ceil() as usize).max(1);
    let hist = |s: &[f64]| {
        let mut h = vec![0.0; bins];
        for &x in s {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            h[k] += 1.0 / s.len() as f64;
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    0.5 * ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Pointwise check of `P(A > t) <= P(B > t)` up to the joint 95% slack
/// `1.96 sqrt(sa(1-sa)/na + sb(1-sb)/nb)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub grid: Vec<f64>,
    pub survival_a: Vec<f64>,
    pub survival_b: Vec<f64>,
    pub slack: Vec<f64>,
    pub holds: Vec<bool>,
}

impl DominanceReport {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|&h| h)
    }
}

pub fn survival_compare(a: &[f64], b: &[f64], grid: &[f64]) -> Result<DominanceReport> {
    let ca = tail_curve(a, grid, EstimatorKind::SurvivalTail)?;
    let cb = tail_curve(b, grid, EstimatorKind::SurvivalTail)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let slack: Vec<f64> = ca
        .values
        .iter()
        .zip(&cb.values)
        .map(|(sa, sb)| Z95 * (sa * (1.0 - sa) / na + sb * (1.0 - sb) / nb).sqrt())
        .collect();
    let holds = ca
        .values
        .iter()
        .zip(&cb.values)
        .zip(&slack)
        .map(|((sa, sb), s)| *sa <= sb + s)
        .collect();
    Ok(DominanceReport {
        grid: grid.to_vec(),
        survival_a: ca.values,
        survival_b: cb.values,
        slack,
        holds,
    })
}

/// Kolmogorov-Smirnov distance between a sample and a continuous cdf.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("sample"));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max))
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    Ok(d)
}

/// Pearson chi-square statistic of `observed` counts against cell
/// probabilities, with its degrees of freedom and upper-tail p-value.
/// Cells with expected count below 5 are pooled into their neighbour.
pub fn chi_square(observed: &[usize], probs: &[f64]) -> Result<(f64, usize, f64)> {
    if observed.len() != probs.len() {
        return Err(Error::SizeMismatch(observed.len(), probs.len()));
    }
    let n: usize = observed.iter().sum();
    if n == 0 {
        return Err(Error::EmptyInput("observed"));
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&k, &p) in observed.iter().zip(probs) {
        o += k as f64;
        e += p * n as f64;
        if e >= 5.0 {
            cells.push((o, e));
            (o, e) = (0.0, 0.0);
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += o;
        last.1 += e;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1);
    let p_value = gamma_ur(dof as f64 / 2.0, (stat / 2.0).max(1e-300));
    Ok((stat, dof, p_value))
}

/// Weighted least-squares slope of `log P(tau > t)` over `[lo, hi]`, using
/// only grid points with at least `min_failures` failures and weights
/// `n p / (1 - p)` (inverse delta-method variance of `log p`).
pub fn log_tail_slope(curve: &EmpiricalCurve, lo: f64, hi: f64, min_failures: usize) -> Option<f64> {
    let n = curve.n_replicas as f64;
    let pts: Vec<(f64, f64, f64)> = curve
        .grid
        .iter()
        .zip(&curve.values)
        .zip(&curve.counts)
        .filter(|((&t, &p), &k)| t >= lo && t <= hi && k >= min_failures && p < 1.0)
        .map(|((&t, &p), _)| (t, p.ln(), n * p / (1.0 - p)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::EventCounts;
    use crate::rng::stream;
    use rand::Rng;

    fn report(tau: f64) -> CouplingReport {
        CouplingReport {
            tau_a: 0.0,
            tau,
            phases: None,
            counts: EventCounts::default(),
            bound_variable: None,
        }
    }

    #[test]
    fn coupling_tail_counts() {
        let reps: Vec<_> = [0.5, 1.5, f64::INFINITY, 3.0].iter().map(|&t| report(t)).collect();
        let c = tv_via_coupling(&reps, &[0.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!(c.values, vec![1.0, 0.75, 0.5, 0.25]);
        let merged: Vec<_> = (0..10).map(|_| report(0.0)).collect();
        assert!(tv_via_coupling(&merged, &[0.0, 1.0]).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(matches!(tv_via_coupling(&[], &[1.0]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn w1_examples() {
        assert_eq!(w1_sorted(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(w1_sorted(&[3.0, 1.0], &[1.0, 3.0]).unwrap(), 0.0);
        let s = [0.3, -1.0, 2.5];
        let shifted: Vec<f64> = s.iter().map(|x| x + 0.7).collect();
        assert!((w1_sorted(&s, &shifted).unwrap() - 0.7).abs() < 1e-12);
        assert!(matches!(w1_sorted(&[1.0], &[1.0, 2.0]), Err(Error::SizeMismatch(1, 2))));
    }

    #[test]
    fn histogram_tv() {
        let mut rng = stream(1, 0);
        let a: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>() + 0.5).collect();
        assert_eq!(tv_histogram(&a, &a, Binning::FreedmanDiaconis), 0.0);
        let d = tv_histogram(&a, &b, Binning::Width(0.05));
        assert!((d - 0.5).abs() < 0.02, "{d}");
        assert_eq!(tv_histogram(&[0.0, 0.1], &[5.0, 5.1], Binning::Count(10)), 1.0);
    }

    #[test]
    fn dominance() {
        let mut rng = stream(2, 0);
        let e2: Vec<f64> = (0..100_000).map(|_| -rng.random::<f64>().ln() / 2.0).collect();
        let e1: Vec<f64> = (0..100_000).map(|_| -rng.random::<f64>().ln()).collect();
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        assert!(survival_compare(&e2, &e1, &grid).unwrap().all_hold());
        assert!(!survival_compare(&e1, &e2, &grid).unwrap().all_hold());
        let same = survival_compare(&e1, &e1, &grid).unwrap();
        assert!(same.all_hold());
    }

    #[test]
    fn wilson_coverage() {
        let mut rng = stream(3, 0);
        let n = 200;
        let covered = (0..1000)
            .filter(|_| {
                let k = (0..n).filter(|_| rng.random::<f64>() < 0.3).count();
                let (lo, hi) = wilson(k, n);
                lo <= 0.3 && 0.3 <= hi
            })
            .count();
        assert!(covered >= 930, "{covered}");
    }

    #[test]
    fn ks_uniform() {
        let mut rng = stream(4, 0);
        let s: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_distance(&s, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 1.63 / (1e5f64).sqrt());
        let t: Vec<f64> = (0..50_000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample(&s, &t).unwrap() < 0.02);
    }

    #[test]
    fn chi_square_fair_die() {
        let (stat, dof, p) = chi_square(&[100, 100, 100, 100, 100, 100], &[1.0 / 6.0; 6]).unwrap();
        assert_eq!((stat, dof), (0.0, 5));
        assert!((p - 1.0).abs() < 1e-9);
        let (_, _, p) = chi_square(&[200, 0, 100, 100, 100, 100], &[1.0 / 6.0; 6]).unwrap();
        assert!(p < 1e-10);
    }

    #[test]
    fn slope_of_exponential_tail() {
        let mut rng = stream(5, 0);
        let times: Vec<f64> = (0..100_000).map(|_| -rng.random::<f64>().ln() / 0.3).collect();
        let grid: Vec<f64> = (0..=20).map(f64::from).collect();
        let c = tail_curve(&times, &grid, EstimatorKind::SurvivalTail).unwrap();
        let s = log_tail_slope(&c, 5.0, 20.0, 10).unwrap();
        assert!((s + 0.3).abs() < 0.01, "{s}");
    }
}
