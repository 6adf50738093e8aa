//! Experiment drivers behind the command-line subcommands, and the CSV/JSON
//! artifacts they write.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::coupling::{run_three_phase, simulate_coupled_full, CouplingReport};
use crate::error::Result;
use crate::estimators::{mean_curve, survival_compare, tail_curve, EmpiricalCurve, EstimatorKind};
use crate::pdmp_sim::{sample_on_grid, simulate_path, Model};
use crate::rates::{compute_rates, AgeBound, AgeCase, AgeParams, BoundCurve, RateReport};
use crate::rng::{block_index, map_replicas, stream};

/// Stream blocks for runs that are not indexed by a grid point.
pub const W1_BLOCK: u32 = 1 << 30;
pub const SIMULATE_BLOCK: u32 = W1_BLOCK + 1;
pub const PATHS_BLOCK: u32 = W1_BLOCK + 2;

pub const RATE_REPORT_FILE: &str = "rate_report.json";
pub const CURVES_TV_FILE: &str = "curves_tv.csv";
pub const CURVES_W1_FILE: &str = "curves_w1.csv";
pub const REPORTS_FILE: &str = "coupling_reports.csv";
pub const SIMULATE_FILE: &str = "marginals.csv";
pub const PATHS_FILE: &str = "paths.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const VERIFY_FILE: &str = "verify.json";

/// Runs `f` on a pool of `threads` workers (inline without the `parallel`
/// feature). Results never depend on `threads`.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| crate::error::invalid(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(f())
    }
}

pub fn run_rates(cfg: &RunConfig) -> Result<RateReport> {
    let model = cfg.build_model()?;
    with_threads(cfg.parallelism(), || compute_rates(&model, cfg.moments(), &cfg.rate_settings()))?
}

/// The age bound behind a rate report.
pub fn age_bound(report: &RateReport, model: &Model) -> Result<AgeBound> {
    let params = report.age.params.unwrap_or(AgeParams { eps: 0.0, b: 0.0, c: 0.0 });
    AgeBound::new(report.age.case, model.profile(), params)
}

/// One row of `coupling_reports.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub replica: usize,
    /// Horizon of the three-phase run.
    pub t: f64,
    pub report: CouplingReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupleOutcome {
    pub rates: RateReport,
    pub tv: EmpiricalCurve,
    pub w1: EmpiricalCurve,
    /// Replica reports of the last grid point, or of every grid point when
    /// `outputs.all_reports` is set.
    pub reports: Vec<ReportRow>,
}

/// Three-phase runs at every grid time (fresh replicas per time, since the
/// phase boundaries scale with the horizon) and one shared-intake run for the
/// Wasserstein distance.
pub fn run_couple(cfg: &RunConfig) -> Result<CoupleOutcome> {
    let model = cfg.build_model()?;
    with_threads(cfg.parallelism(), || couple_inner(cfg, &model))?
}

fn couple_inner(cfg: &RunConfig, model: &Model) -> Result<CoupleOutcome> {
    let rates = compute_rates(model, cfg.moments(), &cfg.rate_settings())?;
    let bound = age_bound(&rates, model)?;
    let grid = cfg.grid();
    let n = cfg.experiment.n_replicas;
    let seed = cfg.experiment.seed;
    let (init, init_tilde) = (&cfg.model.init, &cfg.model.init_tilde);

    let mut tv = EmpiricalCurve {
        kind: EstimatorKind::CouplingTailTv,
        grid: grid.clone(),
        values: Vec::new(),
        ci_low: Vec::new(),
        ci_high: Vec::new(),
        counts: Vec::new(),
        n_replicas: n,
    };
    let mut rows = Vec::new();
    for (k, &t) in grid.iter().enumerate() {
        let params = cfg.phase_params(&rates.split, t);
        let block: Vec<Result<CouplingReport>> = map_replicas(n, |r| {
            let mut rng = stream(seed, block_index(k as u32, r as u32));
            let (y, yt) = (init.sample(&mut rng), init_tilde.sample(&mut rng));
            let mut report = run_three_phase(y, yt, &params, model, t, &mut rng)?.report;
            report.bound_variable = Some(bound.sample(&mut rng));
            Ok(report)
        });
        let block = block.into_iter().collect::<Result<Vec<_>>>()?;
        let taus: Vec<f64> = block.iter().map(|r| r.tau).collect();
        let c = tail_curve(&taus, &[t], EstimatorKind::CouplingTailTv)?;
        tv.values.push(c.values[0]);
        tv.ci_low.push(c.ci_low[0]);
        tv.ci_high.push(c.ci_high[0]);
        tv.counts.push(c.counts[0]);
        if cfg.outputs.all_reports || k + 1 == grid.len() {
            rows.extend(block.into_iter().enumerate().map(|(replica, report)| ReportRow { replica, t, report }));
        }
    }

    let horizon = *grid.last().expect("validated grid");
    let dists: Vec<Result<Vec<f64>>> = map_replicas(n, |r| {
        let mut rng = stream(seed, block_index(W1_BLOCK, r as u32));
        let (y, yt) = (init.sample(&mut rng), init_tilde.sample(&mut rng));
        let path = simulate_coupled_full(y, yt, model, horizon, &mut rng)?;
        grid.iter().map(|&t| Ok(path.state_at(t)?.l1_distance())).collect()
    });
    let dists = dists.into_iter().collect::<Result<Vec<_>>>()?;
    let columns: Vec<Vec<f64>> = (0..grid.len()).map(|k| dists.iter().map(|d| d[k]).collect()).collect();
    let w1 = mean_curve(&columns, &grid, EstimatorKind::CouplingW1)?;

    Ok(CoupleOutcome { rates, tv, w1, reports: rows })
}

/// CSV text from a header and rows of already formatted fields. Floats go
/// through `Display`, so infinities read `inf`.
pub fn to_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// `t,estimate,ci_low,ci_high,bound_value,bound_provenance`.
pub fn curve_csv(curve: &EmpiricalCurve, bound: &BoundCurve) -> String {
    let rows = (0..curve.grid.len()).map(|i| {
        let t = curve.grid[i];
        vec![
            t.to_string(),
            curve.values[i].to_string(),
            curve.ci_low[i].to_string(),
            curve.ci_high[i].to_string(),
            bound.evaluate(t).to_string(),
            bound.provenance.clone(),
        ]
    });
    to_csv(&["t", "estimate", "ci_low", "ci_high", "bound_value", "bound_provenance"], rows)
}

/// One row per replica; infinite times are written as `inf`.
pub fn reports_csv(rows: &[ReportRow]) -> String {
    let header = [
        "replica_id",
        "t",
        "tau_a",
        "tau",
        "ages_by_alpha",
        "close_at_beta",
        "jump_before_t",
        "merged",
        "common_jumps",
        "lone_jumps",
        "bound_variable",
    ];
    let flag = |b: bool| u8::from(b).to_string();
    to_csv(
        &header,
        rows.iter().map(|row| {
            let r = &row.report;
            let f = r.phases.unwrap_or_default();
            vec![
                row.replica.to_string(),
                row.t.to_string(),
                r.tau_a.to_string(),
                r.tau.to_string(),
                flag(f.ages_by_alpha),
                flag(f.close_at_beta),
                flag(f.jump_before_t),
                flag(f.merged),
                r.counts.common.to_string(),
                r.counts.lone.to_string(),
                r.bound_variable.map_or_else(String::new, |v| v.to_string()),
            ]
        }),
    )
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

pub fn write_rate_report(report: &RateReport, dir: &Path) -> Result<PathBuf> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(dir, RATE_REPORT_FILE, &json)
}

pub fn write_couple(out: &CoupleOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write_rate_report(&out.rates, dir)?,
        write_file(dir, CURVES_TV_FILE, &curve_csv(&out.tv, &out.rates.tv_curve))?,
        write_file(dir, CURVES_W1_FILE, &curve_csv(&out.w1, &out.rates.w1_curve))?,
        write_file(dir, REPORTS_FILE, &reports_csv(&out.reports))?,
    ])
}

/// Per-grid means of the state coordinates and of `N_t` for the first
/// initial law.
pub fn run_simulate(cfg: &RunConfig) -> Result<String> {
    let model = cfg.build_model()?;
    let grid = cfg.grid();
    let n = cfg.experiment.n_replicas;
    let seed = cfg.experiment.seed;
    let horizon = cfg.experiment.horizon;
    let samples: Vec<Result<Vec<[f64; 4]>>> = with_threads(cfg.parallelism(), || {
        map_replicas(n, |r| {
            let mut rng = stream(seed, block_index(SIMULATE_BLOCK, r as u32));
            let init = cfg.model.init.sample(&mut rng);
            let path = simulate_path(init, &model, horizon, &mut rng)?;
            grid.iter()
                .map(|&t| {
                    let s = path.log.state_at(t)?;
                    Ok([s.x, s.theta, s.age, path.log.count_until(t) as f64])
                })
                .collect()
        })
    })?;
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let mut curves = Vec::new();
    for c in 0..4 {
        let columns: Vec<Vec<f64>> = (0..grid.len()).map(|k| samples.iter().map(|s| s[k][c]).collect()).collect();
        curves.push(mean_curve(&columns, &grid, EstimatorKind::CouplingW1)?);
    }
    let half: Vec<Vec<f64>> = curves.iter().map(EmpiricalCurve::half_widths).collect();
    let header = ["t", "mean_x", "ci_x", "mean_theta", "ci_theta", "mean_age", "ci_age", "mean_jumps", "ci_jumps"];
    let rows = grid.iter().enumerate().map(|(k, t)| {
        let mut row = vec![t.to_string()];
        for c in 0..4 {
            row.push(curves[c].values[k].to_string());
            row.push(half[c][k].to_string());
        }
        row
    });
    Ok(to_csv(&header, rows))
}

/// `(paths.csv, events.csv)` for `outputs.n_paths` paths from the first
/// initial law, sampled every `outputs.path_step`.
pub fn dump_paths(cfg: &RunConfig) -> Result<(String, String)> {
    let model = cfg.build_model()?;
    let horizon = cfg.experiment.horizon;
    let step = cfg.outputs.path_step;
    let m = (horizon / step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=m).map(|i| i as f64 * step).collect();
    let mut paths = Vec::new();
    let mut events = Vec::new();
    for p in 0..cfg.outputs.n_paths {
        let mut rng = stream(cfg.experiment.seed, block_index(PATHS_BLOCK, p as u32));
        let init = cfg.model.init.sample(&mut rng);
        let path = simulate_path(init, &model, horizon, &mut rng)?;
        for (t, s, flag) in sample_on_grid(&path.log, &grid)? {
            paths.push(vec![
                p.to_string(),
                t.to_string(),
                s.x.to_string(),
                s.theta.to_string(),
                s.age.to_string(),
                u8::from(flag).to_string(),
            ]);
        }
        for i in 0..path.log.len() {
            events.push(vec![
                p.to_string(),
                (i + 1).to_string(),
                path.log.jump_times[i].to_string(),
                path.log.intakes[i].to_string(),
                path.log.thetas[i].to_string(),
            ]);
        }
    }
    Ok((
        to_csv(&["path_id", "t", "x", "theta", "age", "event_flag"], paths),
        to_csv(&["path_id", "n", "t_n", "u_n", "theta_n"], events),
    ))
}

pub fn write_paths(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let (paths, events) = dump_paths(cfg)?;
    Ok(vec![write_file(dir, PATHS_FILE, &paths)?, write_file(dir, EVENTS_FILE, &events)?])
}

pub fn write_simulate(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    write_file(dir, SIMULATE_FILE, &run_simulate(cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub checks: Vec<Check>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Dominance of an empirical curve by a bound: the lower 95% limit must not
/// exceed the bound at any grid point.
pub fn curve_dominance(name: &str, curve: &EmpiricalCurve, bound: &BoundCurve) -> Check {
    let bad: Vec<String> = curve
        .grid
        .iter()
        .zip(&curve.ci_low)
        .filter(|(&t, &lo)| lo > bound.evaluate(t))
        .map(|(&t, &lo)| format!("t = {t}: ci_low {lo} > bound {}", bound.evaluate(t)))
        .collect();
    Check {
        name: name.to_string(),
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} grid points dominated", curve.grid.len())
        } else {
            bad.join("; ")
        },
    }
}

/// Every dominance check that applies to a finished coupling run.
pub fn verify_outcome(out: &CoupleOutcome) -> Result<VerifyOutcome> {
    let mut checks = vec![
        curve_dominance("tv_bound", &out.tv, &out.rates.tv_curve),
        curve_dominance("w1_bound", &out.w1, &out.rates.w1_curve),
    ];
    let last_t = out.reports.last().map_or(0.0, |r| r.t);
    let rows: Vec<&ReportRow> = out.reports.iter().filter(|r| r.t == last_t).collect();
    let tau_a: Vec<f64> = rows.iter().map(|r| r.report.tau_a).collect();
    let bound: Vec<f64> = rows.iter().filter_map(|r| r.report.bound_variable).collect();
    if !tau_a.is_empty() && tau_a.len() == bound.len() {
        let grid: Vec<f64> = (1..=20).map(|i| last_t * i as f64 / 20.0).collect();
        let dom = survival_compare(&tau_a, &bound, &grid)?;
        let failed = dom.holds.iter().filter(|&&h| !h).count();
        let label = match out.rates.age.case {
            AgeCase::PositiveFloor => "exponential floor",
            c => c.label(),
        };
        checks.push(Check {
            name: "age_bound".into(),
            passed: failed == 0,
            detail: format!("case {label}: {failed} of {} grid points violated", grid.len()),
        });
    }
    if let Some(e) = &out.rates.exp_case {
        checks.push(Check {
            name: "exp_case_rates".into(),
            passed: e.rate_method2 > e.rate_method1,
            detail: format!("method 1 rate {}, method 2 rate {}", e.rate_method1, e.rate_method2),
        });
    }
    Ok(VerifyOutcome { checks })
}

pub fn run_verify(cfg: &RunConfig) -> Result<(CoupleOutcome, VerifyOutcome)> {
    let out = run_couple(cfg)?;
    let v = verify_outcome(&out)?;
    Ok((out, v))
}

pub fn write_verify(v: &VerifyOutcome, dir: &Path) -> Result<PathBuf> {
    let mut json = serde_json::to_string_pretty(v)?;
    json.push('\n');
    write_file(dir, VERIFY_FILE, &json)
}
