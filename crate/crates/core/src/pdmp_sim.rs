//! Exact event-driven simulation of `Y = (X, Theta, A)`.
//!
//! Between intakes the burden follows the flow `x(t + s) = x(t) exp(-theta s)`;
//! intake times are drawn by inverting the integrated hazard from the current
//! age, so no time discretisation is involved.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Family, HazardProfile, Role};
use crate::error::{invalid, Error, Result};

/// State of one process: burden, current elimination rate, age since the last
/// intake, and absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessState {
    pub x: f64,
    pub theta: f64,
    pub age: f64,
    pub t: f64,
}

impl ProcessState {
    pub fn new(x: f64, theta: f64, age: f64) -> Result<Self> {
        let s = Self { x, theta, age, t: 0.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x >= 0.0 && self.x.is_finite()) {
            return Err(invalid(format!("x must be >= 0, got {}", self.x)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(invalid(format!("theta must be > 0, got {}", self.theta)));
        }
        if !(self.age >= 0.0 && self.age.is_finite()) {
            return Err(invalid(format!("age must be >= 0, got {}", self.age)));
        }
        Ok(())
    }

    /// Deterministic flow for a duration `s` with no intake.
    pub fn flow(&self, s: f64) -> Self {
        Self {
            x: self.x * (-self.theta * s).exp(),
            theta: self.theta,
            age: self.age + s,
            t: self.t + s,
        }
    }
}

/// The three laws F, G, H driving the process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub intake: DistributionSpec,
    pub inter_arrival: DistributionSpec,
    pub metabolic: DistributionSpec,
    /// Law of the first waiting time. When absent, the first intake comes
    /// after the residual waiting time from the initial age (a `G` draw when
    /// that age is 0).
    #[serde(default)]
    pub first_arrival: Option<DistributionSpec>,
    #[serde(skip)]
    profile: Option<HazardProfile>,
}

impl Model {
    pub fn new(
        intake: DistributionSpec,
        inter_arrival: DistributionSpec,
        metabolic: DistributionSpec,
    ) -> Result<Self> {
        let mut m = Self {
            intake,
            inter_arrival,
            metabolic,
            first_arrival: None,
            profile: None,
        };
        m.prepare()?;
        Ok(m)
    }

    pub fn with_first_arrival(mut self, law: DistributionSpec) -> Self {
        self.first_arrival = Some(law);
        self
    }

    /// Validates the roles and caches the hazard profile. Needed after
    /// deserialising.
    pub fn prepare(&mut self) -> Result<()> {
        let checks = [
            (&self.intake, Role::Intake),
            (&self.inter_arrival, Role::InterArrival),
            (&self.metabolic, Role::Metabolic),
        ];
        for (spec, role) in checks {
            DistributionSpec::new(spec.family, role)?;
            if spec.role != role {
                return Err(invalid(format!(
                    "law given for {role:?} is tagged {:?}",
                    spec.role
                )));
            }
        }
        if let Some(first) = &self.first_arrival {
            first.family.validate()?;
        }
        self.profile = Some(self.inter_arrival.hazard_profile()?);
        Ok(())
    }

    pub fn profile(&self) -> &HazardProfile {
        self.profile
            .as_ref()
            .expect("Model::prepare must run before simulation")
    }
}

/// Record of the intakes along one path. Dense output is rebuilt on demand by
/// [`EventLog::state_at`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub init: ProcessState,
    /// Absolute end of the simulated window.
    pub end: f64,
    /// Intake times `T_1 < T_2 < ...`.
    pub jump_times: Vec<f64>,
    /// Intake sizes `U_n`.
    pub intakes: Vec<f64>,
    /// Elimination rate drawn at `T_n`, in force until `T_{n+1}`.
    pub thetas: Vec<f64>,
    /// Burden right after the `n`-th intake.
    pub post_jump_x: Vec<f64>,
}

impl EventLog {
    fn new(init: ProcessState) -> Self {
        Self {
            init,
            end: init.t,
            jump_times: Vec::new(),
            intakes: Vec::new(),
            thetas: Vec::new(),
            post_jump_x: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// `N_t = #{n : T_n <= t}`.
    pub fn count_until(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }

    /// Càdlàg state at absolute time `t`.
    pub fn state_at(&self, t: f64) -> Result<ProcessState> {
        if t < self.init.t || t > self.end {
            return Err(Error::Domain {
                what: "event log time window",
                value: t,
            });
        }
        let n = self.count_until(t);
        let anchor = if n == 0 {
            self.init
        } else {
            ProcessState {
                x: self.post_jump_x[n - 1],
                theta: self.thetas[n - 1],
                age: 0.0,
                t: self.jump_times[n - 1],
            }
        };
        Ok(anchor.flow(t - anchor.t))
    }

    /// `int_{t0}^{t1} Theta_s ds` along the path.
    pub fn integrated_theta(&self, t0: f64, t1: f64) -> f64 {
        let mut total = 0.0;
        let mut from = t0;
        let mut n = self.count_until(t0);
        loop {
            let theta = if n == 0 { self.init.theta } else { self.thetas[n - 1] };
            let next = self.jump_times.get(n).copied().unwrap_or(f64::INFINITY).min(t1);
            total += theta * (next - from);
            if next >= t1 {
                return total;
            }
            from = next;
            n += 1;
        }
    }
}

/// Law of an initial state, one independent law per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialLaw {
    pub x: Family,
    pub theta: Family,
    pub age: Family,
}

impl InitialLaw {
    pub fn point(x: f64, theta: f64, age: f64) -> Self {
        Self {
            x: Family::Dirac { value: x },
            theta: Family::Dirac { value: theta },
            age: Family::Dirac { value: age },
        }
    }

    /// Checks that draws are valid states with an age below `d`.
    pub fn validate(&self, d: f64) -> Result<()> {
        for f in [&self.x, &self.theta, &self.age] {
            f.validate()?;
        }
        if self.x.support().0 < 0.0 {
            return Err(invalid("initial x law must live on [0, inf)"));
        }
        let (lo, _) = self.theta.support();
        if lo < 0.0 || matches!(self.theta, Family::Dirac { value } if value <= 0.0) {
            return Err(invalid("initial theta law must live on (0, inf)"));
        }
        let (lo, hi) = self.age.support();
        if lo < 0.0 {
            return Err(invalid("initial age law must live on [0, inf)"));
        }
        if hi >= d && !(hi == d && self.age.has_density()) {
            return Err(Error::Domain {
                what: "initial age law (reaches the end of the support of G)",
                value: hi,
            });
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ProcessState {
        ProcessState {
            x: self.x.sample(rng),
            theta: self.theta.sample(rng),
            age: self.age.sample(rng),
            t: 0.0,
        }
    }

    /// The state itself when every coordinate is a point mass.
    pub fn as_point(&self) -> Option<ProcessState> {
        match (self.x, self.theta, self.age) {
            (Family::Dirac { value: x }, Family::Dirac { value: theta }, Family::Dirac { value: age }) => {
                Some(ProcessState { x, theta, age, t: 0.0 })
            }
            _ => None,
        }
    }
}

/// One simulated path: its log and its state at the end of the window.
#[derive(Debug, Clone)]
pub struct SimulatedPath {
    pub log: EventLog,
    pub end_state: ProcessState,
}

/// Draws the waiting time until the next intake for a process of age `age`.
pub(crate) fn draw_wait<R: Rng + ?Sized>(
    profile: &HazardProfile,
    age: f64,
    rng: &mut R,
) -> f64 {
    let target: f64 = Exp1.sample(rng);
    profile
        .integrated_hazard_inverse(age, target.max(f64::MIN_POSITIVE))
        .expect("age below d and positive target")
}

/// Simulates one path on `[init.t, init.t + horizon]`.
pub fn simulate_path<R: Rng + ?Sized>(
    init: ProcessState,
    model: &Model,
    horizon: f64,
    rng: &mut R,
) -> Result<SimulatedPath> {
    init.validate()?;
    if !(horizon > 0.0) {
        return Err(invalid(format!("horizon must be > 0, got {horizon}")));
    }
    let profile = model.profile();
    if init.age >= profile.d {
        return Err(Error::Domain {
            what: "initial age (beyond the support of G)",
            value: init.age,
        });
    }
    let end = init.t + horizon;
    let mut log = EventLog::new(init);
    log.end = end;
    let mut state = init;
    let mut first = true;
    loop {
        let wait = match (&model.first_arrival, first) {
            (Some(law), true) => law.sample(rng),
            _ => draw_wait(profile, state.age, rng),
        };
        first = false;
        if state.t + wait > end {
            break;
        }
        let mut next = state.flow(wait);
        let u = model.intake.sample(rng);
        let theta = model.metabolic.sample(rng);
        next.x += u;
        next.theta = theta;
        next.age = 0.0;
        log.jump_times.push(next.t);
        log.intakes.push(u);
        log.thetas.push(theta);
        log.post_jump_x.push(next.x);
        state = next;
    }
    let end_state = state.flow(end - state.t);
    Ok(SimulatedPath { log, end_state })
}

/// `simulate_path` from an initial state, returning only the end state.
pub fn state_after<R: Rng + ?Sized>(
    init: ProcessState,
    model: &Model,
    horizon: f64,
    rng: &mut R,
) -> Result<ProcessState> {
    Ok(simulate_path(init, model, horizon, rng)?.end_state)
}

/// Rows `(t, x, theta, age, event_flag)` on a sampling grid, where the flag
/// marks an intake in `(previous grid point, t]`.
pub fn sample_on_grid(log: &EventLog, grid: &[f64]) -> Result<Vec<(f64, ProcessState, bool)>> {
    let mut prev_count = 0;
    let mut rows = Vec::with_capacity(grid.len());
    for (i, &t) in grid.iter().enumerate() {
        let s = log.state_at(t)?;
        let count = log.count_until(t);
        let flag = if i == 0 {
            log.jump_times.first() == Some(&t)
        } else {
            count > prev_count
        };
        prev_count = count;
        rows.push((t, s, flag));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Family;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    fn model(f: Family, g: Family, h: Family) -> Model {
        Model::new(
            DistributionSpec::intake(f).unwrap(),
            DistributionSpec::inter_arrival(g).unwrap(),
            DistributionSpec::metabolic(h).unwrap(),
        )
        .unwrap()
    }

    fn reference() -> Model {
        model(
            Family::Uniform { lo: 0.0, hi: 1.0 },
            Family::Exponential { rate: 1.0 },
            Family::Dirac { value: 1.0 },
        )
    }

    #[test]
    fn state_at_zero_is_init() {
        let init = ProcessState::new(2.0, 1.0, 0.0).unwrap();
        let p = simulate_path(init, &reference(), 10.0, &mut stream(1, 0)).unwrap();
        assert_eq!(p.log.state_at(0.0).unwrap(), init);
    }

    #[test]
    fn flow_between_jumps() {
        let init = ProcessState::new(3.0, 2.0, 0.0).unwrap();
        let s = init.flow(0.5);
        assert_abs_diff_eq!(s.x, 3.0 * (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(s.age, 0.5);
    }

    #[test]
    fn cadlag_at_jump_times() {
        let init = ProcessState::new(1.0, 1.0, 0.0).unwrap();
        let p = simulate_path(init, &reference(), 20.0, &mut stream(2, 0)).unwrap();
        assert!(p.log.len() > 3);
        for (n, &tn) in p.log.jump_times.iter().enumerate() {
            let at = p.log.state_at(tn).unwrap();
            let before = p.log.state_at(tn - 1e-12).unwrap();
            assert_eq!(at.age, 0.0);
            assert_eq!(at.theta, p.log.thetas[n]);
            assert_abs_diff_eq!(at.x - before.x, p.log.intakes[n], epsilon = 1e-9);
        }
    }

    #[test]
    fn out_of_window_is_error() {
        let init = ProcessState::new(1.0, 1.0, 0.0).unwrap();
        let p = simulate_path(init, &reference(), 5.0, &mut stream(2, 0)).unwrap();
        assert!(p.log.state_at(5.0).is_ok());
        assert!(matches!(p.log.state_at(5.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn no_intake_mass_gives_pure_decay() {
        let m = model(
            Family::Dirac { value: 0.0 },
            Family::Weibull { shape: 2.0, scale: 1.0 },
            Family::Uniform { lo: 0.5, hi: 2.0 },
        );
        let init = ProcessState::new(5.0, 1.3, 0.2).unwrap();
        let p = simulate_path(init, &m, 15.0, &mut stream(3, 0)).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=300 {
            let t = i as f64 * 0.05;
            let s = p.log.state_at(t).unwrap();
            assert!(s.x <= prev);
            prev = s.x;
            let expected = 5.0f64.ln() - p.log.integrated_theta(0.0, t);
            assert_abs_diff_eq!(s.x.ln(), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_seeds_identical_paths() {
        let init = ProcessState::new(1.0, 1.0, 0.0).unwrap();
        let a = simulate_path(init, &reference(), 50.0, &mut stream(9, 4)).unwrap();
        let b = simulate_path(init, &reference(), 50.0, &mut stream(9, 4)).unwrap();
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn first_arrival_override() {
        let m = reference().with_first_arrival(DistributionSpec {
            family: Family::Dirac { value: 3.0 },
            role: Role::InterArrival,
        });
        let init = ProcessState::new(1.0, 1.0, 0.0).unwrap();
        let p = simulate_path(init, &m, 10.0, &mut stream(4, 0)).unwrap();
        assert_eq!(p.log.jump_times[0], 3.0);
    }

    #[test]
    fn grid_sampling_flags_events() {
        let init = ProcessState::new(1.0, 1.0, 0.0).unwrap();
        let p = simulate_path(init, &reference(), 10.0, &mut stream(5, 0)).unwrap();
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let rows = sample_on_grid(&p.log, &grid).unwrap();
        let flagged = rows.iter().filter(|r| r.2).count();
        let distinct_bins = p
            .log
            .jump_times
            .iter()
            .map(|t| (t / 0.1).ceil() as i64)
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        assert_eq!(flagged, distinct_bins);
    }
}
