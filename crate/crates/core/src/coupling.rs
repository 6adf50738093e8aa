//! Coupled simulation of two copies of the process.
//!
//! Ages are coupled by competing risks: the elder age (the larger hazard)
//! sets the next event time by inversion, and the event is common with
//! probability `zeta(younger + s) / zeta(elder + s)`, otherwise only the
//! elder resets. Common intakes share `U` and `Theta`, so once the ages have
//! met the gap `|x - x~|` contracts deterministically. The TV jump coupling
//! replaces the shared `U` by a maximal coupling of `x + U` and `x~ + U~`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, HazardProfile};
use crate::error::{invalid, Error, Result};
use crate::pdmp_sim::{draw_wait, Model, ProcessState};
use crate::rates::{eta, AgeBound, AgeCase, AgeParams};

/// A pair of states. `ages_merged` means equal ages, after which every
/// intake is common; `fully_merged` means identical states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    pub y: ProcessState,
    pub y_tilde: ProcessState,
    pub ages_merged: bool,
    pub fully_merged: bool,
}

impl CoupledState {
    pub fn new(y: ProcessState, y_tilde: ProcessState) -> Self {
        let mut s = Self {
            y,
            y_tilde,
            ages_merged: false,
            fully_merged: false,
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        self.ages_merged |= self.y.age == self.y_tilde.age;
        self.fully_merged |= self.y.x == self.y_tilde.x
            && self.y.theta == self.y_tilde.theta
            && self.y.age == self.y_tilde.age;
    }

    pub fn flow(&self, s: f64) -> Self {
        Self {
            y: self.y.flow(s),
            y_tilde: self.y_tilde.flow(s),
            ..*self
        }
    }

    pub fn gap(&self) -> f64 {
        (self.y.x - self.y_tilde.x).abs()
    }

    /// `|x - x~| + |theta - theta~| + |a - a~|`.
    pub fn l1_distance(&self) -> f64 {
        self.gap() + (self.y.theta - self.y_tilde.theta).abs() + (self.y.age - self.y_tilde.age).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Common,
    FirstOnly,
    SecondOnly,
}

/// Outcomes along the three-phase construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseFlags {
    /// Ages met by `alpha t`.
    pub ages_by_alpha: bool,
    /// Ages met and `|x - x~| < eps` at `beta t`.
    pub close_at_beta: bool,
    /// An intake happened in `(beta t, t]`.
    pub jump_before_t: bool,
    /// The jump coupling merged the two copies.
    pub merged: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub common: u32,
    pub lone: u32,
}

/// Coalescence times, `f64::INFINITY` when not reached within the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub tau_a: f64,
    pub tau: f64,
    pub phases: Option<PhaseFlags>,
    pub counts: EventCounts,
    pub bound_variable: Option<f64>,
}

impl CouplingReport {
    fn start(state: &CoupledState) -> Self {
        Self {
            tau_a: if state.ages_merged { state.y.t } else { f64::INFINITY },
            tau: if state.fully_merged { state.y.t } else { f64::INFINITY },
            phases: None,
            counts: EventCounts::default(),
            bound_variable: None,
        }
    }
}

/// Next coupled age event from ages `(a, a~)`: its waiting time and kind.
pub(crate) fn next_age_event<R: Rng + ?Sized>(
    profile: &HazardProfile,
    a: f64,
    a_tilde: f64,
    rng: &mut R,
) -> (f64, EventKind) {
    if a == a_tilde {
        return (draw_wait(profile, a, rng), EventKind::Common);
    }
    let (elder, young, lone) = if a > a_tilde {
        (a, a_tilde, EventKind::FirstOnly)
    } else {
        (a_tilde, a, EventKind::SecondOnly)
    };
    let wait = draw_wait(profile, elder, rng);
    let z_elder = profile.zeta(elder + wait);
    let z_young = profile.zeta(young + wait);
    let u: f64 = rng.random();
    // Equal hazards on a flat stretch count as common.
    if z_young >= z_elder || u * z_elder < z_young {
        (wait, EventKind::Common)
    } else {
        (wait, lone)
    }
}

/// Age pair right after an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeEvent {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgePath {
    pub events: Vec<AgeEvent>,
    pub report: CouplingReport,
}

fn check_age(profile: &HazardProfile, a: f64) -> Result<()> {
    if !(a >= 0.0 && a < profile.d) {
        return Err(Error::Domain {
            what: "age (must lie in [0, d))",
            value: a,
        });
    }
    Ok(())
}

/// Couples two age processes until they meet or `horizon` passes.
pub fn simulate_coupled_ages<R: Rng + ?Sized>(
    a0: f64,
    a0_tilde: f64,
    profile: &HazardProfile,
    horizon: f64,
    rng: &mut R,
) -> Result<AgePath> {
    check_age(profile, a0)?;
    check_age(profile, a0_tilde)?;
    let mut events = Vec::new();
    let mut counts = EventCounts::default();
    let (mut a, mut b, mut t) = (a0, a0_tilde, 0.0);
    let mut tau_a = if a == b { 0.0 } else { f64::INFINITY };
    while tau_a.is_infinite() {
        let (wait, kind) = next_age_event(profile, a, b, rng);
        t += wait;
        if t > horizon {
            break;
        }
        events.push(AgeEvent { t, kind });
        match kind {
            EventKind::Common => {
                counts.common += 1;
                tau_a = t;
            }
            EventKind::FirstOnly => {
                counts.lone += 1;
                a = 0.0;
                b += wait;
            }
            EventKind::SecondOnly => {
                counts.lone += 1;
                a += wait;
                b = 0.0;
            }
        }
    }
    Ok(AgePath {
        events,
        report: CouplingReport {
            tau_a,
            tau: tau_a,
            phases: None,
            counts,
            bound_variable: None,
        },
    })
}

/// One event of a coupled path and the pair right after it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledEvent {
    pub kind: EventKind,
    pub after: CoupledState,
    /// Outcome of a TV jump coupling performed at this event.
    pub jump_coupling: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub init: CoupledState,
    pub end: f64,
    pub events: Vec<CoupledEvent>,
    pub report: CouplingReport,
}

impl CoupledPath {
    /// Pair at time `t` (right-continuous at events).
    pub fn state_at(&self, t: f64) -> Result<CoupledState> {
        if !(t >= self.init.y.t && t <= self.end) {
            return Err(Error::Domain {
                what: "time outside the simulated window",
                value: t,
            });
        }
        let k = self.events.partition_point(|e| e.after.y.t <= t);
        let base = if k == 0 { self.init } else { self.events[k - 1].after };
        Ok(base.flow(t - base.y.t))
    }

    pub fn end_state(&self) -> CoupledState {
        self.state_at(self.end).expect("end lies in the window")
    }
}

/// Marks of one event under the shared-intake coupling.
fn apply_marks<R: Rng + ?Sized>(s: &mut CoupledState, kind: EventKind, model: &Model, rng: &mut R) {
    match kind {
        EventKind::Common => {
            let u = model.intake.sample(rng);
            let theta = model.metabolic.sample(rng);
            for y in [&mut s.y, &mut s.y_tilde] {
                y.x += u;
                y.theta = theta;
                y.age = 0.0;
            }
        }
        EventKind::FirstOnly | EventKind::SecondOnly => {
            let y = if kind == EventKind::FirstOnly { &mut s.y } else { &mut s.y_tilde };
            y.x += model.intake.sample(rng);
            y.theta = model.metabolic.sample(rng);
            y.age = 0.0;
        }
    }
}

fn start_pair(init: ProcessState, init_tilde: ProcessState, model: &Model) -> Result<CoupledState> {
    init.validate()?;
    init_tilde.validate()?;
    check_age(model.profile(), init.age)?;
    check_age(model.profile(), init_tilde.age)?;
    if init.t != init_tilde.t {
        return Err(invalid("the two initial states must share their time"));
    }
    Ok(CoupledState::new(init, init_tilde))
}

/// Shared-intake coupling on `[0, horizon]`. The first intake of each copy
/// comes after its residual waiting time from the initial age.
pub fn simulate_coupled_full<R: Rng + ?Sized>(
    init: ProcessState,
    init_tilde: ProcessState,
    model: &Model,
    horizon: f64,
    rng: &mut R,
) -> Result<CoupledPath> {
    let start = start_pair(init, init_tilde, model)?;
    let end = start.y.t + horizon;
    let mut report = CouplingReport::start(&start);
    let mut events = Vec::new();
    let mut s = start;
    loop {
        let (wait, kind) = next_age_event(model.profile(), s.y.age, s.y_tilde.age, rng);
        if s.y.t + wait > end {
            break;
        }
        s = s.flow(wait);
        apply_marks(&mut s, kind, model, rng);
        record(&mut s, &mut report, kind);
        events.push(CoupledEvent { kind, after: s, jump_coupling: None });
    }
    Ok(CoupledPath { init: start, end, events, report })
}

fn record(s: &mut CoupledState, report: &mut CouplingReport, kind: EventKind) {
    match kind {
        EventKind::Common => report.counts.common += 1,
        _ => report.counts.lone += 1,
    }
    s.refresh();
    if s.ages_merged && report.tau_a.is_infinite() {
        report.tau_a = s.y.t;
    }
    if s.fully_merged && report.tau.is_infinite() {
        report.tau = s.y.t;
    }
}

/// Maximal coupling of `x + U` and `x~ + U~`, `U, U~ ~ F`.
///
/// With probability `1 - eta(|x - x~|)` both land on one draw from the
/// normalised overlap `min(f(. - x), f(. - x~))`; otherwise each lands on a
/// draw from its own normalised residual. Both are sampled by rejection from
/// `F`.
pub fn tv_jump_coupling<R: Rng + ?Sized>(
    x_minus: f64,
    x_tilde_minus: f64,
    f: &DistributionSpec,
    rng: &mut R,
) -> Result<(f64, f64, bool)> {
    let delta = x_minus - x_tilde_minus;
    let density = |u: f64| f.density(u).unwrap_or(0.0);
    f.density(0.0)?;
    if delta == 0.0 {
        let u = f.sample(rng);
        return Ok((x_minus + u, x_minus + u, true));
    }
    let deficit = eta(delta, &f.family)?;
    // Ratio of the other copy's density at the same landing point.
    let other = |u: f64, shift: f64| {
        let fu = density(u);
        if fu > 0.0 {
            (density(u + shift) / fu).min(1.0)
        } else {
            0.0
        }
    };
    if rng.random::<f64>() >= deficit {
        loop {
            let u = f.sample(rng);
            if rng.random::<f64>() < other(u, delta) {
                let y = x_minus + u;
                return Ok((y, y, true));
            }
        }
    }
    let residual = |base: f64, shift: f64, rng: &mut R| loop {
        let u = f.sample(rng);
        if rng.random::<f64>() < 1.0 - other(u, shift) {
            return base + u;
        }
    };
    let y = residual(x_minus, delta, rng);
    let y_tilde = residual(x_tilde_minus, -delta, rng);
    Ok((y, y_tilde, false))
}

/// Splitting of `[0, t]` into `[0, alpha t]`, `(alpha t, beta t]`,
/// `(beta t, t]`, plus the tuning of the age construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingPhaseParams {
    pub alpha: f64,
    pub beta: f64,
    /// Threshold for `|x - x~|` at `beta t`.
    pub epsilon_tv: f64,
    pub age: Option<AgeParams>,
}

impl CouplingPhaseParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.alpha && self.alpha < self.beta && self.beta < 1.0) {
            return Err(invalid(format!(
                "need 0 < alpha < beta < 1, got {} and {}",
                self.alpha, self.beta
            )));
        }
        if !(self.epsilon_tv > 0.0 && self.epsilon_tv < 1.0) {
            return Err(invalid(format!("epsilon_tv must lie in (0, 1), got {}", self.epsilon_tv)));
        }
        Ok(())
    }
}

/// Result of one three-phase run: the report and the pair at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePhaseOutcome {
    pub report: CouplingReport,
    pub end: CoupledState,
}

/// Shared-intake coupling on `[0, beta t]`, then one TV jump coupling at the
/// first common intake in `(beta t, t]`. After a failed attempt the copies
/// keep sharing intakes and cannot merge before `t`.
pub fn run_three_phase<R: Rng + ?Sized>(
    init: ProcessState,
    init_tilde: ProcessState,
    params: &CouplingPhaseParams,
    model: &Model,
    t: f64,
    rng: &mut R,
) -> Result<ThreePhaseOutcome> {
    params.validate()?;
    if !(t > 0.0) {
        return Err(invalid(format!("horizon must be > 0, got {t}")));
    }
    let mut s = start_pair(init, init_tilde, model)?;
    let t0 = s.y.t;
    let (alpha_t, beta_t, end) = (t0 + params.alpha * t, t0 + params.beta * t, t0 + t);
    let mut report = CouplingReport::start(&s);
    let mut flags = PhaseFlags::default();
    let mut at_beta: Option<CoupledState> = None;
    let mut attempted = s.fully_merged;
    loop {
        let (wait, kind) = next_age_event(model.profile(), s.y.age, s.y_tilde.age, rng);
        let te = s.y.t + wait;
        if at_beta.is_none() && te > beta_t {
            at_beta = Some(s.flow(beta_t - s.y.t));
        }
        if te > end {
            break;
        }
        s = s.flow(wait);
        if te > beta_t {
            flags.jump_before_t = true;
        }
        if kind == EventKind::Common && te > beta_t && !attempted {
            attempted = true;
            let theta = model.metabolic.sample(rng);
            let (x, x_tilde, merged) = tv_jump_coupling(s.y.x, s.y_tilde.x, &model.intake, rng)?;
            for (y, xp) in [(&mut s.y, x), (&mut s.y_tilde, x_tilde)] {
                y.x = xp;
                y.theta = theta;
                y.age = 0.0;
            }
            if merged {
                // Overlap draws are bit-identical.
                s.y_tilde = s.y;
            }
        } else {
            apply_marks(&mut s, kind, model, rng);
        }
        record(&mut s, &mut report, kind);
    }
    let at_beta = at_beta.expect("beta t lies before the end");
    flags.ages_by_alpha = report.tau_a <= alpha_t;
    flags.close_at_beta = at_beta.ages_merged && at_beta.gap() < params.epsilon_tv;
    flags.merged = report.tau <= end;
    report.phases = Some(flags);
    Ok(ThreePhaseOutcome {
        report,
        end: s.flow(end - s.y.t),
    })
}

/// Coupling with a random division of `[0, t]`: intakes share `U` except the
/// last one before `t`, which uses the TV jump coupling when it is common.
///
/// The event skeleton does not depend on the marks, so it is drawn first and
/// the marks are replayed on it.
pub fn run_last_jump_tv<R: Rng + ?Sized>(
    init: ProcessState,
    init_tilde: ProcessState,
    model: &Model,
    t: f64,
    rng: &mut R,
) -> Result<CouplingReport> {
    if !(t > 0.0) {
        return Err(invalid(format!("horizon must be > 0, got {t}")));
    }
    let start = start_pair(init, init_tilde, model)?;
    let end = start.y.t + t;
    let mut skeleton = Vec::new();
    let (mut a, mut b, mut now) = (start.y.age, start.y_tilde.age, start.y.t);
    loop {
        let (wait, kind) = next_age_event(model.profile(), a, b, rng);
        if now + wait > end {
            break;
        }
        now += wait;
        skeleton.push((wait, kind));
        match kind {
            EventKind::Common => (a, b) = (0.0, 0.0),
            EventKind::FirstOnly => (a, b) = (0.0, b + wait),
            EventKind::SecondOnly => (a, b) = (a + wait, 0.0),
        }
    }
    let mut s = start;
    let mut report = CouplingReport::start(&s);
    let last = skeleton.len().checked_sub(1);
    for (i, &(wait, kind)) in skeleton.iter().enumerate() {
        s = s.flow(wait);
        if Some(i) == last && kind == EventKind::Common && !s.fully_merged {
            let theta = model.metabolic.sample(rng);
            let (x, x_tilde, merged) = tv_jump_coupling(s.y.x, s.y_tilde.x, &model.intake, rng)?;
            for (y, xp) in [(&mut s.y, x), (&mut s.y_tilde, x_tilde)] {
                y.x = xp;
                y.theta = theta;
                y.age = 0.0;
            }
            if merged {
                s.y_tilde = s.y;
            }
        } else {
            apply_marks(&mut s, kind, model, rng);
        }
        record(&mut s, &mut report, kind);
    }
    Ok(report)
}

/// Exact coupled ages from `(a0, a0~)` together with an independent draw of
/// the bound variable for `case`, after checking the case hypotheses.
pub fn age_coalescence_algorithm<R: Rng + ?Sized>(
    case: AgeCase,
    params: AgeParams,
    profile: &HazardProfile,
    a0: f64,
    a0_tilde: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<CouplingReport> {
    let bound = AgeBound::new(case, profile, params)?;
    let mut report = simulate_coupled_ages(a0, a0_tilde, profile, horizon, rng)?.report;
    report.bound_variable = Some(bound.sample(rng));
    Ok(report)
}
