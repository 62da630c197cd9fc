//! Fixed-step integration in logarithmic coordinates under bounded variable rates.
//!
//! States are carried as `X = log x`, so every state is positive by construction.
//! Rates are evaluated from a schedule clamped to `[epsilon, 1/epsilon]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{to_f64, Q};
use crate::region::{point_in_polygon, InvariantPolygon};
use crate::system::VkSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant { values: Vec<f64> },
    /// Log-uniform values redrawn at the start of every period.
    PiecewiseRandom { period: f64, seed: u64 },
    /// `kappa_i = exp(L sin(2 pi f t + phase_i))` with `L = -ln epsilon`.
    Sinusoidal { frequency: f64, phases: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaSchedule {
    pub kind: ScheduleKind,
    #[serde(with = "crate::rational::serde_q")]
    pub epsilon: Q,
    pub reactions: usize,
}

impl KappaSchedule {
    pub fn new(kind: ScheduleKind, epsilon: Q, reactions: usize) -> Result<KappaSchedule> {
        let e = to_f64(&epsilon);
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::Invalid(format!("epsilon must lie in (0,1], got {epsilon}")));
        }
        match &kind {
            ScheduleKind::Constant { values } if values.len() != reactions => {
                return Err(Error::Invalid(format!("expected {reactions} constant rates, got {}", values.len())))
            }
            ScheduleKind::Constant { values } if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) => {
                return Err(Error::Invalid("constant rates must be positive and finite".into()))
            }
            ScheduleKind::PiecewiseRandom { period, .. } if !(period.is_finite() && *period > 0.0) => {
                return Err(Error::Invalid("period must be positive".into()))
            }
            ScheduleKind::Sinusoidal { frequency, phases } => {
                if !frequency.is_finite() || phases.len() != reactions {
                    return Err(Error::Invalid(format!("sinusoid needs a finite frequency and {reactions} phases")));
                }
            }
            _ => {}
        }
        Ok(KappaSchedule { kind, epsilon, reactions })
    }

    /// Constant rates for every reaction of `sys`, clamped to its bounds on evaluation.
    pub fn constant(sys: &VkSystem, values: Vec<f64>) -> Result<KappaSchedule> {
        KappaSchedule::new(ScheduleKind::Constant { values }, sys.epsilon.clone(), sys.reaction_count())
    }

    pub fn piecewise_random(sys: &VkSystem, period: f64, seed: u64) -> Result<KappaSchedule> {
        KappaSchedule::new(ScheduleKind::PiecewiseRandom { period, seed }, sys.epsilon.clone(), sys.reaction_count())
    }

    pub fn sinusoidal(sys: &VkSystem, frequency: f64, phases: Vec<f64>) -> Result<KappaSchedule> {
        KappaSchedule::new(ScheduleKind::Sinusoidal { frequency, phases }, sys.epsilon.clone(), sys.reaction_count())
    }

    pub fn bounds(&self) -> (f64, f64) {
        let e = to_f64(&self.epsilon);
        (e, 1.0 / e)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        let span = -lo.ln();
        let raw: Vec<f64> = match &self.kind {
            ScheduleKind::Constant { values } => values.clone(),
            ScheduleKind::PiecewiseRandom { period, seed } => {
                let piece = (t / period).floor().max(0.0) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(piece);
                (0..self.reactions).map(|_| (rng.gen_range(-1.0..=1.0) * span).exp()).collect()
            }
            ScheduleKind::Sinusoidal { frequency, phases } => phases
                .iter()
                .map(|ph| (span * (std::f64::consts::TAU * frequency * t + ph).sin()).exp())
                .collect(),
        };
        raw.into_iter().map(|k| k.clamp(lo, hi)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Entry,
    Exit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionEvent {
    pub kind: EventKind,
    pub time: f64,
    /// Signed log-space distance to the region boundary; negative outside.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    pub events: Vec<RegionEvent>,
    pub region_tracked: bool,
    /// Most negative margin seen after the first entry, or zero.
    pub worst_margin: f64,
    pub burn_in_time: f64,
    pub post_min: [f64; 2],
    pub post_max: [f64; 2],
    /// Largest log-space gap between one full step and two half steps, over the checked steps.
    pub halving_error: f64,
    pub step: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn entry_time(&self) -> Option<f64> {
        self.events.iter().find(|e| e.kind == EventKind::Entry).map(|e| e.time)
    }

    pub fn last_state(&self) -> [f64; 2] {
        *self.states.last().expect("trajectories hold the initial state")
    }
}

#[derive(Clone, Debug)]
pub struct SimOptions<'a> {
    pub region: Option<&'a InvariantPolygon>,
    /// Fraction of `t_end` excluded from the min/max bounds.
    pub burn_in: f64,
    /// Record every `stride`-th step; bounds and events still see every step.
    pub stride: usize,
    /// Run the step-halving comparison every this many steps; zero disables it.
    pub halving_every: usize,
}

impl Default for SimOptions<'_> {
    fn default() -> Self {
        SimOptions { region: None, burn_in: 0.5, stride: 1, halving_every: 16 }
    }
}

fn rk4(sys: &VkSystem, sched: &KappaSchedule, t: f64, x: [f64; 2], h: f64) -> [f64; 2] {
    let f = |t: f64, x: [f64; 2]| sys.log_velocity(x, &sched.eval(t));
    let k1 = f(t, x);
    let k2 = f(t + h / 2.0, [x[0] + h / 2.0 * k1[0], x[1] + h / 2.0 * k1[1]]);
    let k3 = f(t + h / 2.0, [x[0] + h / 2.0 * k2[0], x[1] + h / 2.0 * k2[1]]);
    let k4 = f(t + h, [x[0] + h * k3[0], x[1] + h * k3[1]]);
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn log_gap(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

/// Log-space distance from `x` to the nearest point of the polygon boundary in the plane.
///
/// The nearest point is taken in linear coordinates, so the value bounds the true
/// log-space distance from above and tends to it near the boundary.
pub fn boundary_log_distance(vs: &[[f64; 2]], x: [f64; 2]) -> f64 {
    let lx = [x[0].ln(), x[1].ln()];
    let n = vs.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (p, q) = (vs[i], vs[(i + 1) % n]);
        let d = [q[0] - p[0], q[1] - p[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let s = if len2 > 0.0 { (((x[0] - p[0]) * d[0] + (x[1] - p[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let c = [p[0] + s * d[0], p[1] + s * d[1]];
        if c[0] > 0.0 && c[1] > 0.0 {
            best = best.min((lx[0] - c[0].ln()).hypot(lx[1] - c[1].ln()));
        }
    }
    best
}

pub fn integrate(sys: &VkSystem, sched: &KappaSchedule, x0: [f64; 2], t_end: f64, h: f64) -> Result<Trajectory> {
    integrate_with(sys, sched, x0, t_end, h, &SimOptions::default())
}

/// Classical RK4 on `X' = f(exp X, t) / exp X` with `ceil(t_end / h)` equal steps.
pub fn integrate_with(
    sys: &VkSystem,
    sched: &KappaSchedule,
    x0: [f64; 2],
    t_end: f64,
    h: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if !(x0[0] > 0.0 && x0[1] > 0.0 && x0[0].is_finite() && x0[1].is_finite()) {
        return Err(Error::Invalid(format!("initial state must be positive, got {x0:?}")));
    }
    if !(h > 0.0 && h.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Invalid(format!("need h > 0 and t_end >= 0, got h = {h}, t_end = {t_end}")));
    }
    if sched.reactions != sys.reaction_count() {
        return Err(Error::Invalid("schedule and system disagree on the number of reactions".into()));
    }
    let n = if t_end == 0.0 { 0 } else { (t_end / h).ceil() as usize };
    let step = if n == 0 { h } else { t_end / n as f64 };
    let burn_in_time = opts.burn_in.clamp(0.0, 1.0) * t_end;
    let stride = opts.stride.max(1);
    let poly: Option<Vec<[f64; 2]>> = opts.region.map(|p| p.vertices_f64());

    let mut tr = Trajectory {
        times: vec![0.0],
        states: vec![x0],
        events: Vec::new(),
        region_tracked: poly.is_some(),
        worst_margin: 0.0,
        burn_in_time,
        post_min: [f64::INFINITY; 2],
        post_max: [f64::NEG_INFINITY; 2],
        halving_error: 0.0,
        step,
        steps: n,
    };
    let mut inside = false;
    let mut observe = |tr: &mut Trajectory, t: f64, x: [f64; 2]| {
        if t >= burn_in_time {
            for c in 0..2 {
                tr.post_min[c] = tr.post_min[c].min(x[c]);
                tr.post_max[c] = tr.post_max[c].max(x[c]);
            }
        }
        if let Some(vs) = &poly {
            let now = point_in_polygon(vs, x);
            let entered = tr.entry_time().is_some();
            if now && !inside {
                tr.events.push(RegionEvent { kind: EventKind::Entry, time: t, margin: 0.0 });
            }
            if !now && entered {
                let m = -boundary_log_distance(vs, x);
                tr.worst_margin = tr.worst_margin.min(m);
                if inside {
                    tr.events.push(RegionEvent { kind: EventKind::Exit, time: t, margin: m });
                }
            }
            inside = now;
        }
    };
    observe(&mut tr, 0.0, x0);

    let mut lx = [x0[0].ln(), x0[1].ln()];
    for k in 0..n {
        let t = k as f64 * step;
        let next = rk4(sys, sched, t, lx, step);
        if !(next[0].is_finite() && next[1].is_finite()) {
            return Err(Error::Numerical(format!(
                "nonfinite state at t = {t}; last good state ({}, {})",
                lx[0].exp(),
                lx[1].exp()
            )));
        }
        if opts.halving_every > 0 && k % opts.halving_every == 0 {
            let half = rk4(sys, sched, t, lx, step / 2.0);
            let two = rk4(sys, sched, t + step / 2.0, half, step / 2.0);
            if two[0].is_finite() && two[1].is_finite() {
                tr.halving_error = tr.halving_error.max(log_gap(next, two));
            }
        }
        lx = next;
        let (tk, x) = ((k + 1) as f64 * step, [lx[0].exp(), lx[1].exp()]);
        if !(x[0] > 0.0 && x[1] > 0.0 && x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::Numerical(format!("state left the representable positive range at t = {tk}")));
        }
        observe(&mut tr, tk, x);
        if (k + 1) % stride == 0 || k + 1 == n {
            tr.times.push(tk);
            tr.states.push(x);
        }
    }
    if n == 0 {
        tr.post_min = x0;
        tr.post_max = x0;
    }
    Ok(tr)
}

/// `V = k2 x - k3 ln x + k2 y - k1 ln y`, constant along `x' = k1 x - k2 x y`, `y' = k2 x y - k3 y`.
pub fn lv_first_integral(kappa: [f64; 3], x: [f64; 2]) -> f64 {
    kappa[1] * x[0] - kappa[2] * x[0].ln() + kappa[1] * x[1] - kappa[0] * x[1].ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub post_min: [f64; 2],
    pub post_max: [f64; 2],
    /// `max_c ln(post_max_c / post_min_c)`.
    pub log_amplitude: f64,
    pub entry_time: Option<f64>,
    pub exits: usize,
    pub worst_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermanenceReport {
    pub runs: Vec<RunSummary>,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub region_tracked: bool,
    pub all_entered: bool,
    /// Runs whose worst post-entry margin is below `-INVARIANCE_TOL`.
    pub violations: usize,
    pub worst_margin: f64,
    /// Largest over smallest per-run log amplitude.
    pub amplitude_spread: f64,
    /// Amplitudes differ across runs by more than `AMPLITUDE_SPREAD_FLAG`, as for a family of closed orbits.
    pub unbounded_amplitude: bool,
}

pub const INVARIANCE_TOL: f64 = 1e-9;
pub const AMPLITUDE_SPREAD_FLAG: f64 = 3.0;

pub fn permanence_report(trajectories: &[Trajectory]) -> Result<PermanenceReport> {
    if trajectories.is_empty() {
        return Err(Error::Invalid("no trajectories".into()));
    }
    let runs: Vec<RunSummary> = trajectories
        .iter()
        .map(|t| RunSummary {
            post_min: t.post_min,
            post_max: t.post_max,
            log_amplitude: (0..2).map(|c| (t.post_max[c] / t.post_min[c]).ln()).fold(0.0, f64::max),
            entry_time: t.entry_time(),
            exits: t.events.iter().filter(|e| e.kind == EventKind::Exit).count(),
            worst_margin: t.worst_margin,
        })
        .collect();
    let mut lower = [f64::INFINITY; 2];
    let mut upper = [f64::NEG_INFINITY; 2];
    for r in &runs {
        for c in 0..2 {
            lower[c] = lower[c].min(r.post_min[c]);
            upper[c] = upper[c].max(r.post_max[c]);
        }
    }
    let amps = runs.iter().map(|r| r.log_amplitude);
    let (amin, amax) = amps.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
    let amplitude_spread = if amax == 0.0 { 1.0 } else { amax / amin };
    let region_tracked = trajectories.iter().any(|t| t.region_tracked);
    Ok(PermanenceReport {
        lower,
        upper,
        region_tracked,
        all_entered: region_tracked && runs.iter().all(|r| r.entry_time.is_some()),
        violations: runs.iter().filter(|r| r.worst_margin < -INVARIANCE_TOL).count(),
        worst_margin: runs.iter().map(|r| r.worst_margin).fold(0.0, f64::min),
        amplitude_spread,
        unbounded_amplitude: runs.len() > 1 && amplitude_spread > AMPLITUDE_SPREAD_FLAG,
        runs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleChoice {
    /// Every rate at 1, clamped into the bounds.
    Unit,
    PiecewiseRandom { period: f64 },
    Sinusoidal { frequency: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub runs: usize,
    pub seed: u64,
    pub t_end: f64,
    pub step: f64,
    /// Initial states are drawn log-uniformly from `[-log_box, log_box]^2`.
    pub log_box: f64,
    pub schedule: ScheduleChoice,
    pub stride: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            runs: 20,
            seed: 0,
            t_end: 50.0,
            step: 1e-3,
            log_box: 3.0,
            schedule: ScheduleChoice::PiecewiseRandom { period: 1.0 },
            stride: 100,
        }
    }
}

/// Initial state and schedule of run `i`; depends only on the seed and `i`.
pub fn ensemble_member(sys: &VkSystem, cfg: &EnsembleConfig, i: usize) -> Result<([f64; 2], KappaSchedule)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64);
    let x0 = [
        (rng.gen_range(-1.0..=1.0) * cfg.log_box).exp(),
        (rng.gen_range(-1.0..=1.0) * cfg.log_box).exp(),
    ];
    let sched = match cfg.schedule {
        ScheduleChoice::Unit => KappaSchedule::constant(sys, vec![1.0; sys.reaction_count()])?,
        ScheduleChoice::PiecewiseRandom { period } => KappaSchedule::piecewise_random(sys, period, rng.gen())?,
        ScheduleChoice::Sinusoidal { frequency } => {
            let phases = (0..sys.reaction_count()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            KappaSchedule::sinusoidal(sys, frequency, phases)?
        }
    };
    Ok((x0, sched))
}

/// Runs are integrated in parallel and returned in run order.
pub fn run_ensemble(sys: &VkSystem, cfg: &EnsembleConfig, region: Option<&InvariantPolygon>) -> Result<Vec<Trajectory>> {
    if cfg.runs == 0 {
        return Err(Error::Invalid("an ensemble needs at least one run".into()));
    }
    let opts = SimOptions { region, stride: cfg.stride, ..SimOptions::default() };
    (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let (x0, sched) = ensemble_member(sys, cfg, i)?;
            integrate_with(sys, &sched, x0, cfg.t_end, cfg.step, &opts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use crate::system::Term;
    use crate::vec2::RatVec2;

    fn lv() -> VkSystem {
        let v = |a, b| RatVec2::ints(a, b);
        VkSystem::new(
            vec![
                Term { source: v(1, 0), reactions: vec![v(1, 0)] },
                Term { source: v(1, 1), reactions: vec![v(-1, 1)] },
                Term { source: v(0, 1), reactions: vec![v(0, -1)] },
            ],
            q(1, 2),
        )
        .unwrap()
    }

    #[test]
    fn schedules_stay_in_bounds_and_repeat() {
        let s = lv();
        let r = KappaSchedule::piecewise_random(&s, 0.5, 11).unwrap();
        let w = KappaSchedule::sinusoidal(&s, 0.3, vec![0.0, 1.0, 2.0]).unwrap();
        let c = KappaSchedule::constant(&s, vec![5.0, 1.0, 0.1]).unwrap();
        for i in 0..400 {
            let t = i as f64 * 0.037;
            for sched in [&r, &w] {
                assert!(sched.eval(t).iter().all(|k| (0.5..=2.0).contains(k)));
                assert_eq!(sched.eval(t), sched.eval(t));
            }
        }
        assert_eq!(c.eval(3.0), vec![2.0, 1.0, 0.5]);
        assert_eq!(r.eval(0.1), r.eval(0.4));
        assert_ne!(r.eval(0.1), r.eval(0.6));
        assert!(KappaSchedule::constant(&s, vec![1.0]).is_err());
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let s = lv();
        let c = KappaSchedule::constant(&s, vec![1.0; 3]).unwrap();
        let tr = integrate(&s, &c, [0.3, 4.0], 0.0, 1e-3).unwrap();
        assert_eq!(tr.states, vec![[0.3, 4.0]]);
        assert_eq!((tr.post_min, tr.post_max), ([0.3, 4.0], [0.3, 4.0]));
    }

    #[test]
    fn equilibrium_is_fixed() {
        let s = lv();
        let c = KappaSchedule::constant(&s, vec![1.0; 3]).unwrap();
        let tr = integrate(&s, &c, [1.0, 1.0], 5.0, 1e-2).unwrap();
        assert_eq!(tr.post_min, [1.0, 1.0]);
        assert_eq!(tr.post_max, [1.0, 1.0]);
    }

    #[test]
    fn classical_first_integral_drift() {
        let s = lv();
        let c = KappaSchedule::constant(&s, vec![1.0; 3]).unwrap();
        let x0 = [2.0, 0.5];
        let tr = integrate(&s, &c, x0, 10.0, 1e-3).unwrap();
        let v0 = lv_first_integral([1.0; 3], x0);
        let drift = tr.states.iter().map(|x| (lv_first_integral([1.0; 3], *x) - v0).abs()).fold(0.0, f64::max);
        assert!(drift / 10.0 < 1e-6, "drift {drift}");
        assert!(tr.halving_error < 1e-9);
    }

    #[test]
    fn bad_inputs() {
        let s = lv();
        let c = KappaSchedule::constant(&s, vec![1.0; 3]).unwrap();
        assert!(integrate(&s, &c, [0.0, 1.0], 1.0, 1e-2).is_err());
        assert!(integrate(&s, &c, [1.0, 1.0], 1.0, 0.0).is_err());
        assert!(permanence_report(&[]).is_err());
        let cfg = EnsembleConfig { runs: 0, ..EnsembleConfig::default() };
        assert!(run_ensemble(&s, &cfg, None).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let v = |a, b| RatVec2::ints(a, b);
        let s = VkSystem::new(vec![Term { source: v(2, 0), reactions: vec![v(1, 0)] }], qi(1)).unwrap();
        let c = KappaSchedule::constant(&s, vec![1.0]).unwrap();
        match integrate(&s, &c, [1.0, 1.0], 5.0, 1e-2) {
            Err(Error::Numerical(m)) => assert!(m.contains("last good state") || m.contains("representable")),
            other => panic!("expected a numerical failure, got {other:?}"),
        }
    }

    #[test]
    fn ensemble_is_deterministic() {
        let s = lv();
        let cfg = EnsembleConfig { runs: 4, seed: 5, t_end: 2.0, step: 1e-2, stride: 10, ..EnsembleConfig::default() };
        let a = run_ensemble(&s, &cfg, None).unwrap();
        let b = run_ensemble(&s, &cfg, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].times.len(), 21);
        let json = serde_json::to_string(&a[1]).unwrap();
        assert_eq!(serde_json::from_str::<Trajectory>(&json).unwrap(), a[1]);
    }
}
