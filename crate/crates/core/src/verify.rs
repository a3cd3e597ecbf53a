//! Sampling-based checks of the chronotaxicity definition for a given drive
//! schedule: a trapping disk inside the contraction region that follows the
//! attractor, forward and pullback attraction, and invariance of the tracked
//! attractor.
//!
//! Verdicts are sampling-based, not proofs. Every margin goes into the report.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contraction::{sym_eigs, JacobianField, DEFAULT_BETA};
use crate::error::{Error, Result};
use crate::integrate::{advance, rk4_span, DEFAULT_DT};
use crate::model::{CartesianState, DrivenPoincare, OscillatorParams, VectorField};
use crate::schedule::DriveSchedule;
use crate::steady_state::{attractor_track, contracting_attractor, find_fixed_points, AttractorTrack};

/// Radii tried by the automatic trapping-disk search: `0.02·2^k`.
pub const RADIUS_LADDER: [f64; 18] = ladder();

/// Position of 0.02 in [`RADIUS_LADDER`], where the radius search starts.
const LADDER_ANCHOR: usize = 10;

const fn ladder() -> [f64; 18] {
    let mut out = [0.0; 18];
    let mut k = 0;
    while k < out.len() {
        out[k] = if k < LADDER_ANCHOR {
            0.02 / (1u64 << (LADDER_ANCHOR - k)) as f64
        } else {
            0.02 * (1u64 << (k - LADDER_ANCHOR)) as f64
        };
        k += 1;
    }
    out
}

/// Largest gap between the concentric circles sampled inside a trapping disk.
pub const INTERIOR_RING_SPACING: f64 = 0.02;

/// A disk of fixed radius riding on a centre track.
#[derive(Clone, Debug, PartialEq)]
pub struct TrappingCandidate {
    pub times: Vec<f64>,
    pub centers: Vec<CartesianState>,
    pub radius: f64,
    pub boundary_samples: usize,
    /// Concentric interior circles sampled for the eigenvalue check.
    pub interior_rings: usize,
    /// Centre velocities at `times`; central differences of `centers` when absent.
    pub velocities: Option<Vec<[f64; 2]>>,
}

impl TrappingCandidate {
    pub fn new(times: Vec<f64>, centers: Vec<CartesianState>, radius: f64, boundary_samples: usize) -> Result<Self> {
        let interior_rings = Self::rings_for(radius);
        let c = Self { times, centers, radius, boundary_samples, interior_rings, velocities: None };
        c.validate()?;
        Ok(c)
    }

    /// Disk riding on a solution; its velocity is the field itself.
    pub fn from_track<F: VectorField>(
        track: &AttractorTrack,
        field: &F,
        radius: f64,
        boundary_samples: usize,
    ) -> Result<Self> {
        let v = track.times.iter().zip(&track.states).map(|(&t, &s)| field.velocity(t, s)).collect();
        Self::new(track.times.clone(), track.states.clone(), radius, boundary_samples)?.with_velocities(v)
    }

    pub fn with_velocities(mut self, v: Vec<[f64; 2]>) -> Result<Self> {
        if v.len() != self.times.len() {
            return Err(Error::invalid("one centre velocity per track sample is required"));
        }
        self.velocities = Some(v);
        Ok(self)
    }

    /// The same track with another radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        let c = Self { radius, interior_rings: Self::rings_for(radius), ..self.clone() };
        c.validate()?;
        Ok(c)
    }

    fn rings_for(radius: f64) -> usize {
        ((radius / INTERIOR_RING_SPACING).ceil() as usize).max(4)
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid(format!("trapping radius must be positive, got {}", self.radius)));
        }
        if self.boundary_samples < 64 {
            return Err(Error::invalid("at least 64 boundary samples are required"));
        }
        if self.times.len() != self.centers.len() {
            return Err(Error::invalid("centre track times and states differ in length"));
        }
        if self.times.len() < 3 {
            return Err(Error::invalid("centre track needs at least 3 samples to finite-difference"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("centre track times must increase"));
        }
        Ok(())
    }

    /// Centre and centre velocity at `t`. Without stored velocities they come
    /// from central differences, one-sided at the ends.
    fn center_at(&self, t: f64) -> Result<(CartesianState, [f64; 2])> {
        let n = self.times.len();
        if t < self.times[0] - 1e-9 || t > self.times[n - 1] + 1e-9 {
            return Err(Error::invalid(format!("time {t} is outside the centre track")));
        }
        let j = self.times.partition_point(|&s| s <= t).saturating_sub(1).min(n - 2);
        let w = ((t - self.times[j]) / (self.times[j + 1] - self.times[j])).clamp(0.0, 1.0);
        let (p, q) = (self.centers[j], self.centers[j + 1]);
        let c = CartesianState::new(p.x + w * (q.x - p.x), p.y + w * (q.y - p.y));
        if let Some(v) = &self.velocities {
            let (a, b) = (v[j], v[j + 1]);
            return Ok((c, [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]));
        }
        let i = if w < 0.5 { j } else { j + 1 };
        let (a, b) = match i {
            0 => (0, 1),
            i if i == n - 1 => (n - 2, n - 1),
            i => (i - 1, i + 1),
        };
        let h = self.times[b] - self.times[a];
        let v = [(self.centers[b].x - self.centers[a].x) / h, (self.centers[b].y - self.centers[a].y) / h];
        Ok((c, v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrappingResult {
    /// Largest symmetric-part eigenvalue over the sampled disk and times.
    pub max_lambda: f64,
    /// Largest `⟨g − v_c, n̂⟩` over boundary samples and times; trapping needs it negative.
    pub max_inward_defect: f64,
}

impl TrappingResult {
    pub fn passes(&self, beta: f64) -> bool {
        self.max_lambda <= -beta && self.max_inward_defect < 0.0
    }
}

pub fn verify_trapping<F: JacobianField>(c: &TrappingCandidate, field: &F, t_grid: &[f64]) -> Result<TrappingResult> {
    c.validate()?;
    if t_grid.is_empty() {
        return Err(Error::invalid("empty time grid"));
    }
    let per_time: Vec<Result<(f64, f64)>> = t_grid
        .par_iter()
        .map(|&t| {
            let (center, vc) = c.center_at(t)?;
            let mut max_lambda = sym_eigs(field.jacobian(t, center)).0;
            let mut max_inward = f64::NEG_INFINITY;
            let m = c.boundary_samples;
            for k in 0..m {
                let (s, co) = (TAU * k as f64 / m as f64).sin_cos();
                let x = CartesianState::new(center.x + c.radius * co, center.y + c.radius * s);
                max_lambda = max_lambda.max(sym_eigs(field.jacobian(t, x)).0);
                let g = field.velocity(t, x);
                max_inward = max_inward.max((g[0] - vc[0]) * co + (g[1] - vc[1]) * s);
            }
            let rings = c.interior_rings.max(1);
            for ring in 1..rings {
                let rho = c.radius * ring as f64 / rings as f64;
                let count = (m * ring / rings).max(8);
                for k in 0..count {
                    let (s, co) = (TAU * k as f64 / count as f64).sin_cos();
                    let x = CartesianState::new(center.x + rho * co, center.y + rho * s);
                    max_lambda = max_lambda.max(sym_eigs(field.jacobian(t, x)).0);
                }
            }
            Ok((max_lambda, max_inward))
        })
        .collect();
    let mut out = TrappingResult { max_lambda: f64::NEG_INFINITY, max_inward_defect: f64::NEG_INFINITY };
    for r in per_time {
        let (l, d) = r?;
        out.max_lambda = out.max_lambda.max(l);
        out.max_inward_defect = out.max_inward_defect.max(d);
    }
    Ok(out)
}

/// Largest ladder radius whose disk keeps `λ₁ ≤ −β` at every checked time,
/// together with its trapping result. The search starts at 0.02 and walks up
/// or down the ladder; `template` supplies the track and sampling, its radius is ignored.
pub fn auto_radius<F: JacobianField>(
    template: &TrappingCandidate,
    field: &F,
    t_grid: &[f64],
    beta: f64,
) -> Result<Option<(f64, TrappingResult)>> {
    let check = |k: usize| -> Result<Option<(f64, TrappingResult)>> {
        let rho = RADIUS_LADDER[k];
        let res = verify_trapping(&template.with_radius(rho)?, field, t_grid)?;
        Ok((res.max_lambda <= -beta).then_some((rho, res)))
    };
    let mut best = check(LADDER_ANCHOR)?;
    if best.is_some() {
        for k in LADDER_ANCHOR + 1..RADIUS_LADDER.len() {
            match check(k)? {
                Some(b) => best = Some(b),
                None => break,
            }
        }
    } else {
        for k in (0..LADDER_ANCHOR).rev() {
            best = check(k)?;
            if best.is_some() {
                break;
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractionResult {
    /// Largest pairwise distance of the forward ensemble at its final time.
    pub forward_defect: f64,
    /// Largest per-member distance between the states at `t_eval` started one and two windows back.
    pub pullback_defect: f64,
}

/// Forward: integrates every initial state from `t0` to `t0 + horizon`.
/// Pullback: starts every initial state at `t_eval − window` and
/// `t_eval − 2·window` and compares the states reached at `t_eval`.
pub fn verify_attraction<F: VectorField>(
    field: &F,
    initial: &[CartesianState],
    t0: f64,
    horizon: f64,
    t_eval: f64,
    window: f64,
    dt: f64,
) -> Result<AttractionResult> {
    if initial.len() < 2 {
        return Err(Error::invalid("attraction check needs at least 2 initial states"));
    }
    if !(horizon > 0.0 && window > 0.0) {
        return Err(Error::invalid("horizon and window must be positive"));
    }
    let finals: Vec<CartesianState> =
        initial.par_iter().map(|&x| advance(field, x, t0, t0 + horizon, dt)).collect::<Result<_>>()?;
    let mut forward_defect: f64 = 0.0;
    for (i, a) in finals.iter().enumerate() {
        for b in &finals[i + 1..] {
            forward_defect = forward_defect.max(a.distance(*b));
        }
    }
    let pullback_defect = initial
        .par_iter()
        .map(|&x| {
            let near = advance(field, x, t_eval - window, t_eval, dt)?;
            let far = advance(field, x, t_eval - 2.0 * window, t_eval, dt)?;
            Ok(near.distance(far))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(AttractionResult { forward_defect, pullback_defect })
}

/// Re-integrates from the first tracked state, with the track's own step rule,
/// through its time samples and reports the largest deviation from the track.
pub fn verify_invariance<F: VectorField>(track: &AttractorTrack, field: &F) -> f64 {
    let mut s = track.states[0];
    let mut worst: f64 = 0.0;
    for i in 1..track.times.len() {
        s = rk4_span(field, track.times[i - 1], s, track.times[i]);
        worst = worst.max(s.distance(track.states[i]));
    }
    worst
}

/// Settings of a full schedule verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub t0: f64,
    pub t1: f64,
    /// Integration step.
    pub dt: f64,
    /// Spacing of the checked times.
    pub sample_dt: f64,
    pub beta: f64,
    pub boundary_samples: usize,
    /// Fixed trapping radius; the radius ladder is searched when absent.
    pub radius: Option<f64>,
    pub ensemble_size: usize,
    /// Initial states are drawn uniformly from the disk of this radius.
    pub ensemble_radius: f64,
    pub seed: u64,
    /// Forward, pullback and invariance defects must stay below this.
    pub defect_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t1: 50.0,
            dt: DEFAULT_DT,
            sample_dt: 0.1,
            beta: DEFAULT_BETA,
            boundary_samples: 720,
            radius: None,
            ensemble_size: 8,
            ensemble_radius: 2.0,
            seed: 0,
            defect_tol: 1e-6,
        }
    }
}

impl VerifyConfig {
    fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t1 > self.t0) {
            return Err(Error::invalid("verification needs finite t0 < t1"));
        }
        for (name, v) in
            [("dt", self.dt), ("sample_dt", self.sample_dt), ("beta", self.beta), ("defect_tol", self.defect_tol)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.boundary_samples < 64 {
            return Err(Error::invalid("boundary_samples must be at least 64"));
        }
        if self.ensemble_size < 2 {
            return Err(Error::invalid("ensemble_size must be at least 2"));
        }
        Ok(())
    }

    /// `t0, t0 + sample_dt, …` up to and including `t1`.
    pub fn t_grid(&self) -> Vec<f64> {
        let n = ((self.t1 - self.t0) / self.sample_dt).round() as usize;
        let mut g: Vec<f64> = (0..=n).map(|k| self.t0 + k as f64 * self.sample_dt).filter(|&t| t < self.t1).collect();
        g.push(self.t1);
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub chronotaxic: bool,
    pub max_lambda_on_a: Option<f64>,
    pub max_inward_defect: Option<f64>,
    pub forward_defect: Option<f64>,
    pub pullback_defect: Option<f64>,
    pub invariance_defect: Option<f64>,
    pub times_checked: usize,
    pub radius: Option<f64>,
    /// Slowest contraction rate at the attractor and the pullback window derived from it.
    pub contraction_rate: Option<f64>,
    pub window: Option<f64>,
    /// Maximal runs of checked times without a contracting point attractor.
    pub offending_intervals: Vec<[f64; 2]>,
    pub failures: Vec<String>,
    pub config: VerifyConfig,
}

/// Times on `t_grid` where no stable fixed point lies inside the contraction
/// region, merged into closed intervals.
pub fn non_chronotaxic_intervals(sys: &DrivenPoincare, t_grid: &[f64], beta: f64) -> Vec<[f64; 2]> {
    let bad: Vec<bool> = t_grid.par_iter().map(|&t| contracting_attractor(&sys.frozen_at(t), beta).is_none()).collect();
    let mut out: Vec<[f64; 2]> = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &b) in bad.iter().enumerate() {
        match (b, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                out.push([t_grid[s], t_grid[i - 1]]);
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push([t_grid[s], t_grid[t_grid.len() - 1]]);
    }
    out
}

fn random_initial_states(cfg: &VerifyConfig) -> Vec<CartesianState> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.ensemble_size)
        .map(|_| {
            let r = cfg.ensemble_radius * rng.random::<f64>().sqrt();
            let a = TAU * rng.random::<f64>();
            CartesianState::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Runs every check for the schedule `d` and collects the results; stage
/// failures are recorded in the report rather than returned.
pub fn verify_schedule(d: &DriveSchedule, p: &OscillatorParams, cfg: &VerifyConfig) -> Result<VerificationReport> {
    p.validate()?;
    cfg.validate()?;
    let sys = DrivenPoincare::new(*p, d.clone());
    let t_grid = cfg.t_grid();
    let mut report = VerificationReport {
        chronotaxic: false,
        max_lambda_on_a: None,
        max_inward_defect: None,
        forward_defect: None,
        pullback_defect: None,
        invariance_defect: None,
        times_checked: t_grid.len(),
        radius: None,
        contraction_rate: None,
        window: None,
        offending_intervals: non_chronotaxic_intervals(&sys, &t_grid, cfg.beta),
        failures: Vec::new(),
        config: cfg.clone(),
    };
    let initial = random_initial_states(cfg);

    let track = if report.offending_intervals.is_empty() {
        match attractor_track(d, p, cfg.t0, cfg.t1, cfg.dt, cfg.beta) {
            Ok(tr) => Some(tr),
            Err(Error::NotChronotaxic { t }) => {
                report.offending_intervals.push([t, t]);
                None
            }
            Err(e) => {
                report.failures.push(format!("attractor track: {e}"));
                None
            }
        }
    } else {
        None
    };
    if !report.offending_intervals.is_empty() {
        report.failures.push("no contracting point attractor at some checked times".into());
    }

    // Without a track, probe disks around the frozen fixed points at t0 so the
    // report still carries trapping margins.
    let template = match &track {
        Some(tr) => TrappingCandidate::from_track(tr, &sys, RADIUS_LADDER[LADDER_ANCHOR], cfg.boundary_samples),
        None => {
            let fp = sys.frozen_at(cfg.t0);
            let points = find_fixed_points(&fp);
            let q = points.iter().find(|q| q.kind.is_stable()).or(points.last()).copied();
            let n = ((cfg.t1 - cfg.t0) / cfg.dt).round().max(2.0) as usize;
            let times: Vec<f64> = (0..=n).map(|k| cfg.t0 + (cfg.t1 - cfg.t0) * k as f64 / n as f64).collect();
            let centers = match q {
                Some(q) => times.iter().map(|&t| sys.to_lab(t, q.location)).collect(),
                None => vec![CartesianState::new(0.0, 0.0); times.len()],
            };
            TrappingCandidate::new(times, centers, RADIUS_LADDER[LADDER_ANCHOR], cfg.boundary_samples)
        }
    };

    let trapping = template.and_then(|template| match cfg.radius {
        Some(rho) => template.with_radius(rho).and_then(|c| verify_trapping(&c, &sys, &t_grid)).map(|r| Some((rho, r))),
        None => match auto_radius(&template, &sys, &t_grid, cfg.beta)? {
            Some(b) => Ok(Some(b)),
            None => {
                report.failures.push("no ladder radius keeps the disk inside the contraction region".into());
                let rho = RADIUS_LADDER[0];
                verify_trapping(&template.with_radius(rho)?, &sys, &t_grid).map(|r| Some((rho, r)))
            }
        },
    });
    let trapping_ok = match trapping {
        Ok(Some((rho, r))) => {
            report.max_lambda_on_a = Some(r.max_lambda);
            report.max_inward_defect = Some(r.max_inward_defect);
            if r.passes(cfg.beta) {
                report.radius = Some(rho);
                true
            } else {
                report.failures.push(format!(
                    "trapping disk of radius {rho} fails (max lambda {:.3e}, inward defect {:.3e})",
                    r.max_lambda, r.max_inward_defect
                ));
                false
            }
        }
        Ok(None) => false,
        Err(e) => {
            report.failures.push(format!("trapping: {e}"));
            false
        }
    };

    let window = track.as_ref().map(|t| t.window).unwrap_or(cfg.t1 - cfg.t0).max(10.0);
    report.window = Some(window);
    report.contraction_rate = track.as_ref().map(|t| t.rate);
    let horizon = (cfg.t1 - cfg.t0).max(2.0 * window);
    let attraction = verify_attraction(&sys, &initial, cfg.t0, horizon, cfg.t1, window, cfg.dt);
    let attraction_ok = match attraction {
        Ok(a) => {
            report.forward_defect = Some(a.forward_defect);
            report.pullback_defect = Some(a.pullback_defect);
            let ok = a.forward_defect < cfg.defect_tol && a.pullback_defect < cfg.defect_tol;
            if !ok {
                report.failures.push("forward or pullback defect above tolerance".into());
            }
            ok
        }
        Err(e) => {
            report.failures.push(format!("attraction: {e}"));
            false
        }
    };

    let invariance_ok = match &track {
        Some(tr) => {
            let dfc = verify_invariance(tr, &sys);
            report.invariance_defect = Some(dfc);
            if dfc >= cfg.defect_tol {
                report.failures.push("invariance defect above tolerance".into());
            }
            dfc < cfg.defect_tol
        }
        None => false,
    };

    report.chronotaxic = report.offending_intervals.is_empty() && trapping_ok && attraction_ok && invariance_ok;
    Ok(report)
}
