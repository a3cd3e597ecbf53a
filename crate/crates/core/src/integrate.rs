//! Fixed-step time stepping: classical RK4 for the deterministic flow,
//! Euler–Maruyama for additive white noise, plus pullback and co-cycle
//! utilities built on the same step sequence.
//!
//! Step times are always `t0 + k·dt` (never accumulated), and a run that does
//! not land on `t1` takes one shorter final step so the last state is at `t1`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::model::{CartesianState, PolarState, VectorField};
use crate::schedule::DriveSchedule;

/// Any state farther than this from the origin aborts the run.
pub const BLOW_UP_RADIUS: f64 = 1e6;

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    Rotating,
}

#[derive(Clone, Debug, PartialEq)]
pub enum States {
    Lab(Vec<CartesianState>),
    Rotating(Vec<PolarState>),
}

impl std::str::FromStr for Frame {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lab" => Ok(Frame::Lab),
            "rotating" => Ok(Frame::Rotating),
            _ => Err(format!("unknown frame {s:?}, expected lab or rotating")),
        }
    }
}

impl States {
    fn len(&self) -> usize {
        match self {
            States::Lab(v) => v.len(),
            States::Rotating(v) => v.len(),
        }
    }
}

/// Time-stamped states of one run. Samples are `dt` apart except possibly the
/// last one, which sits at `t_end`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub states: States,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame(&self) -> Frame {
        match self.states {
            States::Lab(_) => Frame::Lab,
            States::Rotating(_) => Frame::Rotating,
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.len() {
            self.t_end
        } else {
            self.t0 + i as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn lab(&self) -> Option<&[CartesianState]> {
        match &self.states {
            States::Lab(v) => Some(v),
            States::Rotating(_) => None,
        }
    }

    pub fn rotating(&self) -> Option<&[PolarState]> {
        match &self.states {
            States::Rotating(v) => Some(v),
            States::Lab(_) => None,
        }
    }

    /// Re-expresses a lab-frame run in polar coordinates relative to the drive
    /// angle, with ψ unwrapped along the run.
    pub fn to_rotating(&self, drive: &DriveSchedule) -> Trajectory {
        let states = match &self.states {
            States::Rotating(v) => v.clone(),
            States::Lab(v) => {
                let mut out: Vec<PolarState> = Vec::with_capacity(v.len());
                for (i, s) in v.iter().enumerate() {
                    let raw = s.y.atan2(s.x) - drive.alpha_p(self.time(i));
                    let psi = match out.last() {
                        None => raw,
                        Some(prev) => prev.psi + wrap_pi(raw - prev.psi),
                    };
                    out.push(PolarState::new(s.radius(), psi));
                }
                out
            }
        };
        Trajectory { states: States::Rotating(states), ..*self }
    }

    /// Keeps every `stride`-th sample (the first one included).
    pub fn subsample(&self, stride: usize) -> Trajectory {
        assert!(stride > 0, "stride must be positive");
        let keep: Vec<usize> = (0..self.len()).step_by(stride).collect();
        let last = *keep.last().expect("non-empty trajectory");
        let t_end = self.time(last);
        let states = match &self.states {
            States::Lab(v) => States::Lab(keep.iter().map(|&i| v[i]).collect()),
            States::Rotating(v) => States::Rotating(keep.iter().map(|&i| v[i]).collect()),
        };
        Trajectory { t0: self.t0, dt: self.dt * stride as f64, t_end, states }
    }

    /// Lab-frame x component (or r for rotating runs).
    pub fn first_component(&self) -> Vec<f64> {
        match &self.states {
            States::Lab(v) => v.iter().map(|s| s.x).collect(),
            States::Rotating(v) => v.iter().map(|s| s.r).collect(),
        }
    }

    /// CSV with header `t,x,y` or `t,r,psi`, 15 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match &self.states {
            States::Lab(v) => {
                writeln!(w, "t,x,y")?;
                for (i, s) in v.iter().enumerate() {
                    writeln!(w, "{},{},{}", fmt_sig(self.time(i)), fmt_sig(s.x), fmt_sig(s.y))?;
                }
            }
            States::Rotating(v) => {
                writeln!(w, "t,r,psi")?;
                for (i, s) in v.iter().enumerate() {
                    writeln!(w, "{},{},{}", fmt_sig(self.time(i)), fmt_sig(s.r), fmt_sig(s.psi))?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn wrap_pi(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Noise intensity σ and seed. `stream` selects an independent ChaCha8
/// stream for the same seed (ensembles use the member index).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("noise intensity must be non-negative, got {sigma}")));
        }
        Ok(Self { sigma, seed, stream: 0 })
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// ChaCha8 seeded from `seed` (via `SeedableRng::seed_from_u64`) on stream `stream`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Number of full steps and the length of a trailing partial step.
fn step_plan(t0: f64, t1: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::invalid("integration bounds must be finite"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {dt}")));
    }
    if t1 < t0 {
        return Err(Error::invalid(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    let span = t1 - t0;
    let n = (span / dt).round();
    if (span - n * dt).abs() <= 1e-9 * dt {
        return Ok((n as usize, 0.0));
    }
    let n = (span / dt).floor();
    Ok((n as usize, span - n * dt))
}

fn check(t: f64, s: CartesianState) -> Result<CartesianState> {
    let norm = s.radius();
    if !(norm <= BLOW_UP_RADIUS) {
        return Err(Error::BlowUp { t, norm });
    }
    Ok(s)
}

#[inline]
pub(crate) fn rk4_step<F: VectorField + ?Sized>(f: &F, t: f64, s: CartesianState, h: f64) -> CartesianState {
    let k1 = f.velocity(t, s);
    let k2 = f.velocity(t + 0.5 * h, s.axpy(0.5 * h, k1));
    let k3 = f.velocity(t + 0.5 * h, s.axpy(0.5 * h, k2));
    let k4 = f.velocity(t + h, s.axpy(h, k3));
    CartesianState::new(
        s.x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s.y + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    )
}

/// Advances from `t0` to `t1` in equal RK4 sub-steps no longer than [`DEFAULT_DT`].
pub(crate) fn rk4_span<F: VectorField + ?Sized>(f: &F, t0: f64, s: CartesianState, t1: f64) -> CartesianState {
    let m = ((t1 - t0) / DEFAULT_DT - 1e-9).ceil().max(1.0) as usize;
    let h = (t1 - t0) / m as f64;
    (0..m).fold(s, |s, k| rk4_step(f, t0 + k as f64 * h, s, h))
}

/// Runs the RK4 step sequence from `t0` to `t1`, handing each new state to `sink`.
fn run_rk4<F, S>(f: &F, x0: CartesianState, t0: f64, t1: f64, dt: f64, mut sink: S) -> Result<CartesianState>
where
    F: VectorField + ?Sized,
    S: FnMut(CartesianState),
{
    let (n, rem) = step_plan(t0, t1, dt)?;
    let mut s = check(t0, x0)?;
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        s = check(t + dt, rk4_step(f, t, s, dt))?;
        sink(s);
    }
    if rem > 0.0 {
        s = check(t1, rk4_step(f, t0 + n as f64 * dt, s, rem))?;
        sink(s);
    }
    Ok(s)
}

/// Classical fourth-order fixed-step integration from `(t0, x0)` to `t1`.
pub fn integrate_det<F: VectorField + ?Sized>(
    f: &F,
    x0: CartesianState,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !x0.is_finite() {
        return Err(Error::invalid("initial state must be finite"));
    }
    let (n, _) = step_plan(t0, t1, dt)?;
    let mut states = Vec::with_capacity(n + 2);
    states.push(x0);
    run_rk4(f, x0, t0, t1, dt, |s| states.push(s))?;
    Ok(Trajectory { t0, dt, t_end: t1, states: States::Lab(states) })
}

/// Final state of [`integrate_det`] without storing the path.
pub fn advance<F: VectorField + ?Sized>(
    f: &F,
    x0: CartesianState,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<CartesianState> {
    if !x0.is_finite() {
        return Err(Error::invalid("initial state must be finite"));
    }
    run_rk4(f, x0, t0, t1, dt, |_| {})
}

/// Euler–Maruyama: drift update, then `σ·√h·N(0,1)` added independently to x and y.
pub fn integrate_sde<F: VectorField + ?Sized>(
    f: &F,
    x0: CartesianState,
    t0: f64,
    t1: f64,
    dt: f64,
    noise: NoiseSpec,
) -> Result<Trajectory> {
    if !x0.is_finite() {
        return Err(Error::invalid("initial state must be finite"));
    }
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::invalid("noise intensity must be non-negative"));
    }
    let (n, rem) = step_plan(t0, t1, dt)?;
    let mut rng = noise.rng();
    let mut states = Vec::with_capacity(n + 2);
    let mut s = check(t0, x0)?;
    states.push(s);
    let mut step = |t: f64, s: CartesianState, h: f64| -> Result<CartesianState> {
        let v = f.velocity(t, s);
        let amp = noise.sigma * h.sqrt();
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        let next = CartesianState::new(s.x + h * v[0] + amp * nx, s.y + h * v[1] + amp * ny);
        check(t + h, next)
    };
    for k in 0..n {
        s = step(t0 + k as f64 * dt, s, dt)?;
        states.push(s);
    }
    if rem > 0.0 {
        s = step(t0 + n as f64 * dt, s, rem)?;
        states.push(s);
    }
    Ok(Trajectory { t0, dt, t_end: t1, states: States::Lab(states) })
}

/// Runs `runs` stochastic trajectories from the same initial state, member `i`
/// on RNG stream `i`. Output order does not depend on scheduling.
pub fn ensemble_sde<F: VectorField + ?Sized>(
    f: &F,
    x0: CartesianState,
    t0: f64,
    t1: f64,
    dt: f64,
    noise: NoiseSpec,
    runs: usize,
) -> Result<Vec<Trajectory>> {
    (0..runs).into_par_iter().map(|i| integrate_sde(f, x0, t0, t1, dt, noise.with_stream(i as u64))).collect()
}

/// States at `t_eval` reached from `x0` started at each of the (decreasing) start times.
pub fn pullback<F: VectorField + ?Sized>(
    f: &F,
    x0: CartesianState,
    t_starts: &[f64],
    t_eval: f64,
    dt: f64,
) -> Result<Vec<CartesianState>> {
    if t_starts.iter().any(|&t| !(t < t_eval)) {
        return Err(Error::invalid("every pullback start time must precede t_eval"));
    }
    if t_starts.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("pullback start times must be strictly decreasing"));
    }
    t_starts.par_iter().map(|&ts| advance(f, x0, ts, t_eval, dt)).collect()
}

/// `|x(t2, t0, x0) − x(t2, t1, x(t1, t0, x0))|`.
pub fn cocycle_check<F: VectorField + ?Sized>(
    f: &F,
    x0: CartesianState,
    t0: f64,
    t1: f64,
    t2: f64,
    dt: f64,
) -> Result<f64> {
    if !(t0 <= t1 && t1 <= t2) {
        return Err(Error::invalid("co-cycle check needs t0 <= t1 <= t2"));
    }
    let direct = advance(f, x0, t0, t2, dt)?;
    let mid = advance(f, x0, t0, t1, dt)?;
    let split = advance(f, mid, t1, t2, dt)?;
    Ok(direct.distance(split))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DrivenPoincare, FnField, FrozenParams, OscillatorParams};
    use std::f64::consts::TAU;

    fn uncoupled() -> DrivenPoincare {
        DrivenPoincare::new(OscillatorParams::default(), DriveSchedule::constant(0.0, 0.5).unwrap())
    }

    #[test]
    fn limit_cycle_is_periodic() {
        let sys = uncoupled();
        let x0 = CartesianState::new(1.0, 0.0);
        let traj = integrate_det(&sys, x0, 0.0, TAU, 1e-3).unwrap();
        let end = *traj.lab().unwrap().last().unwrap();
        assert!(end.distance(x0) < 1e-6, "{end:?}");
        assert_eq!(traj.t_end, TAU);
    }

    #[test]
    fn radius_relaxes_onto_limit_cycle() {
        let sys = uncoupled();
        let end = advance(&sys, CartesianState::new(2.0, 0.0), 0.0, 20.0, 1e-3).unwrap();
        assert!((end.radius() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn row_count_and_partial_step() {
        let sys = uncoupled();
        let traj = integrate_det(&sys, CartesianState::new(1.0, 0.0), 0.0, 1.0, 0.1).unwrap();
        assert_eq!(traj.len(), 11);
        let traj = integrate_det(&sys, CartesianState::new(1.0, 0.0), 0.0, 1.05, 0.1).unwrap();
        assert_eq!(traj.len(), 12);
        assert_eq!(traj.time(11), 1.05);
        assert!((traj.time(10) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chronotaxic_trajectories_merge() {
        let sys = FrozenParams::new(1.7, 0.5, OscillatorParams::default()).unwrap().system();
        let run = |dt| {
            let a = advance(&sys, CartesianState::new(1.5, 0.3), 0.0, 50.0, dt).unwrap();
            let b = advance(&sys, CartesianState::new(-0.4, -1.2), 0.0, 50.0, dt).unwrap();
            a.distance(b)
        };
        assert!(run(1e-3) < 1e-6);
        assert!(run(5e-4) < 1e-6);
    }

    #[test]
    fn blow_up_is_reported() {
        let f = FnField(|_t, s: CartesianState| [s.x * 10.0, s.y * 10.0]);
        let err = integrate_det(&f, CartesianState::new(1.0, 1.0), 0.0, 10.0, 1e-2).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }

    #[test]
    fn bad_bounds_are_rejected() {
        let sys = uncoupled();
        assert!(integrate_det(&sys, CartesianState::new(1.0, 0.0), 1.0, 0.0, 1e-3).is_err());
        assert!(integrate_det(&sys, CartesianState::new(1.0, 0.0), 0.0, 1.0, 0.0).is_err());
        assert!(pullback(&sys, CartesianState::new(1.0, 0.0), &[-1.0, -0.5], 0.0, 1e-3).is_err());
        assert!(pullback(&sys, CartesianState::new(1.0, 0.0), &[0.5], 0.0, 1e-3).is_err());
    }

    #[test]
    fn zero_noise_is_euler() {
        let sys = FrozenParams::new(1.2, 0.5, OscillatorParams::default()).unwrap().system();
        let x0 = CartesianState::new(0.8, 0.2);
        let em = integrate_sde(&sys, x0, 0.0, 5.0, 1e-3, NoiseSpec::new(0.0, 1).unwrap()).unwrap();
        let mut s = x0;
        for k in 0..5000 {
            let v = sys.velocity(k as f64 * 1e-3, s);
            s = s.axpy(1e-3, v);
        }
        assert_eq!(*em.lab().unwrap().last().unwrap(), s);
        let rk = advance(&sys, x0, 0.0, 5.0, 1e-3).unwrap();
        assert!(rk.distance(s) < 1e-2);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let sys = FrozenParams::new(0.47, 0.5, OscillatorParams::default()).unwrap().system();
        let noise = NoiseSpec::new(0.3, 42).unwrap();
        let a = integrate_sde(&sys, CartesianState::new(1.0, 0.0), 0.0, 10.0, 1e-3, noise).unwrap();
        let b = integrate_sde(&sys, CartesianState::new(1.0, 0.0), 0.0, 10.0, 1e-3, noise).unwrap();
        assert_eq!(a, b);
        let c = integrate_sde(&sys, CartesianState::new(1.0, 0.0), 0.0, 10.0, 1e-3, noise.with_stream(1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cocycle_with_coincident_split_is_exact() {
        let sys = FrozenParams::new(1.2, 0.5, OscillatorParams::default()).unwrap().system();
        let d = cocycle_check(&sys, CartesianState::new(0.3, 0.9), 2.0, 2.0, 7.0, 1e-3).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn rotating_conversion_unwraps() {
        let sys = uncoupled();
        let traj = integrate_det(&sys, CartesianState::new(1.0, 0.0), 0.0, 40.0, 1e-2).unwrap();
        let rot = traj.to_rotating(&sys.drive);
        let last = rot.rotating().unwrap().last().unwrap();
        // ψ̇ = ω₀ − ω_p = 0.5
        assert!((last.psi - 20.0).abs() < 1e-6, "{}", last.psi);
    }

    #[test]
    fn wrap_pi_range() {
        for a in [-10.0, -3.5, 0.0, 3.0, 3.5, 10.0] {
            let w = wrap_pi(a);
            assert!(w > -std::f64::consts::PI - 1e-12 && w <= std::f64::consts::PI);
            assert!(((a - w) / TAU - ((a - w) / TAU).round()).abs() < 1e-12);
        }
    }
}
