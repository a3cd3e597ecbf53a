//! Fixed points of the rotating-frame flow, the attracting closed curve Γ,
//! saddle-node continuation in ε_A, and classification of the (Δω, ε_A) plane.
//!
//! Rotating-frame computations use Cartesian coordinates `(u, v) = r(cos ψ, sin ψ)`
//! so that the origin is not special.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contraction::{full_eigs, global_contraction_threshold, linspace_node, radial_sym_eigs, DEFAULT_BETA};
use crate::error::{Error, Result};
use crate::integrate::{rk4_span, rk4_step, wrap_pi, DEFAULT_DT};
use crate::io::fmt_sig;
use crate::model::{CartesianState, DrivenPoincare, FnField, FrozenParams, OscillatorParams, PolarState};
use crate::schedule::DriveSchedule;

/// Upper end of the radial root search.
pub const ROOT_SEARCH_R_MAX: f64 = 2.5;
/// Number of sign-change brackets over the radial search interval.
pub const ROOT_BRACKETS: usize = 400;
/// Fixed points closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-8;
/// Bisection tolerance on ε_A for saddle-node thresholds.
pub const SADDLE_NODE_TOL: f64 = 1e-4;

const GAMMA_DT: f64 = 1e-2;
const GAMMA_TOL: f64 = 1e-6;
const GAMMA_T_MAX: f64 = 1e4;
const GAMMA_SEED: f64 = 1e-6;
const GAMMA_SPACING: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointKind {
    StableNode,
    StableFocus,
    Saddle,
    UnstableNode,
    UnstableFocus,
}

impl FixedPointKind {
    fn from_eigs(e: [Complex64; 2]) -> Self {
        let focus = e[0].im != 0.0;
        let (hi, lo) = (e[0].re.max(e[1].re), e[0].re.min(e[1].re));
        match (focus, hi < 0.0, lo < 0.0) {
            (true, true, _) => FixedPointKind::StableFocus,
            (true, false, _) => FixedPointKind::UnstableFocus,
            (false, true, _) => FixedPointKind::StableNode,
            (false, false, true) => FixedPointKind::Saddle,
            (false, false, false) => FixedPointKind::UnstableNode,
        }
    }

    pub fn is_stable(self) -> bool {
        matches!(self, FixedPointKind::StableNode | FixedPointKind::StableFocus)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FixedPointKind::StableNode => "stable-node",
            FixedPointKind::StableFocus => "stable-focus",
            FixedPointKind::Saddle => "saddle",
            FixedPointKind::UnstableNode => "unstable-node",
            FixedPointKind::UnstableFocus => "unstable-focus",
        }
    }
}

impl std::fmt::Display for FixedPointKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    /// Rotating-frame position; ψ in (−π, π].
    pub location: PolarState,
    pub kind: FixedPointKind,
    /// Eigenvalues of the rotating-frame Jacobian, largest real part first.
    pub full_jacobian_eigs: [Complex64; 2],
    /// Largest eigenvalue of the symmetrised Jacobian at this point.
    pub lambda_max_sym: f64,
}

impl FixedPoint {
    fn at(fp: &FrozenParams, u: f64, v: f64) -> Self {
        let eigs = full_eigs(fp.rotating_jacobian(u, v));
        let r = u.hypot(v);
        Self {
            location: PolarState::new(r, v.atan2(u)),
            kind: FixedPointKind::from_eigs(eigs),
            full_jacobian_eigs: eigs,
            lambda_max_sym: radial_sym_eigs(&fp.osc, fp.eps_a, r).0,
        }
    }

    /// Rotating Cartesian coordinates `(u, v)`.
    pub fn uv(&self) -> CartesianState {
        self.location.to_cartesian()
    }

    /// True for a stable point that also sits in the contraction region.
    pub fn is_contracting_attractor(&self, beta: f64) -> bool {
        self.kind.is_stable() && self.lambda_max_sym <= -beta
    }
}

/// Rotating-frame fixed points sorted by radius.
pub fn find_fixed_points(fp: &FrozenParams) -> Vec<FixedPoint> {
    if fp.eps_a == 0.0 {
        return vec![FixedPoint::at(fp, 0.0, 0.0)];
    }
    let FrozenParams { eps_a, delta_omega, osc } = *fp;
    let OscillatorParams { eps_gamma, r_p, .. } = osc;
    let sin_of = |r: f64| (delta_omega * r / (eps_a * r_p)).clamp(-1.0, 1.0);
    let r_s = if delta_omega == 0.0 { f64::INFINITY } else { eps_a * r_p / delta_omega.abs() };
    let r_max = ROOT_SEARCH_R_MAX.min(r_s);

    let mut found: Vec<CartesianState> = Vec::new();
    for branch in [1.0, -1.0] {
        let cos_of = |r: f64| branch * (1.0 - sin_of(r).powi(2)).max(0.0).sqrt();
        let g = |r: f64| -eps_gamma * (r - r_p) * r - eps_a * (r - r_p * cos_of(r));
        let nodes: Vec<f64> = (0..=ROOT_BRACKETS)
            .map(|k| if k == 0 { r_max * 1e-12 } else { linspace_node(0.0, r_max, ROOT_BRACKETS + 1, k) })
            .collect();
        let vals: Vec<f64> = nodes.iter().map(|&r| g(r)).collect();
        for k in 0..ROOT_BRACKETS {
            let (a, b) = (nodes[k], nodes[k + 1]);
            let (ga, gb) = (vals[k], vals[k + 1]);
            let root = if ga == 0.0 {
                Some(a)
            } else if ga * gb < 0.0 {
                Some(bisect(&g, a, b, ga))
            } else if k + 1 == ROOT_BRACKETS && gb == 0.0 {
                Some(b)
            } else {
                None
            };
            if let Some(r) = root {
                let s = PolarState::new(r, sin_of(r).atan2(cos_of(r))).to_cartesian();
                found.push(newton_polish(fp, s));
            }
        }
    }

    let mut unique: Vec<CartesianState> = Vec::new();
    for s in found {
        if unique.iter().all(|q| q.distance(s) > DEDUP_TOL) {
            unique.push(s);
        }
    }
    let mut points: Vec<FixedPoint> = unique.into_iter().map(|s| FixedPoint::at(fp, s.x, s.y)).collect();
    points.sort_by(|a, b| a.location.r.total_cmp(&b.location.r));
    points
}

fn bisect<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64, mut ga: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if ga * gm < 0.0 {
            b = m;
        } else {
            a = m;
            ga = gm;
        }
    }
    0.5 * (a + b)
}

// Newton on the Cartesian rotating field; keeps the bracketed root if Newton wanders.
fn newton_polish(fp: &FrozenParams, s0: CartesianState) -> CartesianState {
    let norm = |s: CartesianState| {
        let f = fp.rotating_velocity(s.x, s.y);
        f[0].hypot(f[1])
    };
    let mut s = s0;
    let mut best = (norm(s0), s0);
    for _ in 0..20 {
        let f = fp.rotating_velocity(s.x, s.y);
        let j = fp.rotating_jacobian(s.x, s.y);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (-f[0] * j[1][1] + f[1] * j[0][1]) / det;
        let dy = (-f[1] * j[0][0] + f[0] * j[1][0]) / det;
        s = CartesianState::new(s.x + dx, s.y + dy);
        if s.distance(s0) > 1e-3 {
            break;
        }
        let n = norm(s);
        if n < best.0 {
            best = (n, s);
        }
        if n < 1e-15 {
            break;
        }
    }
    best.1
}

/// A count change along the sweep, expressed in the direction of increasing ε_A.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub eps_a: f64,
    pub count_below: usize,
    pub count_above: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationResult {
    /// Lowest ε_A where the fixed-point count rises.
    pub eps_c1: Option<f64>,
    /// Highest ε_A where the fixed-point count falls.
    pub eps_c2: Option<f64>,
    /// Global contraction threshold ε_Γ·r_p.
    pub eps_c3: f64,
    pub delta_omega: f64,
    pub transitions: Vec<Transition>,
}

/// Tracks the fixed-point count along ε_A from `eps_from` to `eps_to` in steps
/// of `step` (a downward sweep uses `eps_from > eps_to`) and refines every
/// count change by bisection.
pub fn continuation_sweep(
    delta_omega: f64,
    eps_from: f64,
    eps_to: f64,
    step: f64,
    p: &OscillatorParams,
) -> Result<BifurcationResult> {
    p.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("sweep step must be positive, got {step}")));
    }
    if !(eps_from >= 0.0 && eps_to >= 0.0 && eps_from.is_finite() && eps_to.is_finite()) {
        return Err(Error::invalid("sweep range must be finite and non-negative"));
    }
    FrozenParams::new(0.0, delta_omega, *p)?;
    // ε_A = 0 is a singular limit; sample just above it
    let floor = 1e-9 * step.max(1.0);
    let n = ((eps_to - eps_from).abs() / step).round() as usize;
    let n = n.max(1);
    let grid: Vec<f64> = (0..=n).map(|k| linspace_node(eps_from, eps_to, n + 1, k).max(floor)).collect();
    let count = |e: f64| find_fixed_points(&FrozenParams { eps_a: e, delta_omega, osc: *p }).len();
    let counts: Vec<usize> = grid.par_iter().map(|&e| count(e)).collect();

    let mut transitions = Vec::new();
    for k in 0..n {
        if counts[k] == counts[k + 1] {
            continue;
        }
        let (mut lo, mut hi, c_lo, c_hi) = if grid[k] < grid[k + 1] {
            (grid[k], grid[k + 1], counts[k], counts[k + 1])
        } else {
            (grid[k + 1], grid[k], counts[k + 1], counts[k])
        };
        while hi - lo > SADDLE_NODE_TOL {
            let mid = 0.5 * (lo + hi);
            if count(mid) == c_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        transitions.push(Transition { eps_a: 0.5 * (lo + hi), count_below: c_lo, count_above: c_hi });
    }
    transitions.sort_by(|a, b| a.eps_a.total_cmp(&b.eps_a));
    let eps_c1 = transitions.iter().find(|t| t.count_above > t.count_below).map(|t| t.eps_a);
    let eps_c2 = transitions.iter().rev().find(|t| t.count_above < t.count_below).map(|t| t.eps_a);
    Ok(BifurcationResult { eps_c1, eps_c2, eps_c3: global_contraction_threshold(p), delta_omega, transitions })
}

/// Closed curve in the rotating frame; `points` is empty when `exists` is false.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaCurve {
    pub exists: bool,
    pub points: Vec<CartesianState>,
}

impl GammaCurve {
    fn absent() -> Self {
        Self { exists: false, points: Vec::new() }
    }

    pub fn polar(&self) -> Vec<PolarState> {
        self.points.iter().map(|s| s.to_polar()).collect()
    }

    /// Net number of turns around the rotating-frame origin.
    pub fn winding_number(&self) -> i64 {
        winding(&self.points, CartesianState::new(0.0, 0.0))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,psi,u,v")?;
        for s in &self.points {
            let p = s.to_polar();
            writeln!(w, "{},{},{},{}", fmt_sig(p.r), fmt_sig(p.psi), fmt_sig(s.x), fmt_sig(s.y))?;
        }
        Ok(())
    }
}

fn winding(points: &[CartesianState], c: CartesianState) -> i64 {
    let total: f64 = points
        .windows(2)
        .map(|w| wrap_pi((w[1].y - c.y).atan2(w[1].x - c.x) - (w[0].y - c.y).atan2(w[0].x - c.x)))
        .sum();
    (total / TAU).round() as i64
}

/// Traces Γ for frozen parameters.
///
/// With a saddle and a stable point, Γ is the closure of the saddle's
/// unstable manifold; with a single unstable point it is the attracting cycle.
/// Anything else, or a curve that does not wind once around the origin, is
/// reported as absent.
pub fn trace_gamma(fp: &FrozenParams) -> Result<GammaCurve> {
    trace_gamma_with(fp, &find_fixed_points(fp))
}

fn trace_gamma_with(fp: &FrozenParams, points: &[FixedPoint]) -> Result<GammaCurve> {
    if fp.eps_a == 0.0 {
        let n = 720;
        let r_p = fp.osc.r_p;
        let pts = (0..=n)
            .map(|k| {
                let a = if k == n { 0.0 } else { TAU * k as f64 / n as f64 };
                CartesianState::new(r_p * a.cos(), r_p * a.sin())
            })
            .collect();
        return Ok(GammaCurve { exists: true, points: pts });
    }
    let saddle = points.iter().find(|q| q.kind == FixedPointKind::Saddle);
    let stable = points.iter().find(|q| q.kind.is_stable());
    let curve = match (points.len(), saddle, stable) {
        (3, Some(s), Some(n)) => manifold_closure(fp, s, n)?,
        (1, None, None) => attracting_cycle(fp, &points[0])?,
        _ => return Ok(GammaCurve::absent()),
    };
    if winding(&curve, CartesianState::new(0.0, 0.0)).abs() != 1 {
        return Ok(GammaCurve::absent());
    }
    Ok(GammaCurve { exists: true, points: curve })
}

fn rotating_field(fp: &FrozenParams) -> FnField<impl Fn(f64, CartesianState) -> [f64; 2] + Sync + '_> {
    FnField(move |_t: f64, s: CartesianState| fp.rotating_velocity(s.x, s.y))
}

fn manifold_closure(fp: &FrozenParams, saddle: &FixedPoint, node: &FixedPoint) -> Result<Vec<CartesianState>> {
    let j = fp.rotating_jacobian(saddle.uv().x, saddle.uv().y);
    let lam = saddle.full_jacobian_eigs[0].re;
    let c1 = [j[0][1], lam - j[0][0]];
    let c2 = [lam - j[1][1], j[1][0]];
    let e = if c1[0].hypot(c1[1]) >= c2[0].hypot(c2[1]) { c1 } else { c2 };
    let norm = e[0].hypot(e[1]);
    let e = [e[0] / norm, e[1] / norm];

    let mut branches = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let start = saddle.uv().axpy(sign * GAMMA_SEED, e);
        branches.push(follow_to(fp, start, node.uv())?);
    }
    let mut curve = vec![saddle.uv()];
    curve.extend(branches[0].iter().copied());
    curve.push(node.uv());
    curve.extend(branches[1].iter().rev().copied());
    curve.push(saddle.uv());
    Ok(curve)
}

// Integrates until within GAMMA_TOL of `target`, keeping points GAMMA_SPACING apart.
fn follow_to(fp: &FrozenParams, start: CartesianState, target: CartesianState) -> Result<Vec<CartesianState>> {
    let field = rotating_field(fp);
    let mut s = start;
    let mut out = vec![start];
    let steps = (GAMMA_T_MAX / GAMMA_DT) as usize;
    for _ in 0..steps {
        s = rk4_step(&field, 0.0, s, GAMMA_DT);
        if !s.is_finite() || s.radius() > 1e6 {
            return Err(Error::TraceFailure("unstable manifold escaped to infinity".into()));
        }
        if s.distance(target) < GAMMA_TOL {
            return Ok(out);
        }
        if s.distance(*out.last().expect("non-empty")) >= GAMMA_SPACING {
            out.push(s);
        }
    }
    Err(Error::TraceFailure(format!(
        "unstable manifold did not reach the stable point within {GAMMA_T_MAX} time units"
    )))
}

// Follows the flow around the unstable point until successive returns to a
// half-line through it agree to GAMMA_TOL, then records one lap.
fn attracting_cycle(fp: &FrozenParams, centre: &FixedPoint) -> Result<Vec<CartesianState>> {
    let field = rotating_field(fp);
    let c = centre.uv();
    let r_p = fp.osc.r_p;
    let mut s = CartesianState::new(r_p, 0.0);
    if s.distance(c) < 1e-3 {
        s = CartesianState::new(-r_p, 0.0);
    }
    let angle = |s: CartesianState| (s.y - c.y).atan2(s.x - c.x);
    let mut theta = 0.0;
    let mut laps = 0i64;
    let mut prev_return: Option<CartesianState> = None;
    let mut recording: Option<Vec<CartesianState>> = None;
    let steps = (GAMMA_T_MAX / GAMMA_DT) as usize;
    for _ in 0..steps {
        let next = rk4_step(&field, 0.0, s, GAMMA_DT);
        if !next.is_finite() || next.radius() > 1e6 {
            return Err(Error::TraceFailure("trajectory escaped to infinity".into()));
        }
        let dtheta = wrap_pi(angle(next) - angle(s));
        let new_theta = theta + dtheta;
        let lap = (new_theta / TAU).trunc() as i64;
        if lap != laps {
            let ret = section_crossing(fp, s, theta, TAU * lap as f64, c);
            laps = lap;
            if let Some(mut rec) = recording.take() {
                rec.push(ret);
                if rec[0].distance(ret) < GAMMA_TOL {
                    let last = rec.len() - 1;
                    rec[last] = rec[0];
                    return Ok(rec);
                }
                recording = Some(vec![ret]);
            } else if let Some(prev) = prev_return {
                if prev.distance(ret) < GAMMA_TOL {
                    recording = Some(vec![ret]);
                }
            }
            prev_return = Some(ret);
        }
        if let Some(rec) = recording.as_mut() {
            if next.distance(*rec.last().expect("non-empty")) >= GAMMA_SPACING {
                rec.push(next);
            }
        }
        s = next;
        theta = new_theta;
    }
    Err(Error::TraceFailure(format!("no closed orbit found within {GAMMA_T_MAX} time units")))
}

// Bisects on the step length for the sub-step at which the unwrapped angle
// about `c` reaches `target`.
fn section_crossing(
    fp: &FrozenParams,
    s: CartesianState,
    theta: f64,
    target: f64,
    c: CartesianState,
) -> CartesianState {
    let field = rotating_field(fp);
    let angle = |q: CartesianState| (q.y - c.y).atan2(q.x - c.x);
    let dir = (target - theta).signum();
    let reached = |h: f64| {
        let q = rk4_step(&field, 0.0, s, h);
        (theta + wrap_pi(angle(q) - angle(s)) - target) * dir >= 0.0
    };
    let (mut lo, mut hi) = (0.0, GAMMA_DT);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if reached(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    rk4_step(&field, 0.0, s, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChronotaxicClass {
    #[serde(rename = "not-chronotaxic")]
    NotChronotaxic,
    #[serde(rename = "type-I")]
    TypeI,
    #[serde(rename = "type-II")]
    TypeII,
    #[serde(rename = "type-III")]
    TypeIII,
    #[serde(rename = "approx-gamma")]
    ApproxGamma,
    #[serde(rename = "approx-no-gamma")]
    ApproxNoGamma,
}

impl ChronotaxicClass {
    pub const ALL: [ChronotaxicClass; 6] = [
        ChronotaxicClass::NotChronotaxic,
        ChronotaxicClass::TypeI,
        ChronotaxicClass::TypeII,
        ChronotaxicClass::TypeIII,
        ChronotaxicClass::ApproxGamma,
        ChronotaxicClass::ApproxNoGamma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChronotaxicClass::NotChronotaxic => "not-chronotaxic",
            ChronotaxicClass::TypeI => "type-I",
            ChronotaxicClass::TypeII => "type-II",
            ChronotaxicClass::TypeIII => "type-III",
            ChronotaxicClass::ApproxGamma => "approx-gamma",
            ChronotaxicClass::ApproxNoGamma => "approx-no-gamma",
        }
    }

    pub fn is_chronotaxic(self) -> bool {
        matches!(self, ChronotaxicClass::TypeI | ChronotaxicClass::TypeII | ChronotaxicClass::TypeIII)
    }
}

impl std::fmt::Display for ChronotaxicClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ChronotaxicClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| Error::invalid(format!("unknown class {s:?}")))
    }
}

/// Classifies with the default margin β.
pub fn classify(fp: &FrozenParams) -> Result<ChronotaxicClass> {
    classify_with(fp, DEFAULT_BETA)
}

pub fn classify_with(fp: &FrozenParams, beta: f64) -> Result<ChronotaxicClass> {
    let points = find_fixed_points(fp);
    let Some(att) =
        points.iter().filter(|q| q.kind.is_stable()).min_by(|a, b| a.lambda_max_sym.total_cmp(&b.lambda_max_sym))
    else {
        return Ok(ChronotaxicClass::NotChronotaxic);
    };
    let gamma = trace_gamma_with(fp, &points)?.exists;
    Ok(if att.lambda_max_sym <= -beta {
        if gamma {
            ChronotaxicClass::TypeI
        } else if fp.eps_a - global_contraction_threshold(&fp.osc) >= beta {
            ChronotaxicClass::TypeIII
        } else {
            ChronotaxicClass::TypeII
        }
    } else if gamma {
        ChronotaxicClass::ApproxGamma
    } else {
        ChronotaxicClass::ApproxNoGamma
    })
}

/// The stable fixed point inside the contraction region, if any.
pub fn contracting_attractor(fp: &FrozenParams, beta: f64) -> Option<FixedPoint> {
    find_fixed_points(fp)
        .into_iter()
        .filter(|q| q.is_contracting_attractor(beta))
        .min_by(|a, b| a.lambda_max_sym.total_cmp(&b.lambda_max_sym))
}

/// Node-inclusive lattice over (Δω, ε_A); `class` is row-major with Δω outer.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMap {
    pub delta_omega: Vec<f64>,
    pub eps_a: Vec<f64>,
    pub class: Vec<ChronotaxicClass>,
}

impl RegionMap {
    pub fn at(&self, i_dw: usize, j_eps: usize) -> ChronotaxicClass {
        self.class[i_dw * self.eps_a.len() + j_eps]
    }

    pub fn row(&self, i_dw: usize) -> &[ChronotaxicClass] {
        let n = self.eps_a.len();
        &self.class[i_dw * n..(i_dw + 1) * n]
    }

    pub fn nearest_delta_omega(&self, dw: f64) -> usize {
        nearest(&self.delta_omega, dw)
    }

    pub fn nearest_eps_a(&self, eps: f64) -> usize {
        nearest(&self.eps_a, eps)
    }

    pub fn labels_present(&self) -> Vec<ChronotaxicClass> {
        ChronotaxicClass::ALL.into_iter().filter(|c| self.class.contains(c)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delta_omega,eps_a,class")?;
        for (i, dw) in self.delta_omega.iter().enumerate() {
            for (j, e) in self.eps_a.iter().enumerate() {
                writeln!(w, "{},{},{}", fmt_sig(*dw), fmt_sig(*e), self.at(i, j))?;
            }
        }
        Ok(())
    }
}

fn nearest(xs: &[f64], x: f64) -> usize {
    (0..xs.len()).min_by(|&a, &b| (xs[a] - x).abs().total_cmp(&(xs[b] - x).abs())).unwrap_or(0)
}

/// Classifies every node of an `n_dw × n_eps` lattice. Cells whose
/// classification fails are logged and tagged not-chronotaxic.
pub fn region_map(
    delta_omega: (f64, f64),
    eps_a: (f64, f64),
    resolution: (usize, usize),
    p: &OscillatorParams,
    beta: f64,
) -> Result<RegionMap> {
    p.validate()?;
    let (n_dw, n_eps) = resolution;
    if n_dw == 0 || n_eps == 0 {
        return Err(Error::invalid("region map resolution must be positive"));
    }
    if eps_a.0 < 0.0 || eps_a.1 < 0.0 {
        return Err(Error::invalid("eps_a range must be non-negative"));
    }
    let dws: Vec<f64> = (0..n_dw).map(|i| linspace_node(delta_omega.0, delta_omega.1, n_dw, i)).collect();
    let eps: Vec<f64> = (0..n_eps).map(|j| linspace_node(eps_a.0, eps_a.1, n_eps, j)).collect();
    let class = (0..n_dw * n_eps)
        .into_par_iter()
        .map(|k| {
            let (dw, e) = (dws[k / n_eps], eps[k % n_eps]);
            let fp = FrozenParams { eps_a: e, delta_omega: dw, osc: *p };
            classify_with(&fp, beta).unwrap_or_else(|err| {
                log::warn!("classification failed at delta_omega={dw}, eps_a={e}: {err}");
                ChronotaxicClass::NotChronotaxic
            })
        })
        .collect();
    Ok(RegionMap { delta_omega: dws, eps_a: eps, class })
}

/// Lab-frame samples of the time-dependent point attractor.
#[derive(Clone, Debug, PartialEq)]
pub struct AttractorTrack {
    pub times: Vec<f64>,
    pub states: Vec<CartesianState>,
    /// Slowest contraction rate at the attractor over the sampled times.
    pub rate: f64,
    /// Pullback window used per segment.
    pub window: f64,
}

impl AttractorTrack {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,y")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(w, "{},{},{}", fmt_sig(*t), fmt_sig(s.x), fmt_sig(s.y))?;
        }
        Ok(())
    }
}

/// Pullback windows span this many e-folds of the slowest contraction rate.
pub const TRACK_E_FOLDS: f64 = 25.0;

/// Computes x^A(t) on `t0, t0 + dt, …, t1` by pullback integration. RK4 steps
/// never exceed [`DEFAULT_DT`]; coarser `dt` only thins the samples.
///
/// Every sampled instant must have a stable fixed point inside the contraction
/// region; otherwise the first offending time is returned as an error. The
/// interval is split into segments of one window each, and every segment is
/// obtained by integrating from the frozen fixed point one window earlier.
pub fn attractor_track(
    d: &DriveSchedule,
    p: &OscillatorParams,
    t0: f64,
    t1: f64,
    dt: f64,
    beta: f64,
) -> Result<AttractorTrack> {
    p.validate()?;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::invalid("attractor track needs finite t0 <= t1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {dt}")));
    }
    let sys = DrivenPoincare::new(*p, d.clone());
    let n = ((t1 - t0) / dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| if k == n { t1 } else { t0 + k as f64 * dt }).collect();

    let rate = if d.is_frozen() {
        let fp = sys.frozen_at(t0);
        contracting_attractor(&fp, beta).ok_or(Error::NotChronotaxic { t: t0 })?.lambda_max_sym
    } else {
        let rates: Vec<Result<f64>> = times
            .par_iter()
            .map(|&t| {
                contracting_attractor(&sys.frozen_at(t), beta)
                    .map(|a| a.lambda_max_sym)
                    .ok_or(Error::NotChronotaxic { t })
            })
            .collect();
        let mut worst = f64::NEG_INFINITY;
        for r in rates {
            worst = worst.max(r?);
        }
        worst
    };
    let rate = -rate;
    let window = (TRACK_E_FOLDS / rate).max(10.0);

    let seed_at = |t: f64| -> Result<CartesianState> {
        let fp = sys.frozen_at(t);
        let a = contracting_attractor(&fp, beta)
            .or_else(|| find_fixed_points(&fp).into_iter().find(|q| q.kind.is_stable()))
            .ok_or(Error::NotChronotaxic { t })?;
        Ok(sys.to_lab(t, a.location))
    };

    let mut states = Vec::with_capacity(times.len());
    let per_segment = ((window / dt).ceil() as usize).max(1);
    let mut k = 0;
    while k < times.len() {
        let a = times[k];
        let start = a - window;
        let mut s = crate::integrate::advance(&sys, seed_at(start)?, start, a, dt.min(DEFAULT_DT))?;
        states.push(s);
        let end = (k + per_segment).min(times.len() - 1);
        for i in k..end {
            let (ta, tb) = (times[i], times[i + 1]);
            s = rk4_span(&sys, ta, s, tb);
            if !(s.is_finite() && s.radius() <= crate::integrate::BLOW_UP_RADIUS) {
                return Err(Error::BlowUp { t: tb, norm: s.radius() });
            }
            states.push(s);
        }
        k = end + 1;
    }
    Ok(AttractorTrack { times, states, rate, window })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(eps_a: f64, dw: f64) -> FrozenParams {
        FrozenParams::new(eps_a, dw, OscillatorParams::default()).unwrap()
    }

    fn kinds(points: &[FixedPoint]) -> Vec<FixedPointKind> {
        points.iter().map(|q| q.kind).collect()
    }

    #[test]
    fn symmetric_drive_has_point_on_the_cycle() {
        for e in [0.1, 1.0, 5.0] {
            let pts = find_fixed_points(&fp(e, 0.0));
            let s = pts.iter().find(|q| q.kind.is_stable()).unwrap();
            assert!((s.location.r - 1.0).abs() < 1e-12);
            assert!(s.location.psi.abs() < 1e-12);
        }
    }

    #[test]
    fn three_points_between_the_saddle_nodes() {
        use FixedPointKind::*;
        let pts = find_fixed_points(&fp(0.5, 0.5));
        assert_eq!(pts.len(), 3);
        let k = kinds(&pts);
        assert!(k.contains(&Saddle) && k.iter().filter(|k| k.is_stable()).count() == 1);
        assert!(matches!(k[0], UnstableNode | UnstableFocus));
    }

    #[test]
    fn single_stable_point_past_the_upper_saddle_node() {
        let pts = find_fixed_points(&fp(1.7, 0.5));
        assert_eq!(pts.len(), 1);
        assert!(pts[0].kind.is_stable());
        assert!((pts[0].location.r - 0.9914).abs() < 1e-3);
    }

    #[test]
    fn uncoupled_reports_unstable_origin() {
        let pts = find_fixed_points(&fp(0.0, 0.5));
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].location.r, 0.0);
        assert!(!pts[0].kind.is_stable());
    }

    #[test]
    fn residual_and_phase_condition() {
        for (e, dw) in [(0.5, 0.5), (0.47, 0.5), (1.2, 0.5), (3.0, -1.0), (0.9, 2.0)] {
            let f = fp(e, dw);
            for q in find_fixed_points(&f) {
                let uv = q.uv();
                let v = f.rotating_velocity(uv.x, uv.y);
                assert!(v[0].abs() + v[1].abs() < 1e-10, "residual at {q:?}");
                if q.kind.is_stable() {
                    let s = dw * q.location.r / (e * 1.0);
                    assert!((q.location.psi.sin() - s).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sweep_finds_both_saddle_nodes() {
        let p = OscillatorParams::default();
        let up = continuation_sweep(0.5, 0.0, 8.0, 0.01, &p).unwrap();
        let c1 = up.eps_c1.unwrap();
        let c2 = up.eps_c2.unwrap();
        assert!((c1 - 0.467).abs() < 0.005, "{c1}");
        assert!((c2 - 1.214).abs() < 0.005, "{c2}");
        assert_eq!(up.eps_c3, 7.0);
        let down = continuation_sweep(0.5, 8.0, 0.0, 0.01, &p).unwrap();
        assert!((down.eps_c1.unwrap() - c1).abs() < 2e-4);
        assert!((down.eps_c2.unwrap() - c2).abs() < 2e-4);
    }

    #[test]
    fn symmetric_sweep_has_only_the_upper_saddle_node() {
        let r = continuation_sweep(0.0, 0.0, 8.0, 0.01, &OscillatorParams::default()).unwrap();
        assert_eq!(r.eps_c1, None);
        let exact = 21.0 - 392f64.sqrt();
        assert!((r.eps_c2.unwrap() - exact).abs() < SADDLE_NODE_TOL);
    }

    #[test]
    fn gamma_through_saddle_and_node() {
        let f = fp(0.5, 0.5);
        let g = trace_gamma(&f).unwrap();
        assert!(g.exists);
        assert_eq!(g.points.first(), g.points.last());
        assert_eq!(g.winding_number().abs(), 1);
        for q in find_fixed_points(&f)
            .iter()
            .filter(|q| q.kind != FixedPointKind::UnstableNode && q.kind != FixedPointKind::UnstableFocus)
        {
            assert!(g.points.iter().any(|s| s.distance(q.uv()) < 1e-6));
        }
        assert!(!trace_gamma(&fp(1.7, 0.5)).unwrap().exists);
    }

    #[test]
    fn gamma_is_the_cycle_below_the_lower_saddle_node() {
        let g = trace_gamma(&fp(0.3, 0.5)).unwrap();
        assert!(g.exists);
        assert!(g.points.first().unwrap().distance(*g.points.last().unwrap()) < 1e-6);
        assert_eq!(g.winding_number().abs(), 1);
        let c = trace_gamma(&fp(0.0, 1.3)).unwrap();
        assert!(c.exists && c.points.iter().all(|s| (s.radius() - 1.0).abs() < 1e-6));
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(&fp(0.3, 0.5)).unwrap(), ChronotaxicClass::NotChronotaxic);
        assert_eq!(classify(&fp(0.5, 0.5)).unwrap(), ChronotaxicClass::TypeI);
        assert_eq!(classify(&fp(1.2, 0.5)).unwrap(), ChronotaxicClass::TypeI);
        assert_eq!(classify(&fp(1.7, 0.5)).unwrap(), ChronotaxicClass::TypeII);
        assert_eq!(classify(&fp(7.2, 0.5)).unwrap(), ChronotaxicClass::TypeIII);
        for (e, dw) in [(0.3, 0.5), (0.5, 0.5), (1.7, 0.5), (7.2, 0.5), (0.8, 2.0)] {
            let f = fp(e, dw);
            assert_eq!(classify(&f).unwrap(), classify(&f.mirrored()).unwrap());
        }
    }

    #[test]
    fn type_three_has_one_stable_point() {
        for dw in [-2.0, 0.0, 0.5, 2.5] {
            let pts = find_fixed_points(&fp(7.2, dw));
            assert_eq!(pts.len(), 1);
            assert!(pts[0].kind.is_stable());
        }
    }

    #[test]
    fn constant_schedule_track_sits_on_the_fixed_point() {
        let f = fp(1.7, 0.5);
        let p = f.osc;
        let sys = f.system();
        let track = attractor_track(&sys.drive, &p, 0.0, 20.0, 1e-2, DEFAULT_BETA).unwrap();
        let q = contracting_attractor(&f, DEFAULT_BETA).unwrap();
        for (t, s) in track.times.iter().zip(&track.states) {
            assert!(s.distance(sys.to_lab(*t, q.location)) < 1e-6);
        }
    }

    #[test]
    fn track_refuses_non_chronotaxic_instants() {
        let d = DriveSchedule::constant(0.3, 0.5).unwrap();
        let err = attractor_track(&d, &OscillatorParams::default(), 0.0, 1.0, 0.1, DEFAULT_BETA).unwrap_err();
        assert!(matches!(err, Error::NotChronotaxic { t } if t == 0.0));
    }
}
