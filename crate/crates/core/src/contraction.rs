//! Symmetrised Jacobians, their eigenvalues, and contraction maps over the
//! plane.
//!
//! A state belongs to the contraction region when the largest eigenvalue of
//! `½(J + Jᵀ)` is at most `−β`.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_sig, read_block, write_block, BlockHeader};
use crate::model::{CartesianState, DrivenPoincare, OscillatorParams, VectorField, R_MIN};
use crate::schedule::DriveSchedule;

/// Uniform negativity margin β.
pub const DEFAULT_BETA: f64 = 1e-3;

pub type Mat2 = [[f64; 2]; 2];

/// `½(J + Jᵀ)`, symmetric by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetricJacobian {
    a: f64,
    b: f64,
    d: f64,
}

impl SymmetricJacobian {
    pub fn from_matrix(j: Mat2) -> Self {
        Self { a: j[0][0], b: 0.5 * (j[0][1] + j[1][0]), d: j[1][1] }
    }

    pub fn matrix(&self) -> Mat2 {
        [[self.a, self.b], [self.b, self.d]]
    }

    /// `(λ₁, λ₂)` with `λ₁ ≥ λ₂`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a + self.d);
        let rad = (0.5 * (self.a - self.d)).hypot(self.b);
        (mean + rad, mean - rad)
    }
}

/// Eigenvalues of the symmetric part of `j`, largest first.
pub fn sym_eigs(j: Mat2) -> (f64, f64) {
    SymmetricJacobian::from_matrix(j).eigenvalues()
}

/// Eigenvalues of `j` itself, ordered by decreasing real part.
pub fn full_eigs(j: Mat2) -> [Complex64; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = 0.25 * tr * tr - det;
    let half = 0.5 * tr;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = if half >= 0.0 { half + s } else { half - s };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(half, s), Complex64::new(half, -s)]
    }
}

/// Lab-frame Jacobian of the driven oscillator.
pub fn jacobian_analytic(s: CartesianState, t: f64, p: &OscillatorParams, d: &DriveSchedule) -> Result<Mat2> {
    let r = s.radius();
    if !r.is_finite() || !t.is_finite() {
        return Err(Error::invalid("non-finite state or time"));
    }
    if r <= R_MIN {
        return Err(Error::Singularity { r, r_min: R_MIN });
    }
    Ok(lab_jacobian(s, p, d.eps_a(t)))
}

// Continuous at the origin: the x²/r-type terms vanish there.
fn lab_jacobian(s: CartesianState, p: &OscillatorParams, eps_a: f64) -> Mat2 {
    let r = s.radius();
    let diag = p.eps_gamma * (p.r_p - r) - eps_a;
    let (xx, xy, yy) = if r > R_MIN { (s.x * s.x / r, s.x * s.y / r, s.y * s.y / r) } else { (0.0, 0.0, 0.0) };
    [[diag - p.eps_gamma * xx, -p.eps_gamma * xy - p.omega0], [-p.eps_gamma * xy + p.omega0, diag - p.eps_gamma * yy]]
}

/// Symmetric-part eigenvalues at radius `r`, in closed form:
/// `ε_Γ(r_p − r) − ε_A` and `ε_Γ(r_p − 2r) − ε_A`.
pub fn radial_sym_eigs(p: &OscillatorParams, eps_a: f64, r: f64) -> (f64, f64) {
    let l1 = p.eps_gamma * (p.r_p - r) - eps_a;
    (l1, l1 - p.eps_gamma * r)
}

/// Smallest ε_A for which the whole plane contracts: `ε_Γ·r_p`.
pub fn global_contraction_threshold(p: &OscillatorParams) -> f64 {
    p.eps_gamma * p.r_p
}

/// A vector field with a Jacobian defined everywhere on the plane.
pub trait JacobianField: VectorField {
    fn jacobian(&self, t: f64, s: CartesianState) -> Mat2;
}

impl JacobianField for DrivenPoincare {
    fn jacobian(&self, t: f64, s: CartesianState) -> Mat2 {
        lab_jacobian(s, &self.params, self.drive.eps_a(t))
    }
}

impl<F: JacobianField + ?Sized> JacobianField for &F {
    fn jacobian(&self, t: f64, s: CartesianState) -> Mat2 {
        (**self).jacobian(t, s)
    }
}

/// `ẋ = A x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearField(pub Mat2);

impl LinearField {
    /// `ẋ = −4x + 4.75y, ẏ = −0.2y`: stable, yet not contracting everywhere.
    pub const TRANSIENT_GROWTH: LinearField = LinearField([[-4.0, 4.75], [0.0, -0.2]]);
    /// `ẋ = −4x + 3.125y, ẏ = −1.5y`: contracting everywhere.
    pub const CONTRACTING: LinearField = LinearField([[-4.0, 3.125], [0.0, -1.5]]);
}

impl VectorField for LinearField {
    fn velocity(&self, _t: f64, s: CartesianState) -> [f64; 2] {
        let a = self.0;
        [a[0][0] * s.x + a[0][1] * s.y, a[1][0] * s.x + a[1][1] * s.y]
    }
}

impl JacobianField for LinearField {
    fn jacobian(&self, _t: f64, _s: CartesianState) -> Mat2 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContractionClass {
    BothNegative,
    OneNegative,
    NoneNegative,
}

impl ContractionClass {
    pub fn from_eigs(l1: f64, l2: f64, beta: f64) -> Self {
        if l1 <= -beta {
            ContractionClass::BothNegative
        } else if l2 <= -beta {
            ContractionClass::OneNegative
        } else {
            ContractionClass::NoneNegative
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ContractionClass::BothNegative => "both-negative",
            ContractionClass::OneNegative => "one-negative",
            ContractionClass::NoneNegative => "none-negative",
        }
    }

    fn code(self) -> f64 {
        match self {
            ContractionClass::BothNegative => 0.0,
            ContractionClass::OneNegative => 1.0,
            ContractionClass::NoneNegative => 2.0,
        }
    }

    fn from_code(c: f64) -> Option<Self> {
        match c as i64 {
            0 => Some(ContractionClass::BothNegative),
            1 => Some(ContractionClass::OneNegative),
            2 => Some(ContractionClass::NoneNegative),
            _ => None,
        }
    }
}

impl std::fmt::Display for ContractionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Node-inclusive rectangular lattice; cell `(i, j)` sits at `(x_i, y_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self::square(2.5, 500)
    }
}

impl Grid {
    pub fn new(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let g = Self { x_min: x.0, x_max: x.1, y_min: y.0, y_max: y.1, nx, ny };
        g.validate()?;
        Ok(g)
    }

    /// `[−half, half]²` with `n` nodes per axis.
    pub fn square(half: f64, n: usize) -> Self {
        Self { x_min: -half, x_max: half, y_min: -half, y_max: half, nx: n, ny: n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 nodes per axis, got {}x{}", self.nx, self.ny)));
        }
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !ok || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::invalid("grid bounds must be finite and increasing"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        linspace_node(self.x_min, self.x_max, self.nx, i)
    }

    pub fn y(&self, j: usize) -> f64 {
        linspace_node(self.y_min, self.y_max, self.ny, j)
    }

    /// Row-major: `y` outer, `x` inner.
    pub fn point(&self, k: usize) -> CartesianState {
        CartesianState::new(self.x(k % self.nx), self.y(k / self.nx))
    }

    pub fn spacing(&self) -> (f64, f64) {
        ((self.x_max - self.x_min) / (self.nx - 1) as f64, (self.y_max - self.y_min) / (self.ny - 1) as f64)
    }
}

pub(crate) fn linspace_node(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n <= 1 {
        return lo;
    }
    if i + 1 == n {
        return hi;
    }
    lo + (hi - lo) * (i as f64 / (n - 1) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionMap {
    pub grid: Grid,
    pub t: f64,
    pub beta: f64,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub class: Vec<ContractionClass>,
}

/// Evaluates the symmetric-part eigenvalues on every node of `grid` at time `t`.
pub fn contraction_map<F: JacobianField>(field: &F, grid: Grid, t: f64, beta: f64) -> Result<ContractionMap> {
    grid.validate()?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let eigs: Vec<(f64, f64)> =
        (0..grid.len()).into_par_iter().map(|k| sym_eigs(field.jacobian(t, grid.point(k)))).collect();
    let class = eigs.iter().map(|&(l1, l2)| ContractionClass::from_eigs(l1, l2, beta)).collect();
    let (lambda1, lambda2) = eigs.into_iter().unzip();
    Ok(ContractionMap { grid, t, beta, lambda1, lambda2, class })
}

impl ContractionMap {
    pub fn count(&self, class: ContractionClass) -> usize {
        self.class.iter().filter(|&&c| c == class).count()
    }

    /// Fraction of nodes inside the contraction region.
    pub fn contracting_fraction(&self) -> f64 {
        self.count(ContractionClass::BothNegative) as f64 / self.class.len() as f64
    }

    /// Class of the node nearest to `s`, or `None` outside the grid.
    pub fn class_at(&self, s: CartesianState) -> Option<ContractionClass> {
        let g = &self.grid;
        if s.x < g.x_min || s.x > g.x_max || s.y < g.y_min || s.y > g.y_max {
            return None;
        }
        let (hx, hy) = g.spacing();
        let i = (((s.x - g.x_min) / hx).round() as usize).min(g.nx - 1);
        let j = (((s.y - g.y_min) / hy).round() as usize).min(g.ny - 1);
        Some(self.class[j * g.nx + i])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,lambda1,lambda2,class")?;
        for k in 0..self.grid.len() {
            let s = self.grid.point(k);
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_sig(s.x),
                fmt_sig(s.y),
                fmt_sig(self.lambda1[k]),
                fmt_sig(self.lambda2[k]),
                self.class[k]
            )?;
        }
        Ok(())
    }

    /// Block with shape `[3, ny, nx]`: λ₁, λ₂ and class code (0 both-, 1 one-, 2 none-negative).
    pub fn write_block<W: Write>(&self, w: W) -> Result<()> {
        let g = self.grid;
        let header = BlockHeader::new(
            "contraction_map",
            vec![3, g.ny, g.nx],
            vec!["lambda1".into(), "lambda2".into(), "class".into()],
            serde_json::json!({ "grid": g, "t": self.t, "beta": self.beta }),
        );
        let mut data = Vec::with_capacity(3 * g.len());
        data.extend_from_slice(&self.lambda1);
        data.extend_from_slice(&self.lambda2);
        data.extend(self.class.iter().map(|c| c.code()));
        write_block(w, &header, &data)
    }

    pub fn read_block<R: BufRead>(r: R) -> Result<Self> {
        let (header, data) = read_block(r)?;
        if header.kind != "contraction_map" {
            return Err(Error::invalid(format!("expected a contraction_map block, got {}", header.kind)));
        }
        let meta = &header.meta;
        let grid: Grid = serde_json::from_value(meta["grid"].clone())?;
        grid.validate()?;
        if header.shape != [3, grid.ny, grid.nx] {
            return Err(Error::invalid("contraction_map block shape does not match its grid"));
        }
        let t = meta["t"].as_f64().ok_or_else(|| Error::invalid("missing t"))?;
        let beta = meta["beta"].as_f64().ok_or_else(|| Error::invalid("missing beta"))?;
        let n = grid.len();
        let class = data[2 * n..]
            .iter()
            .map(|&c| ContractionClass::from_code(c).ok_or_else(|| Error::invalid(format!("bad class code {c}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, t, beta, lambda1: data[..n].to_vec(), lambda2: data[n..2 * n].to_vec(), class })
    }
}
