//! The driven Poincaré oscillator in the laboratory frame and in polar
//! coordinates co-rotating with the drive angle.
//!
//! Lab frame, with the drive point `(x_p, y_p) = r_p (cos α_p(t), sin α_p(t))`:
//!
//! ```text
//! ẋ = ε_Γ (r_p − √(x²+y²)) x − ω₀ y − ε_A(t) (x − x_p)
//! ẏ = ε_Γ (r_p − √(x²+y²)) y + ω₀ x − ε_A(t) (y − y_p)
//! ```
//!
//! Rotating frame, `ψ = atan2(y, x) − α_p(t)` and `Δω(t) = ω₀ − ω_p(t)`:
//!
//! ```text
//! ṙ = −ε_Γ (r − r_p) r − ε_A(t) (r − r_p cos ψ)
//! ψ̇ = Δω(t) − ε_A(t) (r_p / r) sin ψ
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{DriveSchedule, Interp, Profile, SampledProfile};

/// Guard on the 1/r in the polar phase equation.
pub const R_MIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub x: f64,
    pub y: f64,
}

impl CartesianState {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn radius(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(self, other: Self) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn to_polar(self) -> PolarState {
        to_polar(self)
    }

    /// Rotates the state by `theta` about the origin.
    pub fn rotated(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub(crate) fn axpy(self, h: f64, v: [f64; 2]) -> Self {
        Self::new(self.x + h * v[0], self.y + h * v[1])
    }
}

impl From<[f64; 2]> for CartesianState {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub r: f64,
    /// Phase in radians, unwrapped when it comes from a trajectory.
    pub psi: f64,
}

impl PolarState {
    pub const fn new(r: f64, psi: f64) -> Self {
        Self { r, psi }
    }

    pub fn to_cartesian(self) -> CartesianState {
        to_cartesian(self)
    }
}

/// The origin maps to `(r = 0, ψ = 0)`.
pub fn to_polar(s: CartesianState) -> PolarState {
    if s.x == 0.0 && s.y == 0.0 {
        return PolarState::new(0.0, 0.0);
    }
    PolarState::new(s.radius(), s.y.atan2(s.x))
}

pub fn to_cartesian(s: PolarState) -> CartesianState {
    let (sin, cos) = s.psi.sin_cos();
    CartesianState::new(s.r * cos, s.r * sin)
}

/// Static coefficients of the oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    /// Radial stiffness ε_Γ.
    pub eps_gamma: f64,
    /// Natural frequency ω₀ (rad / time).
    pub omega0: f64,
    /// Drive radius r_p.
    pub r_p: f64,
}

impl OscillatorParams {
    pub fn new(eps_gamma: f64, omega0: f64, r_p: f64) -> Result<Self> {
        let p = Self { eps_gamma, omega0, r_p };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_gamma > 0.0 && self.eps_gamma.is_finite()) {
            return Err(Error::invalid(format!("eps_gamma must be positive, got {}", self.eps_gamma)));
        }
        if !(self.r_p > 0.0 && self.r_p.is_finite()) {
            return Err(Error::invalid(format!("r_p must be positive, got {}", self.r_p)));
        }
        if !self.omega0.is_finite() {
            return Err(Error::invalid("omega0 must be finite"));
        }
        Ok(())
    }
}

impl Default for OscillatorParams {
    /// ε_Γ = 7, ω₀ = 1, r_p = 1.
    fn default() -> Self {
        Self { eps_gamma: 7.0, omega0: 1.0, r_p: 1.0 }
    }
}

/// Constant coupling and frequency mismatch `Δω = ω₀ − ω_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenParams {
    pub eps_a: f64,
    pub delta_omega: f64,
    pub osc: OscillatorParams,
}

impl FrozenParams {
    pub fn new(eps_a: f64, delta_omega: f64, osc: OscillatorParams) -> Result<Self> {
        osc.validate()?;
        if !(eps_a >= 0.0 && eps_a.is_finite()) {
            return Err(Error::invalid(format!("eps_a must be non-negative, got {eps_a}")));
        }
        if !delta_omega.is_finite() {
            return Err(Error::invalid("delta_omega must be finite"));
        }
        Ok(Self { eps_a, delta_omega, osc })
    }

    pub fn omega_p(&self) -> f64 {
        self.osc.omega0 - self.delta_omega
    }

    /// The constant drive with α_p(0) = 0 these parameters describe.
    pub fn drive(&self) -> DriveSchedule {
        DriveSchedule::constant(self.eps_a, self.omega_p()).expect("validated parameters")
    }

    pub fn system(&self) -> DrivenPoincare {
        DrivenPoincare::new(self.osc, self.drive())
    }

    /// Mirror image under (Δω, ψ) → (−Δω, −ψ).
    pub fn mirrored(&self) -> Self {
        Self { delta_omega: -self.delta_omega, ..*self }
    }

    /// Autonomous field in rotating Cartesian coordinates `(u, v) = r (cos ψ, sin ψ)`;
    /// the drive point sits at `(r_p, 0)`.
    pub fn rotating_velocity(&self, u: f64, v: f64) -> [f64; 2] {
        let OscillatorParams { eps_gamma, r_p, .. } = self.osc;
        let radial = eps_gamma * (r_p - u.hypot(v));
        [radial * u - self.delta_omega * v - self.eps_a * (u - r_p), radial * v + self.delta_omega * u - self.eps_a * v]
    }

    /// Jacobian of [`rotating_velocity`](Self::rotating_velocity). At the
    /// origin the radial term is replaced by its limit.
    pub fn rotating_jacobian(&self, u: f64, v: f64) -> [[f64; 2]; 2] {
        let OscillatorParams { eps_gamma, r_p, .. } = self.osc;
        let r = u.hypot(v);
        let a = eps_gamma * (r_p - r) - self.eps_a;
        let (uu, uv, vv) = if r > R_MIN { (u * u / r, u * v / r, v * v / r) } else { (0.0, 0.0, 0.0) };
        [
            [a - eps_gamma * uu, -eps_gamma * uv - self.delta_omega],
            [-eps_gamma * uv + self.delta_omega, a - eps_gamma * vv],
        ]
    }

    /// `(ṙ, ψ̇)` of the rotating polar form.
    pub fn polar_velocity(&self, s: PolarState) -> Result<[f64; 2]> {
        polar_velocity(s, self.osc, self.eps_a, self.delta_omega)
    }
}

fn polar_velocity(s: PolarState, p: OscillatorParams, eps_a: f64, delta_omega: f64) -> Result<[f64; 2]> {
    if !(s.r.is_finite() && s.psi.is_finite()) {
        return Err(Error::invalid("non-finite polar state"));
    }
    if s.r <= R_MIN {
        return Err(Error::Singularity { r: s.r, r_min: R_MIN });
    }
    let (sin, cos) = s.psi.sin_cos();
    let r_dot = -p.eps_gamma * (s.r - p.r_p) * s.r - eps_a * (s.r - p.r_p * cos);
    let psi_dot = delta_omega - eps_a * (p.r_p / s.r) * sin;
    Ok([r_dot, psi_dot])
}

/// A planar, possibly time-dependent vector field that the integrators can step.
pub trait VectorField: Sync {
    fn velocity(&self, t: f64, s: CartesianState) -> [f64; 2];
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn velocity(&self, t: f64, s: CartesianState) -> [f64; 2] {
        (**self).velocity(t, s)
    }
}

/// Adapts a closure into a [`VectorField`].
pub struct FnField<F>(pub F);

impl<F> VectorField for FnField<F>
where
    F: Fn(f64, CartesianState) -> [f64; 2] + Sync,
{
    fn velocity(&self, t: f64, s: CartesianState) -> [f64; 2] {
        (self.0)(t, s)
    }
}

/// The oscillator together with its drive.
#[derive(Clone, Debug, PartialEq)]
pub struct DrivenPoincare {
    pub params: OscillatorParams,
    pub drive: DriveSchedule,
}

impl DrivenPoincare {
    pub fn new(params: OscillatorParams, drive: DriveSchedule) -> Self {
        Self { params, drive }
    }

    pub fn drive_point(&self, t: f64) -> CartesianState {
        let (s, c) = self.drive.alpha_p(t).sin_cos();
        CartesianState::new(self.params.r_p * c, self.params.r_p * s)
    }

    pub fn delta_omega(&self, t: f64) -> f64 {
        self.params.omega0 - self.drive.omega_p(t)
    }

    /// Parameters frozen at time `t`.
    pub fn frozen_at(&self, t: f64) -> FrozenParams {
        FrozenParams { eps_a: self.drive.eps_a(t), delta_omega: self.delta_omega(t), osc: self.params }
    }

    pub fn to_rotating(&self, t: f64, s: CartesianState) -> PolarState {
        let p = to_polar(s);
        PolarState::new(p.r, p.psi - self.drive.alpha_p(t))
    }

    pub fn to_lab(&self, t: f64, s: PolarState) -> CartesianState {
        to_cartesian(PolarState::new(s.r, s.psi + self.drive.alpha_p(t)))
    }
}

impl VectorField for DrivenPoincare {
    #[inline]
    fn velocity(&self, t: f64, s: CartesianState) -> [f64; 2] {
        let OscillatorParams { eps_gamma, omega0, r_p } = self.params;
        let eps_a = self.drive.eps_a(t);
        let radial = eps_gamma * (r_p - s.radius());
        let mut v = [radial * s.x - omega0 * s.y, radial * s.y + omega0 * s.x];
        if eps_a != 0.0 {
            let xp = self.drive_point(t);
            v[0] -= eps_a * (s.x - xp.x);
            v[1] -= eps_a * (s.y - xp.y);
        }
        v
    }
}

/// Lab-frame velocity `(ẋ, ẏ)`.
pub fn field_lab(s: CartesianState, t: f64, p: &OscillatorParams, d: &DriveSchedule) -> Result<[f64; 2]> {
    if !s.is_finite() || !t.is_finite() {
        return Err(Error::invalid("non-finite state or time"));
    }
    let eps_a = d.eps_a(t);
    let (sin, cos) = d.alpha_p(t).sin_cos();
    let radial = p.eps_gamma * (p.r_p - s.radius());
    Ok([
        radial * s.x - p.omega0 * s.y - eps_a * (s.x - p.r_p * cos),
        radial * s.y + p.omega0 * s.x - eps_a * (s.y - p.r_p * sin),
    ])
}

/// Rotating-frame velocity `(ṙ, ψ̇)`.
pub fn field_rotating(s: PolarState, t: f64, p: &OscillatorParams, d: &DriveSchedule) -> Result<[f64; 2]> {
    if !t.is_finite() {
        return Err(Error::invalid("non-finite time"));
    }
    polar_velocity(s, *p, d.eps_a(t), p.omega0 - d.omega_p(t))
}

/// JSON form of a profile: a scalar, or `{ "t": [...], "v": [...], "interp": "linear" }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Scalar(f64),
    Samples(SamplesSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesSpec {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(default)]
    pub interp: Interp,
}

impl ProfileSpec {
    pub fn to_profile(&self) -> Result<Profile> {
        match self {
            ProfileSpec::Scalar(v) => Ok(Profile::Constant(*v)),
            ProfileSpec::Samples(s) => Ok(SampledProfile::from_times(&s.t, s.v.clone(), s.interp)?.into()),
        }
    }

    pub fn from_profile(p: &Profile) -> Self {
        match p {
            Profile::Constant(v) => ProfileSpec::Scalar(*v),
            Profile::Sampled(s) => {
                ProfileSpec::Samples(SamplesSpec { t: s.times(), v: s.values().to_vec(), interp: s.interp() })
            }
        }
    }
}

impl std::str::FromStr for ProfileSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.trim().parse::<f64>().map(ProfileSpec::Scalar).map_err(|e| format!("expected a number: {e}"))
    }
}

/// Parameter-set document: oscillator coefficients plus drive schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub eps_gamma: f64,
    pub omega0: f64,
    pub r_p: f64,
    pub eps_a: ProfileSpec,
    pub omega_p: ProfileSpec,
    #[serde(default)]
    pub alpha0: f64,
}

impl ModelConfig {
    pub fn build(&self) -> Result<DrivenPoincare> {
        let params = OscillatorParams::new(self.eps_gamma, self.omega0, self.r_p)?;
        let drive = DriveSchedule::new(self.eps_a.to_profile()?, self.omega_p.to_profile()?, self.alpha0)?;
        Ok(DrivenPoincare::new(params, drive))
    }

    pub fn from_system(sys: &DrivenPoincare) -> Self {
        Self {
            eps_gamma: sys.params.eps_gamma,
            omega0: sys.params.omega0,
            r_p: sys.params.r_p,
            eps_a: ProfileSpec::from_profile(sys.drive.eps_a_profile()),
            omega_p: ProfileSpec::from_profile(sys.drive.omega_p_profile()),
            alpha0: sys.drive.alpha0(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params(eps_gamma: f64, omega0: f64, r_p: f64) -> OscillatorParams {
        OscillatorParams::new(eps_gamma, omega0, r_p).unwrap()
    }

    #[test]
    fn lab_field_at_origin_vanishes_without_coupling() {
        let d = DriveSchedule::constant(0.0, 0.3).unwrap();
        let v = field_lab(CartesianState::new(0.0, 0.0), 12.5, &params(7.0, 1.0, 1.0), &d).unwrap();
        assert_eq!(v, [0.0, 0.0]);
    }

    #[test]
    fn lab_field_on_limit_cycle_is_tangential() {
        let d = DriveSchedule::constant(0.0, 0.5).unwrap();
        let v = field_lab(CartesianState::new(1.0, 0.0), 3.0, &params(7.0, 1.0, 1.0), &d).unwrap();
        assert_eq!(v, [0.0, 1.0]);
    }

    #[test]
    fn lab_field_coupling_vanishes_on_drive_point() {
        let d = DriveSchedule::new(0.5, 0.0, 0.0).unwrap();
        let v = field_lab(CartesianState::new(1.0, 0.0), 0.0, &params(7.0, 1.0, 1.0), &d).unwrap();
        assert_eq!(v, [0.0, 1.0]);
    }

    #[test]
    fn lab_field_rejects_non_finite() {
        let d = DriveSchedule::constant(0.5, 0.5).unwrap();
        let p = OscillatorParams::default();
        assert!(field_lab(CartesianState::new(f64::NAN, 0.0), 0.0, &p, &d).is_err());
        assert!(field_lab(CartesianState::new(0.0, 0.0), f64::INFINITY, &p, &d).is_err());
    }

    #[test]
    fn rotating_field_examples() {
        let p = params(7.0, 1.0, 1.0);
        // Δω = 0.5 on the drive point
        let d = DriveSchedule::constant(1.3, 0.5).unwrap();
        let v = field_rotating(PolarState::new(1.0, 0.0), 4.0, &p, &d).unwrap();
        assert_eq!(v, [0.0, 0.5]);

        let d0 = DriveSchedule::constant(1.3, 1.0).unwrap();
        let v = field_rotating(PolarState::new(1.0, 0.0), 4.0, &p, &d0).unwrap();
        assert_eq!(v, [0.0, 0.0]);

        let d1 = DriveSchedule::constant(1.0, 0.5).unwrap();
        let v = field_rotating(PolarState::new(0.5, FRAC_PI_2), 0.0, &p, &d1).unwrap();
        assert!((v[0] - 1.25).abs() < 1e-15);
        assert!((v[1] - (0.5 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn rotating_field_guards_the_origin() {
        let d = DriveSchedule::constant(1.0, 0.5).unwrap();
        let err = field_rotating(PolarState::new(1e-10, 0.0), 0.0, &OscillatorParams::default(), &d);
        assert!(matches!(err, Err(Error::Singularity { .. })));
    }

    #[test]
    fn polar_conversions() {
        assert_eq!(to_polar(CartesianState::new(1.0, 0.0)), PolarState::new(1.0, 0.0));
        let p = to_polar(CartesianState::new(0.0, 2.0));
        assert_eq!(p.r, 2.0);
        assert!((p.psi - FRAC_PI_2).abs() < 1e-15);
        let c = to_cartesian(PolarState::new(1.0, PI));
        assert!((c.x + 1.0).abs() < 1e-15 && c.y.abs() < 1e-15);
        assert_eq!(to_polar(CartesianState::new(0.0, 0.0)), PolarState::new(0.0, 0.0));
    }

    #[test]
    fn system_velocity_matches_free_function() {
        let sys = DrivenPoincare::new(params(7.0, 1.1, 0.8), DriveSchedule::new(0.9, 0.4, 0.3).unwrap());
        let s = CartesianState::new(0.3, -0.7);
        let a = sys.velocity(2.2, s);
        let b = field_lab(s, 2.2, &sys.params, &sys.drive).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
    }

    #[test]
    fn config_round_trip_and_strictness() {
        let json = r#"{"eps_gamma":7,"omega0":1,"r_p":1,"eps_a":{"t":[0,1,2],"v":[1.5,1.7,1.6]},"omega_p":0.5}"#;
        let cfg = ModelConfig::from_json(json).unwrap();
        let sys = cfg.build().unwrap();
        assert!((sys.drive.eps_a(0.5) - 1.6).abs() < 1e-15);
        assert_eq!(ModelConfig::from_system(&sys), cfg);
        let bad = r#"{"eps_gamma":7,"omega0":1,"r_p":1,"eps_a":1,"omega_p":0.5,"extra":1}"#;
        assert!(ModelConfig::from_json(bad).is_err());
        let neg = r#"{"eps_gamma":-7,"omega0":1,"r_p":1,"eps_a":1,"omega_p":0.5}"#;
        assert!(ModelConfig::from_json(neg).unwrap().build().is_err());
    }
}
