//! Time-dependent drive: coupling strength ε_A(t), drive frequency ω_p(t) and
//! the accumulated drive angle α_p(t).
//!
//! A profile is either a constant or samples on a uniform grid with a
//! piecewise-constant or linear interpolation rule. Outside the sampled range
//! the profile is held at its first/last value. The antiderivative of either
//! rule is evaluated in closed form, so α_p(t) is a pure function of t and two
//! integration runs that visit the same time see the same drive angle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    /// Value `v[k]` on `[t_k, t_{k+1})`.
    Constant,
    #[default]
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledProfile {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
    interp: Interp,
    // cumulative[k] = ∫_{t0}^{t0 + k dt} v
    cumulative: Vec<f64>,
}

impl SampledProfile {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>, interp: Interp) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sampled profile needs at least one value"));
        }
        if !(dt > 0.0 && dt.is_finite()) || !t0.is_finite() {
            return Err(Error::invalid(format!("sample spacing must be positive, got {dt}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("profile values must be finite"));
        }
        let mut cumulative = Vec::with_capacity(values.len());
        cumulative.push(0.0);
        for k in 1..values.len() {
            let seg = match interp {
                Interp::Constant => values[k - 1] * dt,
                Interp::Linear => 0.5 * (values[k - 1] + values[k]) * dt,
            };
            cumulative.push(cumulative[k - 1] + seg);
        }
        Ok(Self { t0, dt, values, interp, cumulative })
    }

    /// Builds a profile from explicit sample times, which must be uniformly spaced.
    pub fn from_times(times: &[f64], values: Vec<f64>, interp: Interp) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid(format!("profile has {} times but {} values", times.len(), values.len())));
        }
        match times.len() {
            0 => Err(Error::invalid("sampled profile needs at least one value")),
            1 => Self::new(times[0], 1.0, values, interp),
            n => {
                let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
                for (k, &t) in times.iter().enumerate() {
                    let expected = times[0] + k as f64 * dt;
                    if (t - expected).abs() > 1e-9 * dt.abs().max(1.0) {
                        return Err(Error::invalid(format!(
                            "profile times must be uniformly spaced (t[{k}] = {t}, expected {expected})"
                        )));
                    }
                }
                Self::new(times[0], dt, values, interp)
            }
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn t_last(&self) -> f64 {
        self.t0 + (self.values.len() - 1) as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.t0 + k as f64 * self.dt).collect()
    }

    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let last = self.values.len() - 1;
        if last == 0 || t <= self.t0 || t >= self.t_last() {
            return None;
        }
        let pos = (t - self.t0) / self.dt;
        let k = (pos.floor() as usize).min(last - 1);
        Some((k, t - (self.t0 + k as f64 * self.dt)))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.locate(t) {
            None if t <= self.t0 => self.values[0],
            None => self.values[self.values.len() - 1],
            Some((k, tau)) => match self.interp {
                Interp::Constant => self.values[k],
                Interp::Linear => {
                    let w = tau / self.dt;
                    self.values[k] + w * (self.values[k + 1] - self.values[k])
                }
            },
        }
    }

    /// ∫_{t0}^{t} v(s) ds with constant extension outside the sampled range.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match self.locate(t) {
            None if t <= self.t0 => self.values[0] * (t - self.t0),
            None => {
                let last = self.values.len() - 1;
                self.cumulative[last] + self.values[last] * (t - self.t_last())
            }
            Some((k, tau)) => {
                let partial = match self.interp {
                    Interp::Constant => self.values[k] * tau,
                    Interp::Linear => {
                        let slope = (self.values[k + 1] - self.values[k]) / self.dt;
                        self.values[k] * tau + 0.5 * slope * tau * tau
                    }
                };
                self.cumulative[k] + partial
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Constant(f64),
    Sampled(SampledProfile),
}

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::Sampled(s) => s.value(t),
        }
    }

    fn antiderivative(&self, t: f64) -> f64 {
        match self {
            Profile::Constant(v) => v * t,
            Profile::Sampled(s) => s.antiderivative(t),
        }
    }

    fn sample_values(&self) -> &[f64] {
        match self {
            Profile::Constant(v) => std::slice::from_ref(v),
            Profile::Sampled(s) => s.values(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Profile::Constant(_))
    }

    pub fn min_value(&self) -> f64 {
        self.sample_values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.sample_values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl From<f64> for Profile {
    fn from(v: f64) -> Self {
        Profile::Constant(v)
    }
}

impl From<SampledProfile> for Profile {
    fn from(s: SampledProfile) -> Self {
        Profile::Sampled(s)
    }
}

/// ε_A(t), ω_p(t) and the drive angle α_p(t) = α₀ + ∫₀ᵗ ω_p(s) ds.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveSchedule {
    eps_a: Profile,
    omega_p: Profile,
    alpha0: f64,
    // antiderivative of ω_p at t = 0, so that α_p(0) = α₀ exactly
    omega_base: f64,
}

impl DriveSchedule {
    pub fn new(eps_a: impl Into<Profile>, omega_p: impl Into<Profile>, alpha0: f64) -> Result<Self> {
        let eps_a = eps_a.into();
        let omega_p = omega_p.into();
        if eps_a.sample_values().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("coupling strength eps_a must be finite and non-negative"));
        }
        if omega_p.sample_values().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("drive frequency omega_p must be finite"));
        }
        if !alpha0.is_finite() {
            return Err(Error::invalid("alpha0 must be finite"));
        }
        let omega_base = omega_p.antiderivative(0.0);
        Ok(Self { eps_a, omega_p, alpha0, omega_base })
    }

    /// Constant coupling and drive frequency.
    pub fn constant(eps_a: f64, omega_p: f64) -> Result<Self> {
        Self::new(eps_a, omega_p, 0.0)
    }

    pub fn eps_a(&self, t: f64) -> f64 {
        self.eps_a.value(t)
    }

    pub fn omega_p(&self, t: f64) -> f64 {
        self.omega_p.value(t)
    }

    pub fn alpha_p(&self, t: f64) -> f64 {
        self.alpha0 + (self.omega_p.antiderivative(t) - self.omega_base)
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn eps_a_profile(&self) -> &Profile {
        &self.eps_a
    }

    pub fn omega_p_profile(&self) -> &Profile {
        &self.omega_p
    }

    pub fn is_frozen(&self) -> bool {
        self.eps_a.is_constant() && self.omega_p.is_constant()
    }

    pub fn with_eps_a(&self, eps_a: impl Into<Profile>) -> Result<Self> {
        Self::new(eps_a, self.omega_p.clone(), self.alpha0)
    }
}
