//! Time-frequency analysis of trajectories: analytic Morlet wavelet transform,
//! dominant-frequency ridge, and phase-slip detection in the rotating frame.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::io::{fmt_sig, write_block, BlockHeader};

/// Central frequency f₀ of the mother wavelet (cycles per unit of its argument).
pub const DEFAULT_CENTRAL_FREQ: f64 = 1.0;
pub const DEFAULT_F_MIN: f64 = 0.005;
pub const DEFAULT_F_MAX: f64 = 2.0;
pub const DEFAULT_VOICES: usize = 32;
/// Minimum record length, in cycles of the lowest analysed frequency.
pub const MIN_CYCLES: f64 = 4.0;
/// Half-width of the ψ band around the attractor phase that counts as dwelling there.
pub const DWELL_BAND: f64 = 0.5;
const RIDGE_MEDIAN_WINDOW: usize = 5;

/// Logarithmically spaced frequencies from `f_min` up to at most `f_max`.
pub fn log_freqs(f_min: f64, f_max: f64, voices_per_octave: usize) -> Result<Vec<f64>> {
    if !(f_min > 0.0 && f_max >= f_min && f_max.is_finite()) || voices_per_octave == 0 {
        return Err(Error::invalid("frequency grid needs 0 < f_min <= f_max and at least one voice"));
    }
    let n = ((f_max / f_min).log2() * voices_per_octave as f64 + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| f_min * 2f64.powf(k as f64 / voices_per_octave as f64)).collect())
}

/// Drive frequency in Hz for an angular frequency in rad per time unit.
pub fn hz(omega: f64) -> f64 {
    omega / TAU
}

/// Wavelet magnitudes on a (frequency × time) grid, frequency-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Scalogram {
    pub t0: f64,
    pub dt: f64,
    pub n_times: usize,
    pub freqs: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub wavelet_central_freq: f64,
}

impl Scalogram {
    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_times).map(|j| self.time(j)).collect()
    }

    pub fn at(&self, i_freq: usize, j_time: usize) -> f64 {
        self.magnitude[i_freq * self.n_times + j_time]
    }

    /// Magnitudes at one time, indexed by frequency.
    pub fn column(&self, j_time: usize) -> Vec<f64> {
        (0..self.freqs.len()).map(|i| self.at(i, j_time)).collect()
    }

    /// e-folding half-width of the wavelet at frequency `f`, in time units.
    pub fn coi_width(&self, f: f64) -> f64 {
        2f64.sqrt() * self.wavelet_central_freq / f
    }

    /// True when edge effects reach `(f, t_j)`.
    pub fn in_coi(&self, f: f64, j_time: usize) -> bool {
        let w = self.coi_width(f);
        let t = self.time(j_time);
        t - self.t0 < w || self.time(self.n_times - 1) - t < w
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,f,mag")?;
        for j in 0..self.n_times {
            let t = fmt_sig(self.time(j));
            for (i, f) in self.freqs.iter().enumerate() {
                writeln!(w, "{t},{},{}", fmt_sig(*f), fmt_sig(self.at(i, j)))?;
            }
        }
        Ok(())
    }

    /// Block with shape `[1, n_freqs, n_times]`.
    pub fn write_block<W: Write>(&self, w: W) -> Result<()> {
        let header = BlockHeader::new(
            "scalogram",
            vec![1, self.freqs.len(), self.n_times],
            vec!["mag".into()],
            serde_json::json!({
                "t0": self.t0,
                "dt": self.dt,
                "freqs": self.freqs,
                "wavelet_central_freq": self.wavelet_central_freq,
            }),
        );
        write_block(w, &header, &self.magnitude)
    }
}

// Fourier transform of the admissibility-corrected analytic Morlet wavelet.
fn morlet_hat(x: f64, omega_c: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (-0.5 * (x - omega_c).powi(2)).exp() - (-0.5 * omega_c * omega_c).exp() * (-0.5 * x * x).exp()
}

/// Morlet transform of a uniformly sampled real series, evaluated as a
/// spectral product on a zero-padded FFT. Magnitudes are scaled so that a
/// unit-amplitude sinusoid at `f` gives 1 at frequency `f`.
pub fn cwt(series: &[f64], t0: f64, dt: f64, freqs: &[f64], central_freq: f64) -> Result<Scalogram> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("sampling interval must be positive, got {dt}")));
    }
    if !(central_freq > 0.0 && central_freq.is_finite()) {
        return Err(Error::invalid("wavelet central frequency must be positive"));
    }
    if freqs.is_empty() || freqs.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::invalid("frequencies must be positive"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite samples"));
    }
    let f_min = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let needed = MIN_CYCLES / f_min;
    let n = series.len();
    if (n as f64) * dt < needed {
        return Err(Error::invalid(format!(
            "record of {} time units is too short for {f_min} Hz; at least {needed} time units ({} samples) are needed",
            n as f64 * dt,
            (needed / dt).ceil() as usize
        )));
    }
    let nfft = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(nfft);
    let inverse = planner.plan_fft_inverse(nfft);
    let mut spectrum: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spectrum.resize(nfft, Complex64::new(0.0, 0.0));
    forward.process(&mut spectrum);

    let omega_c = TAU * central_freq;
    let peak = morlet_hat(omega_c, omega_c);
    let d_omega = TAU / (nfft as f64 * dt);
    let rows: Vec<Vec<f64>> = freqs
        .par_iter()
        .map(|&f| {
            let s = central_freq / f;
            let mut buf: Vec<Complex64> = spectrum
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    // only non-negative frequencies survive the analytic wavelet
                    if k <= nfft / 2 {
                        x * morlet_hat(s * k as f64 * d_omega, omega_c)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            inverse.process(&mut buf);
            let scale = 2.0 / (peak * nfft as f64);
            buf[..n].iter().map(|z| z.norm() * scale).collect()
        })
        .collect();
    Ok(Scalogram {
        t0,
        dt,
        n_times: n,
        freqs: freqs.to_vec(),
        magnitude: rows.concat(),
        wavelet_central_freq: central_freq,
    })
}

/// Dominant frequency per time sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ridge {
    pub times: Vec<f64>,
    pub freqs: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Whether the ridge point lies inside the cone of influence.
    pub in_coi: Vec<bool>,
}

impl Ridge {
    /// Median ridge frequency over points outside the cone of influence
    /// (all points when none are outside).
    pub fn median_frequency(&self) -> f64 {
        let mut inside: Vec<f64> = self.freqs.iter().zip(&self.in_coi).filter(|(_, &c)| !c).map(|(f, _)| *f).collect();
        if inside.is_empty() {
            inside = self.freqs.clone();
        }
        median(&mut inside)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,f,mag,in_coi")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_sig(self.times[i]),
                fmt_sig(self.freqs[i]),
                fmt_sig(self.magnitude[i]),
                u8::from(self.in_coi[i])
            )?;
        }
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-time argmax over frequency (ties go to the previous ridge frequency),
/// smoothed by a 5-sample median filter on the frequency index.
pub fn ridge(s: &Scalogram) -> Ridge {
    let nf = s.freqs.len();
    let mut raw: Vec<usize> = Vec::with_capacity(s.n_times);
    let mut prev: Option<usize> = None;
    for j in 0..s.n_times {
        let mut best = prev.unwrap_or(0);
        for i in 0..nf {
            if s.at(i, j) > s.at(best, j) {
                best = i;
            }
        }
        raw.push(best);
        prev = Some(best);
    }
    let half = RIDGE_MEDIAN_WINDOW / 2;
    let idx: Vec<usize> = (0..s.n_times)
        .map(|j| {
            let lo = j.saturating_sub(half);
            let hi = (j + half + 1).min(s.n_times);
            let mut w: Vec<usize> = raw[lo..hi].to_vec();
            w.sort_unstable();
            w[w.len() / 2]
        })
        .collect();
    Ridge {
        times: s.times(),
        freqs: idx.iter().map(|&i| s.freqs[i]).collect(),
        magnitude: idx.iter().enumerate().map(|(j, &i)| s.at(i, j)).collect(),
        in_coi: idx.iter().enumerate().map(|(j, &i)| s.in_coi(s.freqs[i], j)).collect(),
    }
}

/// One full turn of the phase relative to the attractor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlipEvent {
    pub t_start: f64,
    pub t_end: f64,
    /// +1 when the phase advances, −1 when it falls behind.
    pub winding: i32,
}

/// Slip events in an unwrapped phase record.
///
/// The home level is the multiple of 2π nearest the initial relative phase.
/// An event starts at the last sample within [`DWELL_BAND`] of home and ends
/// when the relative phase reaches the next multiple of 2π in either
/// direction, which then becomes home.
pub fn count_slips_series(times: &[f64], psi: &[f64], attractor_psi: f64) -> Vec<SlipEvent> {
    assert_eq!(times.len(), psi.len(), "times and phases differ in length");
    let mut events = Vec::new();
    let Some(&first) = psi.first() else {
        return events;
    };
    let mut home = ((first - attractor_psi) / TAU).round();
    let mut last_home = 0usize;
    for (i, &p) in psi.iter().enumerate() {
        let rel = p - attractor_psi;
        if (rel - TAU * home).abs() < DWELL_BAND {
            last_home = i;
        }
        let winding = if rel >= TAU * (home + 1.0) {
            1
        } else if rel <= TAU * (home - 1.0) {
            -1
        } else {
            continue;
        };
        events.push(SlipEvent { t_start: times[last_home], t_end: times[i], winding });
        home += f64::from(winding);
        last_home = i;
    }
    events
}

/// Slip events of a trajectory; lab-frame runs must be converted first.
pub fn count_slips(traj: &Trajectory, attractor_psi: f64) -> Result<Vec<SlipEvent>> {
    let states = traj.rotating().ok_or_else(|| Error::invalid("slip counting needs a rotating-frame trajectory"))?;
    let psi: Vec<f64> = states.iter().map(|s| s.psi).collect();
    Ok(count_slips_series(&traj.times(), &psi, attractor_psi))
}

pub fn write_slips_json<W: Write>(events: &[SlipEvent], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, events)?;
    Ok(())
}
