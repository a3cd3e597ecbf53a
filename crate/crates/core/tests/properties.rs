use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chronotax::contraction::DEFAULT_BETA;
use chronotax::integrate::{integrate_det, integrate_sde, pullback, NoiseSpec};
use chronotax::model::{field_lab, field_rotating, CartesianState, FrozenParams, OscillatorParams, PolarState};
use chronotax::schedule::{DriveSchedule, Interp, SampledProfile};
use chronotax::steady_state::{classify, continuation_sweep, contracting_attractor, find_fixed_points};
use chronotax::verify::{verify_schedule, VerifyConfig};

fn osc() -> OscillatorParams {
    OscillatorParams::default()
}

fn wobbling_drive() -> DriveSchedule {
    let eps: Vec<f64> = (0..=60).map(|k| 2.0 + (0.37 * k as f64).sin()).collect();
    let omega: Vec<f64> = (0..=60).map(|k| 0.5 + 0.2 * (0.21 * k as f64).cos()).collect();
    DriveSchedule::new(
        SampledProfile::new(0.0, 1.0, eps, Interp::Linear).unwrap(),
        SampledProfile::new(0.0, 1.0, omega, Interp::Linear).unwrap(),
        0.3,
    )
    .unwrap()
}

#[test]
fn lab_field_seen_from_the_rotating_frame() {
    let p = osc();
    let d = wobbling_drive();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let r = rng.random_range(0.05..2.5);
        let th = rng.random_range(-3.0..3.0);
        let t = rng.random_range(0.0..60.0);
        let s = CartesianState::new(r * f64::cos(th), r * f64::sin(th));
        let [vx, vy] = field_lab(s, t, &p, &d).unwrap();
        let r_dot = (s.x * vx + s.y * vy) / r;
        let psi_dot = (s.x * vy - s.y * vx) / (r * r) - d.omega_p(t);
        let polar = PolarState::new(r, th - d.alpha_p(t));
        let [want_r, want_psi] = field_rotating(polar, t, &p, &d).unwrap();
        assert!((r_dot - want_r).abs() < 1e-10 && (psi_dot - want_psi).abs() < 1e-10, "t={t} r={r}");
    }
}

#[test]
fn stationary_spread_matches_the_linearised_noise() {
    // E|ξ|² of the linear SDE dξ = Jξ dt + σ dW is trace P with J P + P Jᵀ + σ² I = 0
    let fp = FrozenParams::new(1.7, 0.5, osc()).unwrap();
    let sys = fp.system();
    let q = contracting_attractor(&fp, DEFAULT_BETA).unwrap();
    let [[a, b], [c, d]] = fp.rotating_jacobian(q.uv().x, q.uv().y);
    let sigma: f64 = 0.02;
    let s2 = sigma * sigma;
    // unknowns P11, P12, P22
    let m = [[2.0 * a, 2.0 * b, 0.0], [c, a + d, b], [0.0, 2.0 * c, 2.0 * d]];
    let rhs = [-s2, 0.0, -s2];
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let solve = |k: usize| {
        let mut mk = m;
        for (row, v) in mk.iter_mut().zip(rhs) {
            row[k] = v;
        }
        det3(mk) / det3(m)
    };
    let predicted = solve(0) + solve(2);

    let x0 = sys.to_lab(0.0, q.location);
    let run = integrate_sde(&sys, x0, 0.0, 4000.0, 1e-2, NoiseSpec::new(sigma, 5).unwrap()).unwrap();
    let target = q.uv();
    let lab = run.lab().unwrap();
    let burn = 1000;
    let mean_sq = lab[burn..]
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let t = run.time(i + burn);
            s.rotated(-sys.drive.alpha_p(t)).distance(target).powi(2)
        })
        .sum::<f64>()
        / (lab.len() - burn) as f64;
    let ratio = mean_sq / predicted;
    assert!((0.85..1.15).contains(&ratio), "measured {mean_sq:e}, predicted {predicted:e}");
}

#[test]
fn pullback_states_form_a_cauchy_sequence() {
    let sys = chronotax::model::DrivenPoincare::new(osc(), wobbling_drive());
    let t_eval = 55.0;
    let starts: Vec<f64> = (1..=10).map(|k| t_eval - 5.0 * k as f64).collect();
    let ends = pullback(&sys, CartesianState::new(-1.0, 1.0), &starts, t_eval, 1e-3).unwrap();
    let gaps: Vec<f64> = ends.windows(2).map(|w| w[0].distance(w[1])).collect();
    for w in gaps.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{gaps:?}");
    }
    assert!(*gaps.last().unwrap() < 1e-9, "{gaps:?}");
}

#[test]
fn verify_agrees_with_classify_on_random_frozen_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = VerifyConfig { t1: 10.0, dt: 1e-2, sample_dt: 0.5, ensemble_size: 4, ..VerifyConfig::default() };
    let mut agree = 0;
    let mut mismatches = Vec::new();
    for _ in 0..100 {
        let dw = rng.random_range(0.0..3.0);
        let eps = rng.random_range(0.0..8.0);
        let fp = FrozenParams::new(eps, dw, osc()).unwrap();
        let by_class = classify(&fp).unwrap().is_chronotaxic();
        let report = verify_schedule(&fp.drive(), &fp.osc, &cfg).unwrap();
        if report.chronotaxic == by_class {
            agree += 1;
        } else {
            mismatches.push((dw, eps, report.failures));
        }
    }
    assert_eq!(agree, 100, "{mismatches:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uncoupled_field_commutes_with_rotation(
        r in 0.0..3.0f64, th in 0.0..TAU, rot in 0.0..TAU, t in 0.0..50.0f64, omega_p in -2.0..2.0f64,
    ) {
        let p = osc();
        let d = DriveSchedule::constant(0.0, omega_p).unwrap();
        let s = CartesianState::new(r * th.cos(), r * th.sin());
        let v = field_lab(s, t, &p, &d).unwrap();
        let rotated_v = CartesianState::new(v[0], v[1]).rotated(rot);
        let w = field_lab(s.rotated(rot), t, &p, &d).unwrap();
        prop_assert!((rotated_v.x - w[0]).abs() < 1e-12 && (rotated_v.y - w[1]).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_counts_change_in_pairs(dw in -2.5..2.5f64) {
        let res = continuation_sweep(dw, 0.0, 3.0, 0.05, &osc()).unwrap();
        for t in &res.transitions {
            prop_assert!([1, 2, 3].contains(&t.count_below) && [1, 2, 3].contains(&t.count_above));
            prop_assert_eq!(t.count_below.abs_diff(t.count_above), 2);
        }
    }

    #[test]
    fn point_count_is_one_to_three(dw in -3.0..3.0f64, eps in 0.01..8.0f64) {
        let n = find_fixed_points(&FrozenParams::new(eps, dw, osc()).unwrap()).len();
        prop_assert!((1..=3).contains(&n), "{n}");
    }

    #[test]
    fn classification_is_mirror_symmetric(dw in 0.0..3.0f64, eps in 0.0..8.0f64) {
        let fp = FrozenParams::new(eps, dw, osc()).unwrap();
        prop_assert_eq!(classify(&fp).unwrap(), classify(&fp.mirrored()).unwrap());
    }

    #[test]
    fn separations_inside_the_trapping_disk_decay(
        eps in 1.5..6.0f64, a in 0.0..TAU, b in 0.0..TAU, ra in 0.0..1.0f64, rb in 0.0..1.0f64,
    ) {
        let fp = FrozenParams::new(eps, 0.5, osc()).unwrap();
        let cfg = VerifyConfig { t1: 10.0, sample_dt: 0.5, ..VerifyConfig::default() };
        let report = verify_schedule(&fp.drive(), &fp.osc, &cfg).unwrap();
        prop_assert!(report.chronotaxic);
        let rho = report.radius.unwrap();
        let sys = fp.system();
        let c = sys.to_lab(0.0, contracting_attractor(&fp, DEFAULT_BETA).unwrap().location);
        let at = |ang: f64, frac: f64| CartesianState::new(c.x + rho * frac * ang.cos(), c.y + rho * frac * ang.sin());
        let (x, y) = (at(a, ra), at(b, rb));
        let tx = integrate_det(&sys, x, 0.0, 20.0, 1e-2).unwrap();
        let ty = integrate_det(&sys, y, 0.0, 20.0, 1e-2).unwrap();
        let d0 = x.distance(y);
        for (i, (p, q)) in tx.lab().unwrap().iter().zip(ty.lab().unwrap()).enumerate() {
            let bound = d0 * (-DEFAULT_BETA * tx.time(i)).exp() + 1e-8;
            prop_assert!(p.distance(*q) <= bound, "t = {}", tx.time(i));
        }
    }
}
