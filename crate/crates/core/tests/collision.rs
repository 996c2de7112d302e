use std::f64::consts::{PI, SQRT_2, TAU};

use forced_kepler::action::action;
use forced_kepler::collision::{
    blow_up, certify, detect_collisions, detect_collisions_with, energy_continuity_check, energy_series, exit_times, surgery,
    virial_residual, DetectOptions,
};
use forced_kepler::kepler_arcs::{phi0, s0};
use forced_kepler::loops::LoopPath;
use forced_kepler::ode::{integrate, OdeOptions, OdeStats};
use forced_kepler::potentials::{linear_potential, ForcingTerm, Potential};
use forced_kepler::synthetic::{energy_jump_path, radial_kepler_orbit, zeta0_bounce, CollisionLoopSpec};
use forced_kepler::{Error, Vec2};

const E1: Vec2<f64> = Vec2 { x: 1.0, y: 0.0 };
const E2: Vec2<f64> = Vec2 { x: 0.0, y: 1.0 };

fn bounce(n: usize) -> LoopPath<f64> {
    zeta0_bounce(E1, E2, TAU, n).unwrap()
}

fn circle(n: usize) -> LoopPath<f64> {
    LoopPath::from_fn(TAU, n, |t| (Vec2::polar(t), Vec2::polar(t).perp())).unwrap()
}

/// Trajectory of `ẍ = −x/|x|³ + ∇U` sampled on `n` nodes over `[0, span)`.
fn trajectory(u: &Potential<f64>, x0: Vec2<f64>, v0: Vec2<f64>, span: f64, n: usize) -> LoopPath<f64> {
    let rhs = |t: f64, y: &[f64; 4]| {
        let x = Vec2::new(y[0], y[1]);
        let r = x.norm();
        let a = x * (-1.0 / (r * r * r)) + u.grad_x(t, x);
        [y[2], y[3], a.x, a.y]
    };
    let h = span / n as f64;
    let mut y = [x0.x, x0.y, v0.x, v0.y];
    let mut step = h / 10.0;
    let (mut pos, mut vel) = (Vec::new(), Vec::new());
    let mut stats = OdeStats::default();
    for k in 0..n {
        pos.push(Vec2::new(y[0], y[1]));
        vel.push(Vec2::new(y[2], y[3]));
        let t = k as f64 * h;
        let (next, last) = integrate(rhs, t, y, t + h, step, &OdeOptions::default(), &mut stats).unwrap();
        y = next;
        step = last;
    }
    LoopPath::from_samples(span, pos, vel, None).unwrap()
}

fn interior_max(v: &[Option<f64>], margin: usize) -> f64 {
    v[margin..v.len() - margin].iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn bounce_detection_recovers_directions_and_exit_times() {
    let path = bounce(1 << 14);
    let events = detect_collisions(&path).unwrap();
    assert_eq!(events.len(), 1);
    let ev = &events[0];
    assert!((ev.t0 - PI).abs() < 1e-12);
    assert!((ev.dir_minus - E1).norm() < 1e-4);
    assert!((ev.dir_plus - E2).norm() < 1e-4);
    // the inner half-window reaches into the connector
    assert!(ev.sperling_residual_minus < 2e-2 && ev.sperling_residual_plus < 2e-2);
    let (tm, tp) = exit_times(&path, ev, 0.25).unwrap();
    let exact = 0.25f64.powf(1.5) * s0::<f64>();
    assert!((tm - exact).abs() < 1e-6 && (tp - exact).abs() < 1e-6, "{tm} {tp} {exact}");
    // strictly inside the exit times the loop stays below delta
    for k in 0..path.n() {
        let tau = path.time(k) - ev.t0;
        if tau > -tm && tau < tp {
            assert!(path.x(k).norm() < 0.25);
        }
    }
}

#[test]
fn circle_has_no_events() {
    assert!(detect_collisions(&circle(512)).unwrap().is_empty());
}

#[test]
fn close_collisions_overlap() {
    // two zeros four cells apart
    let mut path = circle(256);
    let mut pos = path.positions().to_vec();
    pos[10] = Vec2::zero();
    pos[14] = Vec2::zero();
    path = path.with_positions(pos).unwrap();
    assert!(matches!(detect_collisions(&path), Err(Error::OverlappingEvents { .. })));
}

#[test]
fn exit_time_beyond_window_is_rejected() {
    let path = bounce(4096);
    let ev = detect_collisions(&path).unwrap()[0];
    assert!(matches!(exit_times(&path, &ev, ev.outer_radius * 1.5), Err(Error::WindowExceeded { .. })));
}

#[test]
fn energy_on_model_paths() {
    let u = Potential::zero(TAU);
    let path = bounce(4096);
    let series = energy_series(&path, &u);
    let s = s0::<f64>();
    for k in 0..path.n() {
        let tau = path.time(k) - PI;
        if k == 2048 {
            assert!(series.h[k].is_none());
        } else if tau.abs() < s {
            assert!(series.h[k].unwrap().abs() < 1e-9, "{k}");
        }
    }
    let series = energy_series(&circle(256), &u);
    assert!(series.h.iter().all(|h| (h.unwrap() + 0.5).abs() < 1e-14));
}

#[test]
fn integrated_ellipse_conserves_energy() {
    let u = Potential::zero(TAU);
    let path = trajectory(&u, E1, Vec2::new(0.0, 1.2), 5.0, 2000);
    let series = energy_series(&path, &u);
    let h0 = series.h[0].unwrap();
    assert!(series.h.iter().all(|h| (h.unwrap() - h0).abs() < 1e-8));
}

#[test]
fn energy_rate_follows_forcing_gradient() {
    let p = ForcingTerm::new(TAU, Vec2::new(0.01, -0.02), vec![Vec2::new(0.05, 0.0)], vec![Vec2::new(0.0, 0.03)]).unwrap();
    let u = linear_potential(p);
    let mut errs = Vec::new();
    for n in [1000, 2000] {
        let path = trajectory(&u, E1, Vec2::new(0.0, 1.1), 5.0, n);
        let s = energy_series(&path, &u);
        let err = (1..n - 1).map(|k| (s.rate[k].unwrap() - s.model_rate[k].unwrap()).abs()).fold(0.0, f64::max);
        // the opposite sign is far off
        let flipped = (1..n - 1).map(|k| (s.rate[k].unwrap() + s.model_rate[k].unwrap()).abs()).fold(0.0, f64::max);
        assert!(flipped > 1e-2);
        errs.push(err);
    }
    let h = 5.0 / 1000.0;
    assert!(errs[0] < 10.0 * h * h + 1e-6, "{errs:?}");
    assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
}

#[test]
fn energy_continuity_controls() {
    let u = Potential::zero(TAU);
    let path = bounce(1 << 14);
    let ev = detect_collisions(&path).unwrap();
    let rep = energy_continuity_check(&path, &u, &ev, 10, 1e-2);
    assert!(rep[0].ok && rep[0].gap < 1e-9, "{:?}", rep[0]);
    let jump = energy_jump_path(E1, 1.1, TAU, 1 << 14).unwrap();
    let ev = detect_collisions(&jump).unwrap();
    let rep = energy_continuity_check(&jump, &u, &ev, 10, 1e-2);
    assert!(!rep[0].ok && rep[0].gap > 1.0, "{:?}", rep[0]);
}

#[test]
fn virial_forms_agree_for_linear_forcing() {
    let u = linear_potential(ForcingTerm::constant(TAU, Vec2::new(0.02, 0.01)).unwrap());
    let path = trajectory(&u, E1, Vec2::new(0.0, 1.1), 5.0, 2000);
    let rep = virial_residual(&path, &u);
    for k in 1..1999 {
        assert!((rep.potential_form[k].unwrap() - rep.corrected_form[k].unwrap()).abs() < 1e-12);
    }
    assert!(interior_max(&rep.residual, 1) < 1e-4);
}

#[test]
fn virial_on_circle_vanishes() {
    let u = Potential::zero(TAU);
    let a = virial_residual(&circle(256), &u).max_corrected_form();
    let b = virial_residual(&circle(512), &u).max_corrected_form();
    // constant |x| and zero energy term: only rounding remains
    assert!(a < 1e-9 && b < 1e-9, "{a} {b}");
}

#[test]
fn virial_separates_forms_for_radial_power() {
    let u = Potential::radial_power(TAU, 0.1, 1.5).unwrap();
    let mut corrected = Vec::new();
    for n in [1000, 2000] {
        let path = trajectory(&u, E1, Vec2::new(0.0, 1.1), 5.0, n);
        let rep = virial_residual(&path, &u);
        // U − ⟨x, ∇U⟩ = −U/2 for degree 3/2
        assert!(interior_max(&rep.potential_form, 1) > 0.04);
        corrected.push(interior_max(&rep.corrected_form, 1));
    }
    assert!(corrected[0] < 1e-3 && (corrected[0] / corrected[1]).log2() > 1.8, "{corrected:?}");
}

#[test]
fn blow_up_of_pure_model_is_scale_invariant() {
    let u = Potential::zero(TAU);
    let path = bounce(1 << 18);
    let ev = detect_collisions(&path).unwrap()[0];
    let deltas = ev.default_deltas(6);
    let profiles = blow_up(&path, &u, &ev, &deltas).unwrap();
    let s = s0::<f64>();
    for p in &profiles {
        assert!((p.sigma_minus - s).abs() < 1e-6 && (p.sigma_plus - s).abs() < 1e-6);
        let first = p.z.first().unwrap().1;
        let last = p.z.last().unwrap().1;
        assert!((first.norm() - 1.0).abs() < 1e-9 && (last.norm() - 1.0).abs() < 1e-9);
        assert!(p.sup_deviation_from_zeta0 < 1e-6, "{}", p.sup_deviation_from_zeta0);
    }
    let last = profiles.last().unwrap();
    assert!((last.rescaled_action / phi0::<f64>() - 1.0).abs() < 1e-2, "{}", last.rescaled_action);
}

#[test]
fn blow_up_of_perturbed_model_converges_at_half_order() {
    let u = Potential::zero(TAU);
    let spec = CollisionLoopSpec { perturbation: Vec2::new(0.3, 0.2), ..CollisionLoopSpec::bounce(E1, E2, TAU, 1 << 18) };
    let path = spec.build().unwrap();
    let ev = detect_collisions(&path).unwrap()[0];
    let deltas: Vec<f64> = (0..4).map(|i| 0.2 / 4f64.powi(i)).collect();
    let profiles = blow_up(&path, &u, &ev, &deltas).unwrap();
    let s = s0::<f64>();
    let errs: Vec<f64> = profiles.iter().map(|p| (p.sigma_plus - s).abs().max((p.sigma_minus - s).abs())).collect();
    for w in errs.windows(2) {
        // a factor 4 in delta halves the error
        let ratio = w[0] / w[1];
        assert!((ratio - 2.0).abs() < 0.3, "{errs:?}");
    }
    let sups: Vec<f64> = profiles.iter().map(|p| p.sup_deviation_from_zeta0).collect();
    assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
}

#[test]
fn window_action_of_pure_model_scales_as_sqrt_delta() {
    let u = Potential::zero(TAU);
    let path = bounce(1 << 18);
    let ev = detect_collisions(&path).unwrap()[0];
    for delta in [0.2, 0.1, 0.05] {
        let (tm, tp) = exit_times(&path, &ev, delta).unwrap();
        let a = action(&path, &u, ev.t0 - tm, ev.t0 + tp).unwrap().total;
        let expect = delta.sqrt() * 4.0 * SQRT_2;
        assert!((a / expect - 1.0).abs() < 1e-4, "{delta}: {a} {expect}");
    }
}

#[test]
fn surgery_lowers_the_window_action() {
    let u = Potential::zero(TAU);
    let path = bounce(1 << 18);
    let ev = detect_collisions(&path).unwrap()[0];
    let phi = phi0::<f64>();
    for delta in [0.2, 0.1, 0.05] {
        let (direct, indirect, rep) = surgery(&path, &u, &ev, delta).unwrap();
        assert!((rep.time_stretch - 1.0).abs() < 1e-6);
        assert!(indirect.in_x() && indirect.constraint.winding == -1);
        assert!(!direct.in_x());
        for cand in [&direct, &indirect] {
            let gap = rep.original_window_action.total - cand.window_action.total;
            assert!(gap > 0.0);
            let expect = phi - cand.arc.action;
            assert!((gap / delta.sqrt() / expect - 1.0).abs() < 1e-2, "{delta}: {} vs {expect}", gap / delta.sqrt());
            // the loop outside the window is unchanged
            for k in 0..path.n() {
                let tau = path.time(k) - ev.t0;
                if tau <= -rep.t_delta_minus || tau >= rep.t_delta_plus {
                    assert_eq!(cand.path.x(k), path.x(k));
                }
            }
            assert!(cand.total_action.total < rep.original_total_action.total);
            // grid quadrature of the resampled loop agrees with the arc split
            let grid = cand.grid_window_action.total;
            assert!((grid / cand.window_action.total - 1.0).abs() < 1e-3, "{delta}: {grid} {}", cand.window_action.total);
        }
    }
}

#[test]
fn surgery_needs_distinct_directions() {
    let u = Potential::zero(TAU);
    let path = zeta0_bounce(E1, E1, TAU, 1 << 14).unwrap();
    let ev = detect_collisions(&path).unwrap()[0];
    assert!(matches!(surgery(&path, &u, &ev, 0.1), Err(Error::CoincidentDirections { .. })));
}

#[test]
fn certificate_controls() {
    let u = Potential::zero(TAU);
    let circle_cert = certify(&circle(512), &u);
    assert!(circle_cert.passed && circle_cert.events.is_empty());

    let radial = certify(&radial_kepler_orbit(E1, TAU, 1 << 14).unwrap(), &u);
    assert!(radial.passed, "{radial:?}");
    assert_eq!(radial.events.len(), 1);
    assert!(radial.direction_gap < 1e-12 && radial.energy_gap < 1e-6);

    let b = certify(&bounce(1 << 14), &u);
    assert!(!b.passed && !b.direction_limit_ok);
    assert!((b.direction_gap - SQRT_2).abs() < 1e-4);

    let j = certify(&energy_jump_path(E1, 1.1, TAU, 1 << 14).unwrap(), &u);
    assert!(!j.passed && !j.energy_limit_ok && j.direction_limit_ok);
}

#[test]
fn explicit_threshold_and_delta() {
    let path = bounce(4096);
    let opts = DetectOptions { threshold: Some(1e-3), delta: Some(0.1) };
    let ev = detect_collisions_with(&path, &opts).unwrap()[0];
    assert_eq!(ev.delta, 0.1);
    assert!((ev.t_delta_plus - 0.1f64.powf(1.5) * s0::<f64>()).abs() < 1e-9);
}
