use proptest::prelude::*;

use impulsive_core::certificates::{inequality_series, Certificate, GuasCertificate, Mode};
use impulsive_core::comparison::{
    compose, inverse_strong_time, invert, lift_weak_beta, make_beta_tilde, ComparisonFn, KlFn, NondecreasingFn,
};
use impulsive_core::impulses::{count_jumps, strong_time, ImpulseSequence};
use impulsive_core::inputs::{energy_norm, truncate, HybridInput, InputSignal};
use impulsive_core::simulate::{simulate, Trajectory};
use impulsive_core::system::SystemConfig;

fn times(max: usize, span: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..span, 0..max).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        v
    })
}

fn input(span: f64) -> impl Strategy<Value = InputSignal> {
    prop::collection::vec((0.0..span, -3.0..3.0f64), 1..6).prop_map(|mut pieces| {
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        pieces.dedup_by(|a, b| a.0 == b.0);
        let breaks = pieces.iter().map(|p| p.0).collect();
        let values = pieces.iter().map(|p| vec![p.1]).collect();
        InputSignal::from_pieces(1, breaks, values).unwrap()
    })
}

fn gain(i: usize) -> ComparisonFn {
    match i {
        0 => ComparisonFn::identity(),
        1 => ComparisonFn::power(2.0, 1.5).unwrap(),
        2 => ComparisonFn::linear(0.25).unwrap(),
        _ => ComparisonFn::saturating(),
    }
}

fn ordered3() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..12.0f64, 0.0..12.0f64, 0.0..12.0f64).prop_map(|(a, b, c)| {
        let mut v = [a, b, c];
        v.sort_by(f64::total_cmp);
        (v[0], v[1], v[2])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn energy_is_interval_additive(u in input(10.0), ts in times(8, 10.0), (a, b, c) in ordered3(), g1 in 0..4usize, g2 in 0..4usize) {
        let w = HybridInput::new(u, ImpulseSequence::finite(ts).unwrap());
        let (r1, r2) = (gain(g1), gain(g2));
        let whole = energy_norm(&w, &r1, &r2, a, c).unwrap();
        let split = energy_norm(&w, &r1, &r2, a, b).unwrap() + energy_norm(&w, &r1, &r2, b, c).unwrap();
        prop_assert!((whole - split).abs() <= 1e-12 * (1.0 + whole));
    }

    #[test]
    fn truncation_keeps_only_the_window(u in input(10.0), ts in times(8, 10.0), (a, b, c) in ordered3()) {
        let w = HybridInput::new(u, ImpulseSequence::finite(ts).unwrap());
        let id = ComparisonFn::identity();
        let tw = truncate(&w, a, b).unwrap();
        let inside = energy_norm(&w, &id, &id, a, b).unwrap();
        prop_assert!((energy_norm(&tw, &id, &id, 0.0, 12.0).unwrap() - inside).abs() <= 1e-12 * (1.0 + inside));
        prop_assert_eq!(energy_norm(&tw, &id, &id, b, c).unwrap(), 0.0);
        prop_assert_eq!(energy_norm(&tw, &id, &id, 0.0, a).unwrap(), 0.0);
    }

    #[test]
    fn energy_is_monotone_in_t(u in input(10.0), ts in times(8, 10.0), (a, b, c) in ordered3()) {
        let w = HybridInput::new(u, ImpulseSequence::finite(ts).unwrap());
        let id = ComparisonFn::identity();
        prop_assert!(energy_norm(&w, &id, &id, a, b).unwrap() <= energy_norm(&w, &id, &id, a, c).unwrap());
    }

    #[test]
    fn jump_count_is_additive(ts in times(12, 10.0), (a, b, c) in ordered3()) {
        let s = ImpulseSequence::finite(ts).unwrap();
        prop_assert_eq!(count_jumps(&s, a, c).unwrap(), count_jumps(&s, a, b).unwrap() + count_jumps(&s, b, c).unwrap());
        let st = strong_time(&s, a, c).unwrap();
        prop_assert!(st >= c - a);
    }

    #[test]
    fn periodic_count_is_floor_bounded(period in 0.1..3.0f64, (a, _b, c) in ordered3()) {
        let s = ImpulseSequence::periodic(period, period).unwrap();
        let n = count_jumps(&s, a, c).unwrap() as f64;
        prop_assert!(n <= ((c - a) / period).floor() + 1.0);
    }

    #[test]
    fn invert_roundtrip(r in 1e-6..1e3f64, g in 0..3usize) {
        let f = gain(g);
        let y = f.eval(r).unwrap();
        let back = invert(&f, y).unwrap();
        prop_assert!((f.eval(back).unwrap() - y).abs() <= 1e-10 * (1.0 + y));
    }

    #[test]
    fn compose_evaluates_pointwise(r in 0.0..100.0f64) {
        let (f, g) = (gain(1), gain(2));
        let h = compose(&f, &g).unwrap();
        prop_assert_eq!(h.eval(r).unwrap(), f.eval(g.eval(r).unwrap()).unwrap());
    }

    #[test]
    fn beta_tilde_bounds_alpha_inverse(r in 0.01..50.0f64, s in 0.0..20.0f64) {
        let alpha = ComparisonFn::power(1.0, 2.0).unwrap();
        let beta = KlFn::exp_decay(3.0, 0.4).unwrap();
        let bt = make_beta_tilde(&alpha, &beta).unwrap();
        let v = bt.eval(r, s).unwrap();
        prop_assert!((alpha.eval(v).unwrap() - beta.eval(r, s).unwrap()).abs() <= 1e-9 * (1.0 + beta.eval(r, s).unwrap()));
    }

    #[test]
    fn lift_defining_inequality(r in 0.01..100.0f64, s in 0.0..30.0f64, slope in 0.0..3.0f64, offset in 0.0..2.0f64) {
        let phi = NondecreasingFn::new("affine", move |x| slope * x + offset).unwrap();
        let beta = KlFn::exp_decay(1.0, 0.7).unwrap();
        let lifted = lift_weak_beta(&beta, &phi).unwrap();
        let rhs = lifted.eval(r, s + phi.eval(s)).unwrap();
        prop_assert!(beta.eval(r, s).unwrap() <= rhs + 1e-8);
        // g(v) never exceeds the true infimum
        let v = s + phi.eval(s);
        prop_assert!(inverse_strong_time(&phi, v) <= s);
    }

    #[test]
    fn strong_bound_never_exceeds_weak(x0 in -5.0..5.0f64, t0 in 0.0..3.0f64, ts in times(10, 8.0)) {
        let sys = SystemConfig {
            name: String::new(),
            dim_x: 1,
            dim_u: 1,
            flow: vec!["-x1".into()],
            jump: vec!["-x1 / 2".into()],
            envelopes: Default::default(),
        }
        .build()
        .unwrap();
        let w = HybridInput::zero(1, ImpulseSequence::finite(ts).unwrap());
        let traj = simulate(&sys, t0, &[x0], &w, 5.0, 0.05).unwrap();
        let beta = KlFn::exp_decay(1.0, 0.5).unwrap();
        let strong = Certificate::Guas(GuasCertificate::new(beta.clone(), Mode::Strong));
        let weak = Certificate::Guas(GuasCertificate::new(beta, Mode::Weak));
        let a = inequality_series(&strong, &traj, &w).unwrap();
        let b = inequality_series(&weak, &traj, &w).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            prop_assert!(p.rhs <= q.rhs);
            prop_assert_eq!(p.lhs, q.lhs);
        }
    }

    #[test]
    fn csv_roundtrip(x0 in -5.0..5.0f64, ts in times(5, 4.0)) {
        let sys = SystemConfig {
            name: String::new(),
            dim_x: 1,
            dim_u: 0,
            flow: vec!["0.3 * x1".into()],
            jump: vec!["x1".into()],
            envelopes: Default::default(),
        }
        .build()
        .unwrap();
        let w = HybridInput::zero(0, ImpulseSequence::finite(ts).unwrap());
        let traj = simulate(&sys, 0.0, &[x0], &w, 4.0, 0.1).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.times(), traj.times());
        prop_assert_eq!(back.jumps().len(), traj.jumps().len());
        prop_assert_eq!(back.last_state(), traj.last_state());
    }
}

#[test]
fn jump_at_initial_time_is_not_applied() {
    let sys = SystemConfig {
        name: String::new(),
        dim_x: 1,
        dim_u: 0,
        flow: vec!["0".into()],
        jump: vec!["x1".into()],
        envelopes: Default::default(),
    }
    .build()
    .unwrap();
    let w = HybridInput::zero(0, ImpulseSequence::finite(vec![1.0, 2.0]).unwrap());
    let traj = simulate(&sys, 1.0, &[1.0], &w, 3.0, 0.5).unwrap();
    assert_eq!(traj.jumps().len(), 1);
    assert_eq!(traj.last_state(), &[2.0]);
    // right-continuous: the sample at the jump time is the post-jump value
    let i = traj.index_of(2.0).unwrap();
    assert_eq!(traj.state(i), &[2.0]);
}
