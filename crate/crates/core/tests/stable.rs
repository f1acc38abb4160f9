mod common;

use edgeimpact_core::oracle::{h2_truncated, rebuilt_delta, simulate, TruncationConfig};
use edgeimpact_core::stable_analysis::{
    delta_realization, greedy_gramian_improve, output_gramian_trace, ScanOptions, SortKey,
};
use edgeimpact_core::{EdgeMod, LinearSystem, SteadyStateKernel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use common::{chain, finite_margin_edge, random_direct, rel_err, rng};

fn h2(sys: &LinearSystem) -> f64 {
    h2_truncated(sys, &TruncationConfig::default()).unwrap().value
}

fn positive_system(rng: &mut rand_chacha::ChaCha8Rng, n: usize, m: usize, p: usize) -> LinearSystem {
    let net = random_direct(rng, n, 0.4, 0.8, true);
    let b = DMatrix::from_fn(n, m, |_, _| rng.random::<f64>());
    let c = DMatrix::from_fn(p, n, |_, _| rng.random::<f64>());
    LinearSystem::new(net.state_matrix().clone(), b, c).unwrap()
}

#[test]
fn positive_sums_and_products_dominate() {
    let mut rng = rng(201);
    for _ in 0..20 {
        let g = positive_system(&mut rng, 6, 3, 1);
        let h = positive_system(&mut rng, 5, 3, 1);
        let sum = g.parallel(&h).unwrap();
        assert!(h2(&sum) >= h2(&g) + h2(&h) - 1e-12);

        let h = positive_system(&mut rng, 5, 1, 4);
        let hg = h.series(&g).unwrap();
        assert!(h2(&hg) >= h2(&h) * h2(&g) * (1.0 - 1e-12));
    }
}

#[test]
fn simulated_output_change_matches_delta_system() {
    let mut rng = rng(202);
    let net = random_direct(&mut rng, 10, 0.3, 0.85, false);
    let k = SteadyStateKernel::build(&net).unwrap();
    let (s, t, margin) = finite_margin_edge(&mut rng, &k).unwrap();
    let m = EdgeMod::new(s, t, 0.5 * margin);
    let modified = net.apply_mod(&m).unwrap();
    let horizon = 80;
    let u = DMatrix::from_fn(net.inputs().len(), horizon, |_, _| rng.random::<f64>() - 0.5);
    let y = simulate(&net.system(), &u, horizon).unwrap();
    let y_bar = simulate(&modified.system(), &u, horizon).unwrap();
    let delta = delta_realization(&net, &m).unwrap();
    let y_delta = simulate(&delta.system, &u, horizon).unwrap();
    assert!((y_bar - y - y_delta).amax() < 1e-12);
}

#[test]
fn own_and_oracle_realizations_share_impulse_response() {
    let mut rng = rng(203);
    let net = random_direct(&mut rng, 8, 0.3, 0.7, false);
    let m = EdgeMod::new(2, 5, 0.1);
    let ours = delta_realization(&net, &m).unwrap().system;
    let (_, oracle) = rebuilt_delta(&net, &m).unwrap();
    for (a, b) in ours.impulse_response(50).iter().zip(oracle.impulse_response(50)) {
        assert!((a - b).amax() < 1e-14);
    }
}

#[test]
fn additions_increase_and_removals_decrease_the_dc_gain() {
    let mut rng = rng(204);
    let net = random_direct(&mut rng, 10, 0.3, 0.8, true);
    let base = (DMatrix::identity(10, 10) - net.state_matrix()).try_inverse().unwrap();
    for (i, j, w) in net.edges().into_iter().take(5) {
        let removed = net.apply_mod(&EdgeMod::new(i, j, -w)).unwrap();
        let r = (DMatrix::identity(10, 10) - removed.state_matrix()).try_inverse().unwrap();
        assert!((&base - &r).iter().all(|&v| v >= -1e-12));
        assert!(removed.spectral_radius() <= net.spectral_radius() + 1e-12);
    }
}

#[test]
fn batch_scan_matches_scalar_calls_and_sorts() {
    let mut rng = rng(205);
    let net = random_direct(&mut rng, 12, 0.25, 0.9, false);
    let k = SteadyStateKernel::build(&net).unwrap();
    let w = 0.5;
    let serial = k
        .batch_scan(w, &ScanOptions { parallel: false, sort: SortKey::Edge, top_k: None })
        .unwrap();
    let parallel = k
        .batch_scan(w, &ScanOptions { parallel: true, sort: SortKey::Edge, top_k: None })
        .unwrap();
    assert_eq!(serial, parallel);
    assert_eq!(serial.len(), 12 * 11);
    for r in &serial {
        let margin = k.stability_margin(r.s, r.t).unwrap();
        assert_eq!(r.margin, margin);
        assert_eq!(r.destabilizing, w >= margin);
        if !r.destabilizing {
            let m = EdgeMod::new(r.s, r.t, w);
            assert_eq!(r.hinf, k.delta_hinf(&m).unwrap());
            assert_eq!(r.h2_lower_bound, k.delta_h2_lower_bound(&m).unwrap());
        }
    }
    let by_margin = k.batch_scan(w, &ScanOptions { top_k: Some(5), ..Default::default() }).unwrap();
    assert_eq!(by_margin.len(), 5);
    for pair in by_margin.windows(2) {
        assert!(pair[0].margin <= pair[1].margin);
    }
}

#[test]
fn greedy_gramian_never_decreases_output_energy() {
    let mut rng = rng(206);
    let net = random_direct(&mut rng, 10, 0.2, 0.6, false);
    let result = greedy_gramian_improve(&net, 3, 0.05).unwrap();
    let mut current = net.clone();
    let mut previous = result.initial_trace;
    assert!(rel_err(previous, output_gramian_trace(&net).unwrap()) < 1e-12);
    for step in &result.steps {
        current = current.apply_mod(&step.edge).unwrap();
        let trace = output_gramian_trace(&current).unwrap();
        assert!(rel_err(trace, step.trace) < 1e-12);
        assert!(trace >= previous);
        previous = trace;
    }
    assert_eq!(result.edges().len(), 3);
}

#[test]
fn chain_fixture_delta_norms() {
    let k = SteadyStateKernel::build(&chain()).unwrap();
    let m = EdgeMod::new(1, 0, 1.0);
    let (_, delta) = rebuilt_delta(&chain(), &m).unwrap();
    assert!((h2(&delta) - k.delta_h2_lower_bound(&m).unwrap()).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn margin_separates_stable_from_unstable(seed in any::<u64>(), frac in 0.05f64..0.98) {
        let mut rng = rng(seed);
        let net = random_direct(&mut rng, 8, 0.35, 0.9, true);
        let k = SteadyStateKernel::build(&net).unwrap();
        if let Some((s, t, margin)) = finite_margin_edge(&mut rng, &k) {
            let inside = net.apply_mod(&EdgeMod::new(s, t, frac * margin)).unwrap();
            prop_assert!(inside.spectral_radius() < 1.0);
            let outside = net.apply_mod(&EdgeMod::new(s, t, margin / frac)).unwrap();
            prop_assert!(outside.spectral_radius() >= 1.0 - 1e-8);
        }
    }

    #[test]
    fn h2_bound_never_exceeds_exact(seed in any::<u64>(), frac in 0.0f64..0.95) {
        let mut rng = rng(seed);
        let net = random_direct(&mut rng, 6, 0.4, 0.8, false);
        let k = SteadyStateKernel::build(&net).unwrap();
        let s = rng.random_range(0..6);
        let t = (s + rng.random_range(1..6)) % 6;
        let margin = k.stability_margin(s, t).unwrap();
        let w = if margin.is_finite() { frac * margin } else { 3.0 * frac };
        let m = EdgeMod::new(s, t, w);
        let bound = k.delta_h2_lower_bound(&m).unwrap();
        let (_, delta) = rebuilt_delta(&net, &m).unwrap();
        let exact = h2_truncated(&delta, &TruncationConfig::default()).unwrap();
        prop_assert!(bound <= exact.upper() * (1.0 + 1e-12));
    }
}
