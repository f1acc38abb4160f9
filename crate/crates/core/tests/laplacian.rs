mod common;

use edgeimpact_core::graph_model::{complete_graph, path_graph};
use edgeimpact_core::laplacian_analysis::{delta_displacement_realization, displacement, greedy_grow};
use edgeimpact_core::oracle::{coherence_by_eigenvalues, hinf_sweep, rebuilt_delta, SweepConfig};
use edgeimpact_core::{EdgeMod, Error, LaplacianKernel, SpectralCondition};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use common::{non_edge, random_laplacian, rel_err, rng};

fn sorted_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn admissible_addition(rng: &mut rand_chacha::ChaCha8Rng, k: &LaplacianKernel, net: &edgeimpact_core::Network) -> EdgeMod {
    loop {
        let (s, t) = non_edge(rng, net).unwrap();
        let w = rng.random_range(0.01..0.2);
        if k.addition_admissible(s, t, w) {
            return EdgeMod::new(s, t, w);
        }
    }
}

#[test]
fn rank_one_pseudoinverse_update_matches_rebuild() {
    let mut rng = rng(101);
    for _ in 0..20 {
        let net = random_laplacian(&mut rng, 25, 0.1, true);
        let k = LaplacianKernel::build(&net).unwrap();
        let m = admissible_addition(&mut rng, &k, &net);
        let updated = k.lpinv_after(&m).unwrap();
        let rebuilt = net.apply_mod(&m).unwrap();
        let n = rebuilt.n();
        let j = DMatrix::from_element(n, n, 1.0 / n as f64);
        let direct = (rebuilt.laplacian() + &j).try_inverse().unwrap() - &j;
        assert!((updated - direct).amax() < 1e-9);
    }
}

#[test]
fn additions_never_raise_eigenvalues() {
    let mut rng = rng(102);
    for _ in 0..20 {
        let net = random_laplacian(&mut rng, 20, 0.1, true);
        let k = LaplacianKernel::build(&net).unwrap();
        let m = admissible_addition(&mut rng, &k, &net);
        let before = sorted_eigs(net.state_matrix());
        let after = sorted_eigs(net.apply_mod(&m).unwrap().state_matrix());
        for (b, a) in before.iter().zip(&after) {
            assert!(a <= &(b + 1e-12), "{a} > {b}");
        }
    }
}

fn resolvent_at(a: &DMatrix<f64>, z: Complex64) -> DMatrix<Complex64> {
    let n = a.nrows();
    let mut m = a.map(|v| Complex64::new(-v, 0.0));
    for i in 0..n {
        m[(i, i)] += z;
    }
    m.try_inverse().unwrap()
}

#[test]
fn factored_delta_matches_transfer_difference() {
    let mut rng = rng(103);
    for _ in 0..10 {
        let net = random_laplacian(&mut rng, 12, 0.2, false);
        let k = LaplacianKernel::build(&net).unwrap();
        let m = admissible_addition(&mut rng, &k, &net);
        let d = displacement(&net).unwrap();
        let after = displacement(&net.apply_mod(&m).unwrap()).unwrap();
        let (ins, outs) = (net.inputs().to_vec(), net.outputs().to_vec());
        for theta in [0.0, 0.3, 1.1, 2.0, 3.0] {
            let z = Complex64::from_polar(1.0, theta);
            let t = resolvent_at(d.a_j(), z);
            let tb = resolvent_at(after.a_j(), z);
            let (s, tt, w) = (m.s, m.t, m.w);
            let mid = Complex64::new(1.0, 0.0) - (t[(s, tt)] + t[(tt, s)] - t[(s, s)] - t[(tt, tt)]) * w;
            for (i, &o) in outs.iter().enumerate() {
                for (j, &kk) in ins.iter().enumerate() {
                    let factored = (t[(o, s)] - t[(o, tt)]) * w / mid * (t[(tt, kk)] - t[(s, kk)]);
                    let direct = tb[(o, kk)] - t[(o, kk)];
                    assert!(
                        (factored - direct).norm() < 1e-8,
                        "theta {theta}, entry ({i},{j}): {factored} vs {direct}"
                    );
                }
            }
        }
    }
}

#[test]
fn batch_matrix_is_symmetric_nonpositive_and_matches_scalar() {
    let mut rng = rng(104);
    let net = random_laplacian(&mut rng, 30, 0.08, true);
    let k = LaplacianKernel::build(&net).unwrap();
    let report = k.batch_coherence_delta(0.1).unwrap();
    for s in 0..30 {
        assert_eq!(report.q[(s, s)], 0.0);
        for t in 0..30 {
            if s == t {
                continue;
            }
            assert_eq!(report.admissible[(t, s)], report.admissible[(s, t)]);
            if !report.admissible[(t, s)] {
                assert!(report.q[(t, s)].is_nan());
                continue;
            }
            let q = report.q[(t, s)];
            assert!(q <= 0.0);
            assert!(rel_err(q, report.q[(s, t)]) < 1e-12);
            let scalar = k.coherence_delta(&EdgeMod::new(s, t, 0.1)).unwrap();
            assert!(rel_err(q, scalar) < 1e-10);
        }
    }
}

#[test]
fn projected_hinf_matches_sweep_of_displacement_system() {
    let mut rng = rng(105);
    for _ in 0..5 {
        let net = random_laplacian(&mut rng, 10, 0.2, false);
        let k = LaplacianKernel::build(&net).unwrap();
        let sweep = hinf_sweep(&displacement(&net).unwrap().system(), &SweepConfig::default()).unwrap();
        assert!(rel_err(k.hinf_projected(), sweep.value) < 1e-9);
        assert!(k.hinf_displacement() >= 0.0);
    }
}

#[test]
fn delta_realizations_agree() {
    let mut rng = rng(106);
    let net = random_laplacian(&mut rng, 10, 0.2, false);
    let k = LaplacianKernel::build(&net).unwrap();
    let m = admissible_addition(&mut rng, &k, &net);
    let ours = delta_displacement_realization(&net, &m).unwrap();
    let (_, oracle) = rebuilt_delta(&net, &m).unwrap();
    for (a, b) in ours.impulse_response(60).iter().zip(oracle.impulse_response(60)) {
        assert!((a - b).amax() < 1e-12);
    }
    let sweep = hinf_sweep(&ours, &SweepConfig::default()).unwrap();
    assert!(k.delta_dc_gain(&m).unwrap() <= sweep.value * (1.0 + 1e-9));
    assert!(k.delta_hinf_upper_bound(&m).unwrap() >= sweep.value);
}

#[test]
fn greedy_trajectory_strictly_decreases() {
    let net = path_graph(12, 0.2).unwrap();
    let (result, grown) = greedy_grow(&net, 0.1, 5).unwrap();
    let traj = result.trajectory();
    assert_eq!(traj.len(), 6);
    for pair in traj.windows(2) {
        assert!(pair[1] < pair[0]);
    }
    let oracle = coherence_by_eigenvalues(&grown).unwrap();
    assert!(rel_err(result.final_coherence(), oracle) < 1e-10);

    let (empty, same) = greedy_grow(&net, 0.1, 0).unwrap();
    assert_eq!(empty.trajectory(), vec![empty.initial]);
    assert_eq!(same, net);
}

#[test]
fn strict_condition_stalls_where_relaxed_growth_continues() {
    let net = path_graph(20, 0.2).unwrap();
    assert!(matches!(greedy_grow(&net, 0.2, 10), Err(Error::NoAdmissibleEdge)));
    let relaxed = net.with_condition(SpectralCondition::Displacement).unwrap();
    let (result, grown) = greedy_grow(&relaxed, 0.2, 10).unwrap();
    assert_eq!(grown.condition(), SpectralCondition::Displacement);
    assert!(grown.laplacian_spectral_radius() > 1.0);
    assert!(rel_err(result.final_coherence(), coherence_by_eigenvalues(&grown).unwrap()) < 1e-10);
}

#[test]
fn relaxed_coherence_delta_matches_rebuild() {
    let net = complete_graph(4, 0.2)
        .unwrap()
        .with_condition(SpectralCondition::Displacement)
        .unwrap();
    let mut rng = rng(107);
    let base = random_laplacian(&mut rng, 15, 0.3, true)
        .with_condition(SpectralCondition::Displacement)
        .unwrap();
    for net in [net, base] {
        let k = LaplacianKernel::build(&net).unwrap();
        let c0 = coherence_by_eigenvalues(&net).unwrap();
        let n = net.n();
        for s in 0..n {
            for t in s + 1..n {
                let m = EdgeMod::new(s, t, 0.3);
                if !k.addition_admissible(s, t, 0.3) {
                    assert!(net.apply_mod(&m).is_err());
                    continue;
                }
                let rebuilt = net.apply_mod(&m).unwrap();
                let exact = coherence_by_eigenvalues(&rebuilt).unwrap() - c0;
                assert!(rel_err(k.coherence_delta(&m).unwrap(), exact) < 1e-8);
            }
        }
    }
}
