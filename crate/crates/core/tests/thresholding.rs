mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxcert::certainty::optimal_threshold;
use voxcert::mle::VoxelFit;
use voxcert::model::MixtureParams;
use voxcert::special::Dof;
use voxcert::thresholding::{
    bh_fdr, overlap_matrix, percent_overlap, threshold_with_cutoffs, threshold_with_frontier,
    ActivationMap, Method,
};
use voxcert::Execution;

fn map(d: Vec<bool>) -> ActivationMap {
    ActivationMap {
        decisions: d,
        method: Method::Frontier,
        cutoff: None,
        voxel_cutoffs: None,
    }
}

fn random_pvalues(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(1..=12);
    (0..n)
        .map(|_| match rng.random_range(0..4) {
            // Coarse values produce ties.
            0 => rng.random_range(0..20) as f64 / 200.0,
            1 => rng.random::<f64>() * 0.01,
            _ => rng.random::<f64>(),
        })
        .collect()
}

#[test]
fn bh_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let p = random_pvalues(&mut rng);
        let q = [0.01, 0.05, 0.1, 0.2][rng.random_range(0..4)];
        let got = bh_fdr(&p, q).unwrap();
        assert_eq!(got.decisions, common::bh_bruteforce(&p, q), "p={p:?} q={q}");
        let largest = p
            .iter()
            .zip(&got.decisions)
            .filter(|(_, &d)| d)
            .map(|(&x, _)| x)
            .fold(0.0, f64::max);
        assert_eq!(got.cutoff, Some(largest));
    }
}

#[test]
fn bh_worked_example() {
    let got = bh_fdr(&[0.001, 0.008, 0.039, 0.041, 0.5], 0.05).unwrap();
    assert_eq!(got.decisions, vec![true, true, false, false, false]);
    assert_eq!(got.cutoff, Some(0.008));
    assert_eq!(got.method, Method::Fdr { q: 0.05 });
}

#[test]
fn bh_is_monotone_in_q() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let p = random_pvalues(&mut rng);
        let a = bh_fdr(&p, 0.02).unwrap();
        let b = bh_fdr(&p, 0.1).unwrap();
        assert!(b.contains(&a));
    }
}

#[test]
fn overlap_examples() {
    let mut a = vec![false; 300];
    let mut b = vec![false; 300];
    a[..100].iter_mut().for_each(|x| *x = true);
    b[70..120].iter_mut().for_each(|x| *x = true);
    assert!((percent_overlap(&map(a.clone()), &map(b.clone())).unwrap() - 0.4).abs() < 1e-15);
    assert_eq!(percent_overlap(&map(a.clone()), &map(a.clone())).unwrap(), 1.0);
    let c: Vec<bool> = a.iter().map(|x| !x).collect();
    assert_eq!(percent_overlap(&map(a), &map(c)).unwrap(), 0.0);
}

#[test]
fn overlap_matrix_by_hand() {
    // A = {0,1,2,3}, B = {2,3,4}, C = {5}
    let a = map(vec![true, true, true, true, false, false]);
    let b = map(vec![false, false, true, true, true, false]);
    let c = map(vec![false, false, false, false, false, true]);
    let m = overlap_matrix(&[a.clone(), b.clone(), c]).unwrap();
    let ab = 2.0 * 2.0 / 7.0;
    let want = [[1.0, ab, 0.0], [ab, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for j in 0..3 {
        for k in 0..3 {
            assert!((m.values[j][k] - want[j][k]).abs() < 1e-15);
        }
    }
    let s = m.summary;
    assert_eq!(s.pairs, 3);
    assert_eq!((s.min, s.max, s.median), (0.0, ab, 0.0));
    assert!((s.q1 - 0.0).abs() < 1e-15 && (s.q3 - ab / 2.0).abs() < 1e-15);
    assert!((s.iqr - ab / 2.0).abs() < 1e-15);

    let two = overlap_matrix(&[a.clone(), b.clone()]).unwrap();
    assert_eq!(two.values[0][1], percent_overlap(&a, &b).unwrap());
    assert!(overlap_matrix(&[a]).is_err());
}

#[test]
fn twelve_maps_give_sixty_six_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let maps: Vec<_> = (0..12)
        .map(|_| map((0..50).map(|_| rng.random::<f64>() < 0.3).collect()))
        .collect();
    assert_eq!(overlap_matrix(&maps).unwrap().summary.pairs, 66);
}

fn fit(l: f64, d: f64) -> VoxelFit {
    VoxelFit {
        lambda: l,
        delta: d,
        loglik: 0.0,
        converged: true,
        restarts_used: 10,
        clamped: 0,
        evaluations: 0,
    }
}

#[test]
fn frontier_thresholding() {
    let nu = Dof::new(122.0).unwrap();
    let degenerate = vec![fit(0.5, 0.0); 4];
    let m = threshold_with_frontier(&degenerate, nu, &[1e-12, 0.1, 0.5, 0.9], Execution::Sequential).unwrap();
    assert_eq!(m.active(), 0);

    let f = fit(0.6, 3.0);
    let tau = optimal_threshold(MixtureParams::new(0.6, 3.0).unwrap(), nu).tau;
    let m = threshold_with_frontier(&[f, f, f], nu, &[tau / 2.0, tau, tau * 1.5], Execution::Parallel).unwrap();
    assert_eq!(m.decisions, vec![true, true, false]);
    assert_eq!(m.voxel_cutoffs.as_ref().unwrap()[0], tau);
    assert!(threshold_with_frontier(&[f], nu, &[0.1, 0.2], Execution::Parallel).is_err());
}

proptest! {
    #[test]
    fn overlap_symmetric_and_bounded(bits in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
        let a = map(bits.iter().map(|b| b.0).collect());
        let b = map(bits.iter().map(|b| b.1).collect());
        let ab = percent_overlap(&a, &b).unwrap();
        prop_assert_eq!(ab, percent_overlap(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(percent_overlap(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn cutoff_decisions_survive_monotone_transform(pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..40)) {
        let cut: Vec<f64> = pairs.iter().map(|x| x.0).collect();
        let p: Vec<f64> = pairs.iter().map(|x| x.1).collect();
        let g = |x: f64| (x + 1e-3).ln();
        let a = threshold_with_cutoffs(&cut, &p).unwrap();
        let b = threshold_with_cutoffs(
            &cut.iter().map(|&x| g(x)).collect::<Vec<_>>(),
            &p.iter().map(|&x| g(x)).collect::<Vec<_>>(),
        ).unwrap();
        prop_assert_eq!(a.decisions, b.decisions);
    }
}
