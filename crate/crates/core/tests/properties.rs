mod common;

use common::*;
use ergomart::dynamics::{cyclic_rotation, product_torus, DynamicalSystem};
use ergomart::experiments::{
    cesaro_errors, oscillation_probe, pythagoras_residual, random_system, transference_residual,
};
use ergomart::martingale::{backward_martingale, binarize_filtration, ergodic_square_function};
use ergomart::paraproduct::{pi_em, pi_me, summation_by_parts_residual};
use ergomart::space::{conditional_expectation, lp_norm, ForwardFiltration, Observable, Partition};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

/// A random system with its inputs: (seed, atoms, depth, uniform weights).
fn system() -> impl Strategy<Value = DynamicalSystem> {
    (any::<u64>(), 1usize..48, 0usize..6, any::<bool>()).prop_map(
        |(seed, atoms, depth, uniform)| {
            random_system(&mut ChaCha8Rng::seed_from_u64(seed), atoms, depth, uniform).unwrap()
        },
    )
}

fn system_with(k: usize) -> impl Strategy<Value = (DynamicalSystem, Vec<Vec<f64>>)> {
    system().prop_flat_map(move |s| {
        let n = s.atom_count();
        (Just(s), prop::collection::vec(values(n), k))
    })
}

fn base() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![1.5, 2.0, 3.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tower_property((s, v) in system_with(1), i in 0usize..6, j in 0usize..6) {
        let (lo, hi) = (i.min(j).min(s.depth()), i.max(j).min(s.depth()));
        let g = obs(&v[0]);
        let fine = conditional_expectation(&g, s.filtration().level(lo), s.space()).unwrap();
        let twice = conditional_expectation(&fine, s.filtration().level(hi), s.space()).unwrap();
        let once = conditional_expectation(&g, s.filtration().level(hi), s.space()).unwrap();
        prop_assert!(twice.max_abs_diff(&once) < 1e-10);
    }

    #[test]
    fn expectation_contracts_and_preserves_integral((s, v) in system_with(1), level in 0usize..6, p in 1.0f64..6.0) {
        let g = obs(&v[0]);
        let e = conditional_expectation(&g, s.filtration().level(level.min(s.depth())), s.space()).unwrap();
        prop_assert!(lp_norm(&e, p, s.space()).unwrap() <= lp_norm(&g, p, s.space()).unwrap() * (1.0 + 1e-12) + 1e-12);
        prop_assert!((e.integral(s.space()).unwrap() - g.integral(s.space()).unwrap()).abs() < 1e-10);
        let avg = s.ergodic_average(&g, 7).unwrap();
        prop_assert!(lp_norm(&avg, p, s.space()).unwrap() <= lp_norm(&g, p, s.space()).unwrap() * (1.0 + 1e-12) + 1e-12);
        prop_assert!((avg.integral(s.space()).unwrap() - g.integral(s.space()).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn operators_are_linear((s, v) in system_with(2), c in -3.0f64..3.0, n in 1u64..40) {
        let (f, g) = (obs(&v[0]), obs(&v[1]));
        let comb = f.zip_with(&g, |x, y| c * x + y);
        let lhs = s.ergodic_average(&comb, n).unwrap();
        let rhs = s.ergodic_average(&f, n).unwrap().zip_with(&s.ergodic_average(&g, n).unwrap(), |x, y| c * x + y);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        let part = s.filtration().level(s.depth());
        let lhs = conditional_expectation(&comb, part, s.space()).unwrap();
        let rhs = conditional_expectation(&f, part, s.space()).unwrap()
            .zip_with(&conditional_expectation(&g, part, s.space()).unwrap(), |x, y| c * x + y);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn paraproducts_are_bilinear((s, v) in system_with(3), a in base(), c in -3.0f64..3.0) {
        let n = s.depth();
        let (f, g, h) = (obs(&v[0]), obs(&v[1]), obs(&v[2]));
        let gh = g.zip_with(&h, |x, y| c * x + y);
        let lhs = pi_em(&f, &gh, &s, a, n).unwrap();
        let rhs = pi_em(&f, &g, &s, a, n).unwrap().zip_with(&pi_em(&f, &h, &s, a, n).unwrap(), |x, y| c * x + y);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
        let fh = f.zip_with(&h, |x, y| c * x + y);
        let lhs = pi_me(&fh, &g, &s, a, n).unwrap();
        let rhs = pi_me(&f, &g, &s, a, n).unwrap().zip_with(&pi_me(&h, &g, &s, a, n).unwrap(), |x, y| c * x + y);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn summation_by_parts_holds((s, v) in system_with(2), a in base(), n in 0usize..6) {
        let n = n.min(s.depth());
        let r = summation_by_parts_residual(&obs(&v[0]), &obs(&v[1]), &s, a, n).unwrap();
        prop_assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn pythagoras_holds((s, v) in system_with(1)) {
        prop_assert!(pythagoras_residual(&obs(&v[0]), s.filtration(), s.space()).unwrap() <= 1e-10);
    }

    #[test]
    fn martingale_levels_are_measurable((s, v) in system_with(1)) {
        let m = backward_martingale(&obs(&v[0]), s.filtration(), s.space()).unwrap();
        for k in 0..=s.depth() {
            let part = s.filtration().level(k);
            let again = conditional_expectation(m.level(k), part, s.space()).unwrap();
            prop_assert_eq!(again.values(), m.level(k).values());
        }
    }

    #[test]
    fn transference_preserves_norms((s, v) in system_with(1), n in 0usize..7, p in prop::sample::select(vec![1.0, 4.0 / 3.0, 2.0, 4.0])) {
        prop_assert!(transference_residual(&obs(&v[0]), &s, n, p).unwrap() <= 1e-12);
    }

    #[test]
    fn averages_commute_with_conditioning_on_commuting_systems(
        m in 1u32..7, depth_frac in 0.0f64..1.0, n in 1u64..200, seed in any::<u64>(),
    ) {
        let depth = (depth_frac * (m as f64 + 1.0)) as usize;
        let s = cyclic_rotation(m, depth.min(m as usize)).unwrap();
        let atoms = s.atom_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = ergomart::experiments::random_observable(&mut rng, atoms, Default::default());
        for level in 0..=s.depth() {
            let part = s.filtration().level(level);
            let lhs = conditional_expectation(&s.ergodic_average(&f, n).unwrap(), part, s.space()).unwrap();
            let rhs = s.ergodic_average(&conditional_expectation(&f, part, s.space()).unwrap(), n).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
        for atom in 0..atoms {
            let ind = Observable::indicator(atoms, atom);
            let part = s.filtration().level(s.depth());
            let lhs = conditional_expectation(&s.map().pull_back(&ind), part, s.space()).unwrap();
            let rhs = s.map().pull_back(&conditional_expectation(&ind, part, s.space()).unwrap());
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }

    #[test]
    fn cesaro_bound_on_torus(seed in any::<u64>(), m1 in 1u32..4, m2 in 1u32..4) {
        let pair = product_torus(m1, m2, [1, 1], [0, 1], 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = ergomart::experiments::random_observable(&mut rng, pair.system.atom_count(), Default::default());
        for (_, err, bound) in cesaro_errors(&f, &pair.system, &[1, 3, 8, 17, 64, 100]).unwrap() {
            prop_assert!(err <= bound + 1e-12);
        }
    }

    #[test]
    fn oscillation_shrinks_with_later_start((s, v) in system_with(2), a in base(), eps in 0.0f64..1.0) {
        prop_assume!(s.depth() >= 2);
        let (f, g) = (obs(&v[0]), obs(&v[1]));
        let mut prev = f64::INFINITY;
        let mut prev_weight = f64::INFINITY;
        for n0 in 0..s.depth() {
            let o = oscillation_probe(&f, &g, &s, a, n0, s.depth(), eps).unwrap();
            prop_assert!(o.max_oscillation <= prev);
            prop_assert!(o.exceptional_weight <= prev_weight + 1e-15);
            prev = o.max_oscillation;
            prev_weight = o.exceptional_weight;
        }
    }

    #[test]
    fn ergodic_square_function_dominates_each_gap(seed in any::<u64>(), m in 1u32..6) {
        let s = cyclic_rotation(m, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = ergomart::experiments::random_observable(&mut rng, s.atom_count(), Default::default());
        let times = [1u64, 2, 4, 8, 16];
        let sq = ergodic_square_function(&f, s.map(), &times).unwrap();
        for w in times.windows(2) {
            let gap = &s.ergodic_average(&f, w[1]).unwrap() - &s.ergodic_average(&f, w[0]).unwrap();
            for i in 0..s.atom_count() {
                prop_assert!(gap.get(i).abs() <= sq.get(i) + 1e-12);
            }
        }
    }

    #[test]
    fn binarized_filtrations_split_in_two(arities in prop::collection::vec(1usize..6, 1..4)) {
        // level j + 1 splits each block of level j into `arities[j]` pieces
        let atoms: usize = arities.iter().product();
        let mut levels = Vec::new();
        let mut width = atoms;
        levels.push(Partition::trivial(atoms));
        for &k in &arities {
            width /= k;
            levels.push(Partition::from_labels((0..atoms).map(|i| i / width)).unwrap());
        }
        let forward = ForwardFiltration::new(levels.clone(), false).unwrap();
        let bin = binarize_filtration(&forward);
        for w in bin.levels().windows(2) {
            for b in w[0].blocks() {
                let children: std::collections::BTreeSet<usize> = b.iter().map(|&x| w[1].block(x)).collect();
                prop_assert!(children.len() <= 2);
            }
        }
        for level in &levels {
            prop_assert!(bin.levels().iter().any(|l| l.same_sigma_algebra(level)));
        }
        let again = binarize_filtration(&bin);
        prop_assert_eq!(again.levels().len(), bin.levels().len());
    }
}

#[test]
fn paraproducts_agree_with_definitions_under_proptest_systems() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    runner
        .run(&(system_with(2), base()), |((s, v), a)| {
            let n = s.depth();
            let got = pi_em(&obs(&v[0]), &obs(&v[1]), &s, a, n).unwrap();
            let want = direct_pi_em(&v[0], &v[1], &s, a, n);
            prop_assert!(max_diff(got.values(), &want) < 1e-9);
            Ok(())
        })
        .unwrap();
}
