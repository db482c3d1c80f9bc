mod common;

use proptest::prelude::*;
use proptest::sample::subsequence;

use common::crossing_rows;
use sheet_core::ibp::{expand, span, substitute, PermutationSpec};
use sheet_core::integrators::TimeWindow;
use sheet_core::sde::{solve_euler, solve_picard, ConstantDrift, SineDrift};
use sheet_core::shuffle::{locate_cell, RegionDescriptor, RegionKind};
use sheet_core::{GridPartition, PlanePoint, SheetSample};

fn permutation(max: usize) -> impl Strategy<Value = Vec<usize>> {
    (1..=max).prop_flat_map(|n| Just((1..=n).collect::<Vec<usize>>()).prop_shuffle())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expansion_structure(sigma in permutation(7)) {
        let n = sigma.len();
        let spec = PermutationSpec::unit(sigma.clone()).unwrap();
        let j = crossing_rows(&sigma);
        let terms = expand(&spec).unwrap();
        prop_assert_eq!(terms.len(), 1 << j.len());
        for t in &terms {
            let mut cols = t.b_columns();
            cols.sort_unstable();
            cols.dedup();
            prop_assert_eq!(cols.len(), n);
            let parity = t.k.len() + n - j.len();
            prop_assert_eq!(t.sign, if parity.is_multiple_of(2) { 1 } else { -1 });
            prop_assert!(t.k.iter().all(|k| j.contains(k)));
        }
    }

    #[test]
    fn substituted_arguments_reproduce_span_sums(
        sigma in permutation(6),
        seed in any::<u64>(),
    ) {
        let n = sigma.len();
        let spec = PermutationSpec::unit(sigma).unwrap();
        let mut rng = sheet_core::rng::CounterRng::new(seed);
        let z: Vec<f64> = (0..n * n).map(|_| rng.normal()).collect();
        let at = |r: usize, c: usize| (r - 1) * n + c - 1;
        for term in expand(&spec).unwrap() {
            let y = substitute(&term, n, &z);
            for i in 1..=n {
                let direct: f64 = span(&spec, i).iter().map(|c| z[at(c.row, c.col)]).sum();
                let via: f64 = term.b_arg_sets[i - 1].iter().map(|c| y[at(c.row, c.col)]).sum();
                prop_assert!((direct - via).abs() <= 1e-12 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn subsets_of_crossing_rows_are_terms(sigma in permutation(6), pick in subsequence((0..6usize).collect::<Vec<_>>(), 0..6)) {
        let spec = PermutationSpec::unit(sigma.clone()).unwrap();
        let j = crossing_rows(&sigma);
        let k: Vec<usize> = pick.into_iter().filter(|&p| p < j.len()).map(|p| j[p]).collect();
        prop_assert!(expand(&spec).unwrap().iter().any(|t| t.k == k));
    }

    #[test]
    fn euler_is_causal(seed in any::<u64>(), cut in 1usize..8) {
        let g = GridPartition::uniform(8, 8, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 1, seed).unwrap();
        let mut inc = w.increments().to_vec();
        for j in 0..8 {
            inc[(cut - 1) * 8 + j] += 1.0;
        }
        let shifted = SheetSample::from_increments(g.clone(), 1, inc, seed).unwrap();
        let b = SineDrift { dim: 1, amplitude: 1.0, omega: 1.0, kappa: 0.0 };
        let a = solve_euler(&g, &b, &[0.0], &w).unwrap();
        let c = solve_euler(&g, &b, &[0.0], &shifted).unwrap();
        for i in 0..cut {
            for j in 0..=8 {
                prop_assert_eq!(a.at(i, j), c.at(i, j));
            }
        }
    }

    #[test]
    fn picard_with_constant_drift_matches_euler(seed in any::<u64>(), c in -2.0..2.0f64) {
        let g = GridPartition::geometric(6, 7, 1.0, 2.0, 1.3).unwrap();
        let w = SheetSample::sample(&g, 1, seed).unwrap();
        let b = ConstantDrift { value: vec![c] };
        let e = solve_euler(&g, &b, &[0.1], &w).unwrap();
        let (p, _) = solve_picard(&g, &b, &[0.1], &w, 1e-13, 50).unwrap();
        prop_assert!(e.sup_distance(&p) <= 1e-12);
    }

    #[test]
    fn located_cell_is_consistent(seed in any::<u64>()) {
        let window = TimeWindow { r_bar: 0.0, r: 0.4, s: 1.0, u_bar: 0.0, u: 0.5, t: 1.0 };
        let region = RegionDescriptor::new(RegionKind::Nabla, 2, 0, window).unwrap();
        let mut rng = sheet_core::rng::CounterRng::new(seed);
        let mut pts: Vec<PlanePoint> = region.sample(&mut rng).unwrap();
        pts.extend(region.sample(&mut rng).unwrap());
        let (sigma, gamma) = locate_cell(&region, 2, &pts).unwrap();
        for (labels, coord) in [(&sigma, 0), (&gamma, 1)] {
            let value = |idx: usize| if coord == 0 { pts[idx].s } else { pts[idx].t };
            for a in 0..4 {
                for b in 0..4 {
                    if labels[a] < labels[b] {
                        prop_assert!(value(a) > value(b));
                    }
                }
            }
        }
    }
}
