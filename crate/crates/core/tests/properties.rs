use gnt_core::anytime::track_state;
use gnt_core::boundaries::{eval_boundary, invert_boundary, mixture_turning_level, BoundaryFamily, BoundarySpec};
use gnt_core::engine::{hypotheses, run_preordered, Combiner, ImtSession, Rule};
use gnt_core::masking::{mask, unmask, MaskScheme};
use gnt_core::structure::{e_step, tree_isotonic, EmData, TwoGroupsModel};
use gnt_core::Error;
use proptest::prelude::*;

fn scheme() -> impl Strategy<Value = MaskScheme> {
    prop_oneof![
        Just(MaskScheme::Tent),
        Just(MaskScheme::Railway),
        (0.05f64..0.95).prop_map(|c| MaskScheme::Calibrator { c }),
        Just(MaskScheme::CalibratorMixture),
    ]
}

fn family() -> impl Strategy<Value = BoundaryFamily> {
    proptest::sample::select(BoundaryFamily::ALL.to_vec())
}

fn spec_for(family: BoundaryFamily, alpha: f64) -> BoundarySpec {
    let spec = if family.is_linear() { BoundarySpec::linear(family, alpha, 500.0) } else { BoundarySpec::new(family, alpha) };
    if family == BoundaryFamily::GaussianInvertedStitching {
        spec.with_horizon(100_000)
    } else {
        spec
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mask_round_trips(p in 1e-9f64..(1.0 - 1e-9), s in scheme()) {
        let pair = mask(p, s).unwrap();
        prop_assert!(pair.masked >= 0.0 && pair.masked <= s.masked_max() + 1e-12);
        let back = unmask(pair, s).unwrap();
        let tol = if s.is_calibrator() { 1e-9 } else { 1e-12 };
        prop_assert!((back - p).abs() <= tol, "p {} back {}", p, back);
    }

    #[test]
    fn boundaries_positive_and_decreasing_in_alpha(fam in family(), a in 0.001f64..0.7, k in 1u64..20_000) {
        let b = (a * 1.2).min(0.8);
        let hi = eval_boundary(&spec_for(fam, a), k).unwrap();
        let lo = eval_boundary(&spec_for(fam, b), k).unwrap();
        prop_assert!(lo > 0.0);
        prop_assert!(hi > lo, "{} k {} {} {}", fam.name(), k, hi, lo);
    }

    #[test]
    fn inversion_recovers_alpha(fam in family(), a in 0.001f64..0.8, k in 1u64..10_000) {
        let a = if fam == BoundaryFamily::GaussianDiscreteMixture { a.min(mixture_turning_level(k) * 0.99) } else { a };
        let spec = spec_for(fam, a);
        let s = eval_boundary(&spec, k).unwrap();
        let back = invert_boundary(&spec, s, k).unwrap();
        prop_assert!((back - a).abs() <= 1e-8, "{} k {} a {} back {}", fam.name(), k, a, back);
    }

    #[test]
    fn statistic_is_the_sum_of_increments(ps in proptest::collection::vec(0.0f64..1.0, 1..300)) {
        let rule = Rule::boundary(BoundarySpec::gaussian_stitched(0.05)).unwrap();
        let state = run_preordered(&ps, Combiner::Stouffer, &rule).unwrap();
        prop_assert_eq!(state.trajectory.len() as u64, state.k);
        let mut s = 0.0;
        for (i, point) in state.trajectory.iter().enumerate() {
            s += Combiner::Stouffer.increment(ps[i]);
            prop_assert_eq!(point.statistic, s);
        }
        prop_assert_eq!(state.rejected_at.is_some(), state.trajectory.iter().any(|t| t.statistic > t.threshold));
    }

    #[test]
    fn interactive_sessions_keep_books(ps in proptest::collection::vec(0.0f64..1.0, 1..60), order in any::<u64>()) {
        let hyps = hypotheses(&ps);
        let rule = Rule::boundary(BoundarySpec::gaussian_linear(0.3, 5.0)).unwrap();
        let mut session = ImtSession::new(&hyps, MaskScheme::Tent, rule).unwrap();
        let mut ids: Vec<usize> = (0..ps.len()).collect();
        let mut x = order;
        for i in (1..ids.len()).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ids.swap(i, (x >> 33) as usize % (i + 1));
        }
        for &id in &ids {
            match session.pick(id) {
                Ok(out) => {
                    let sum: f64 = session.state().included.iter().map(|&j| if ps[j] < 0.5 { 1.0 } else { -1.0 }).sum();
                    prop_assert_eq!(out.statistic, sum);
                    prop_assert!(session.filtration().is_revealed(id));
                }
                Err(e) => {
                    prop_assert!(matches!(e, Error::Stopped));
                    prop_assert!(session.state().rejected());
                    break;
                }
            }
        }
        let anytime = track_state(session.state()).unwrap();
        for w in anytime.windows(2) {
            prop_assert!(w[1].p_anytime <= w[0].p_anytime);
        }
        prop_assert!(session.pick(ids[0]).is_err());
    }

    #[test]
    fn e_step_cells_are_probabilities(z in -8.0f64..8.0, mu in -3.0f64..6.0, pi in 0.0f64..1.0, s in scheme(), p in 1e-6f64..0.999) {
        let mut data = EmData::default();
        data.push_masked(s, mask(p, s).unwrap().masked);
        data.push_revealed(p);
        data.z_low.push(z);
        data.z_high.push(-z);
        data.log_jac.push(0.0);
        data.jac.push(1.0);
        data.revealed.push(false);
        let e = e_step(&data, &TwoGroupsModel::constant(3, mu, pi));
        for q in &e.quads {
            for v in [q.a, q.b, q.c, q.d] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((q.a + q.b + q.c + q.d - 1.0).abs() < 1e-10);
        }
        prop_assert_eq!((e.quads[1].c, e.quads[1].d), (0.0, 0.0));
    }

    #[test]
    fn isotonic_fit_is_feasible(y in proptest::collection::vec(0.0f64..1.0, 1..40), seed in any::<u64>()) {
        let parent: Vec<Option<usize>> = (0..y.len())
            .map(|i| if i == 0 { None } else { Some((seed.wrapping_mul(i as u64 + 7) % i as u64) as usize) })
            .collect();
        let f = tree_isotonic(&y, &parent);
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                prop_assert!(f[*p] >= f[i] - 1e-10);
            }
        }
        let mean_y: f64 = y.iter().sum::<f64>();
        let mean_f: f64 = f.iter().sum::<f64>();
        prop_assert!((mean_y - mean_f).abs() < 1e-9);
    }
}
