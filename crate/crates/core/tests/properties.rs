mod common;

use cachecraft::evaluator::{expected_rate, expected_rate_exhaustive, rate_for_demand};
use cachecraft::lp::{Backend, DenseSimplex, LpSolver, LpStatus, SolveOptions, SparseSimplex};
use cachecraft::schemes::{decentralized_scheme, expand_to_placement, group_placement, centralized_scheme, SchemeKind};
use cachecraft::{validate_placement, CacheClasses, Demand, GroupedScheme, Method, Placement, SystemConfig};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn popularities(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn lengths(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.25f64..2.0, n)
}

/// Random K <= 4, N <= 4 configuration with two classes.
fn config() -> impl Strategy<Value = SystemConfig> {
    (2usize..=4, 2usize..=4)
        .prop_flat_map(|(k, n)| (Just(k), Just(n), lengths(n), popularities(n), 1..k, 0.0f64..1.0, 0.0f64..1.0))
        .prop_map(|(k, n, f, p, ks, a, b)| {
            let total: f64 = f.iter().sum();
            let (ms, ml) = (a.min(b) * total, a.max(b) * total);
            SystemConfig::uniform(k, n, 0.0)
                .unwrap()
                .with_file_lengths(f)
                .unwrap()
                .with_popularities(p)
                .unwrap()
                .with_classes(CacheClasses {
                    small_users: ks,
                    small_cache: ms,
                    large_cache: ml,
                })
                .unwrap()
        })
}

/// The parts of `cfg` a method needs, everything else made uniform.
fn restrict(cfg: &SystemConfig, method: Method) -> SystemConfig {
    let n = cfg.num_files();
    let m = cfg.cache_sizes()[cfg.num_users() - 1];
    let uniform_files = |c: &SystemConfig| c.with_file_lengths(vec![1.0; n]).unwrap();
    let uniform_p = |c: &SystemConfig| c.with_popularities(vec![1.0 / n as f64; n]).unwrap();
    match method {
        Method::General | Method::FullHet => cfg.clone(),
        Method::TwoTier => cfg
            .with_classes(*cfg.classes().unwrap())
            .map(|c| uniform_p(&uniform_files(&c)).with_classes(*cfg.classes().unwrap()).unwrap())
            .unwrap(),
        Method::LengthFirst => cfg.with_uniform_cache(m).unwrap(),
        Method::PopularityFirst => uniform_files(&cfg.with_uniform_cache(m).unwrap()),
        Method::Homogeneous | Method::Simplex => uniform_p(&uniform_files(&cfg.with_uniform_cache(m).unwrap())),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn lp_optimum_is_reproduced_by_enumeration(cfg in config()) {
        for method in Method::ALL {
            let cfg = restrict(&cfg, method);
            let sol = method.build(&cfg).unwrap().solve(Backend::Auto).unwrap();
            let report = validate_placement(&cfg, &sol.placement, 1e-8).unwrap();
            prop_assert!(report.is_feasible(), "{method}: {:?}", report.violations);
            let rate = expected_rate_exhaustive(&cfg, &sol.placement).unwrap().expected_rate;
            prop_assert!((rate - sol.objective).abs() < 1e-9, "{method}: {rate} vs {}", sol.objective);
        }
    }

    #[test]
    fn simplified_problems_never_beat_general(cfg in config()) {
        let general = Method::General.build(&cfg).unwrap().solve(Backend::Auto).unwrap().objective;
        let fh = Method::FullHet.build(&cfg).unwrap().solve(Backend::Dense).unwrap().objective;
        prop_assert!(fh >= general - 1e-9);
        let same_cache = restrict(&cfg, Method::LengthFirst);
        let g2 = Method::General.build(&same_cache).unwrap().solve(Backend::Auto).unwrap().objective;
        let lf = Method::LengthFirst.build(&same_cache).unwrap().solve(Backend::Dense).unwrap().objective;
        prop_assert!(lf >= g2 - 1e-9);
    }

    #[test]
    fn fast_expectation_matches_enumeration(cfg in config(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = cfg.num_users();
        let sizes = (0..cfg.num_files())
            .map(|_| (0..1usize << k).map(|_| rand::Rng::gen_range(&mut rng, 0.0..1.0)).collect())
            .collect();
        let pl = Placement::from_sizes(k, sizes).unwrap();
        let fast = expected_rate(&cfg, &pl).unwrap().expected_rate;
        let slow = expected_rate_exhaustive(&cfg, &pl).unwrap();
        prop_assert!((fast - slow.expected_rate).abs() < 1e-12);
        let mass: f64 = slow.per_demand.unwrap().iter().map(|(d, _)| d.probability(cfg.popularities())).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expansion_then_regrouping_is_identity(cfg in config(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (method, kind) in [
            (Method::FullHet, SchemeKind::FullHet),
            (Method::LengthFirst, SchemeKind::PerFile),
            (Method::TwoTier, SchemeKind::TwoTier),
            (Method::Homogeneous, SchemeKind::Homogeneous),
        ] {
            let cfg = restrict(&cfg, method);
            let bp = method.build(&cfg).unwrap();
            let x = random_feasible_point(&bp, &mut rng, 2);
            let gs = bp.scheme_from_x(&x).unwrap().unwrap();
            let kind = if bp.method() == method { kind } else { SchemeKind::PerFile };
            let pl = expand_to_placement(&cfg, &gs).unwrap();
            let back = group_placement(&cfg, &pl, kind, 0.0).unwrap();
            prop_assert_eq!(expand_to_placement(&cfg, &back).unwrap(), pl);
            if bp.method() == method {
                prop_assert_eq!(back, gs);
            }
        }
    }

    #[test]
    fn shrinking_a_non_maximal_subfile_keeps_the_load(cfg in config(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = cfg.num_users();
        let n = cfg.num_files();
        let sizes: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..1usize << k).map(|_| rand::Rng::gen_range(&mut rng, 0.0..1.0)).collect())
            .collect();
        let pl = Placement::from_sizes(k, sizes.clone()).unwrap();
        for d in Demand::all(k, n).take(16) {
            let before = rate_for_demand(&pl, &d).unwrap();
            for file in 0..n {
                for mask in 0..1usize << k {
                    let mut smaller = sizes.clone();
                    smaller[file][mask] *= 0.5;
                    let after = rate_for_demand(&Placement::from_sizes(k, smaller).unwrap(), &d).unwrap();
                    prop_assert!(after <= before + 1e-15);
                }
            }
        }
    }

    #[test]
    fn sparse_backend_agrees_with_dense(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_bounded_lp(&mut rng);
        let dense = DenseSimplex::new(SolveOptions::default()).solve(&lp).unwrap();
        let sparse = SparseSimplex.solve(&lp).unwrap();
        prop_assert_eq!(dense.status, sparse.status);
        if dense.status == LpStatus::Optimal {
            prop_assert!((dense.objective_value - sparse.objective_value).abs() < 1e-7);
        }
    }
}

#[test]
fn decentralized_never_beats_centralized() {
    for k in 2..=6 {
        for n in 2..=6 {
            for step in 0..=10 * n {
                let m = step as f64 / 10.0;
                let cfg = SystemConfig::uniform(k, n, m).unwrap();
                let opt = expand_to_placement(&cfg, &centralized_scheme(k, n, m).unwrap()).unwrap();
                let dec = expand_to_placement(&cfg, &decentralized_scheme(k, m / n as f64).unwrap()).unwrap();
                let r_opt = expected_rate(&cfg, &opt).unwrap().expected_rate;
                let r_dec = expected_rate(&cfg, &dec).unwrap().expected_rate;
                if step == 0 || step == 10 * n {
                    assert!((r_dec - r_opt).abs() < 1e-12);
                } else {
                    assert!(r_dec > r_opt + 1e-12, "K={k} N={n} M={m}");
                }
            }
        }
    }
}

#[test]
fn simplex_form_uses_all_memory() {
    for m in [0.5, 1.0, 2.5, 3.0, 5.9] {
        let cfg = SystemConfig::uniform(4, 6, m).unwrap();
        let sol = Method::Simplex.build(&cfg).unwrap().solve(Backend::Dense).unwrap();
        let Some(GroupedScheme::Homogeneous { v }) = sol.scheme else { panic!() };
        let used: f64 = (1..=4)
            .map(|j| cachecraft::probability::binom_f(3, j as i64 - 1) * v[j] * 6.0)
            .sum();
        assert!((used - m).abs() < 1e-9, "M={m}: uses {used}");
    }
}

#[test]
fn listed_popularities_round_the_zipf_law() {
    for (p, listed) in paired_popularities().iter().zip(PAIRED_LISTED_POPULARITIES) {
        assert!((p - listed).abs() <= 5e-5 + 1e-12, "{p} vs {listed}");
    }
}
