mod common;

use common::{naive_auc, oracle_risk, random_dataset};
use hazardboost::exposure::ExposureTable;
use hazardboost::tree::{accumulate_uv, leaf_value, TreeGrower};
use hazardboost::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn small_case(seed: u64) -> (Dataset, SplitCandidateGrid, BoostedHazardModel) {
    let mut rng = StdRng::seed_from_u64(seed);
    let p = 1 + (seed % 3) as usize;
    let ds = random_dataset(&mut rng, 30, p, seed % 4 == 0);
    let grid = build_grid(&ds, 4, QuantileWeighting::Duration);
    // a few trees so F is not constant when the next tree is grown
    let model = fit(&ds, &grid, FitConfig::new(3, 2).with_learning_rate(0.5)).unwrap();
    (ds, grid, model.truncated((seed % 4) as usize))
}

fn piece_log_hazard(table: &ExposureTable, ds: &Dataset, model: &BoostedHazardModel) -> Vec<f64> {
    (0..table.len())
        .map(|p| {
            let (i, k) = table.origin(p);
            model.log_hazard_at(table.ends()[p], &ds.samples[i].epochs[k].values)
        })
        .collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 120, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cached_search_matches_full_search(seed in any::<u64>(), splits in 1usize..6) {
        let (ds, grid, model) = small_case(seed);
        let table = ExposureTable::new(&ds, &grid);
        let f = piece_log_hazard(&table, &ds, &model);
        let grower = TreeGrower::new(&table, &grid, &f);
        let cached = grower.grow(splits, SearchScope::NewLeaves);
        let full = grower.grow(splits, SearchScope::AllLeaves);
        prop_assert_eq!(&cached.tree, &full.tree);
        let a: Vec<_> = cached.splits.iter().map(|s| (s.axis, s.rule, s.score)).collect();
        let b: Vec<_> = full.splits.iter().map(|s| (s.axis, s.rule, s.score)).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn leaf_statistics_match_direct_accumulation(seed in any::<u64>(), splits in 1usize..5) {
        let (ds, grid, model) = small_case(seed);
        let grown = grow_tree(&ds, &grid, &model, splits);
        let mut u_sum = 0.0;
        let mut v_sum = 0.0;
        for (region, value) in grown.tree.leaves() {
            let stats = accumulate_uv(region, &ds, &model, &grid.time_cuts);
            u_sum += stats.u;
            v_sum += stats.v;
            if !grown.splits.is_empty() {
                prop_assert!(close(leaf_value(stats.u, stats.v), value, 1e-12), "{} vs {}", leaf_value(stats.u, stats.v), value);
                // leaf value minimizes U e^-g + V g
                let objective = |g: f64| stats.u * (-g).exp() + stats.v * g;
                prop_assert!(objective(value + 1e-3) > objective(value));
                prop_assert!(objective(value - 1e-3) > objective(value));
            }
        }
        prop_assert!(close(u_sum, grown.root.u, 1e-12));
        prop_assert!(close(v_sum, grown.root.v, 1e-12));
        // the children of the last split are leaves of the final tree
        if let Some(last) = grown.splits.last() {
            for (side, gamma) in [(last.left, last.gamma_left), (last.right, last.gamma_right)] {
                let (region, _) = grown.tree.leaves().find(|(_, v)| *v == gamma).unwrap();
                let stats = accumulate_uv(region, &ds, &model, &grid.time_cuts);
                prop_assert!(close(stats.u, side.u, 1e-12) && close(stats.v, side.v, 1e-12));
            }
        }
    }

    #[test]
    fn single_tree_risk_identity(seed in any::<u64>(), splits in 1usize..5) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, 30, 2, false);
        let grid = build_grid(&ds, 4, QuantileWeighting::Duration);
        let model = fit(&ds, &grid, FitConfig::new(1, splits).with_learning_rate(1.0)).unwrap();
        let grown = grow_tree(&ds, &grid, &model.truncated(0), splits);
        let (u, v) = (grown.root.u, grown.root.v);
        // the root value 0 is not the optimal constant
        let root_adjustment = v * (1.0 + (u / v).ln()) - u;
        let predicted = model.risk_trace[0] + root_adjustment + grown.total_score();
        let after = if grown.splits.is_empty() { model.risk_trace[0] } else { predicted };
        prop_assert!(close(model.risk_trace[1], after, 1e-9), "{} vs {}", model.risk_trace[1], after);
    }

    #[test]
    fn imputation_is_idempotent(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, 10, 2, false);
        for s in &ds.samples {
            let with_terminal = s.clone().with_terminal(vec![9.0, 9.0]);
            let once = impute_terminal_jump(&with_terminal);
            prop_assert_eq!(&impute_terminal_jump(&once), &once);
            prop_assert_eq!(once.terminal_covariates(), &[9.0, 9.0][..]);
            prop_assert_eq!(once.covered_until(), s.followup);
        }
    }

    #[test]
    fn dataset_round_trips_through_csv(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, 10, 3, seed % 2 == 0);
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), &SchemaSpec::Fixed(ds.schema.clone())).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn auc_matches_pair_enumeration(seed in any::<u64>(), t_level in 0.1f64..0.9) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, 20, 1, false);
        let grid = build_grid(&ds, 4, QuantileWeighting::Duration);
        let model = fit(&ds, &grid, FitConfig::new(5, 2).with_learning_rate(0.5)).unwrap();
        let t = 4.0 * t_level;
        let score = |s: &FunctionalSample| model.cumulative_hazard(&s.extended_to(t), t).unwrap();
        let cases: Vec<f64> = ds.samples.iter().filter(|s| s.event && s.followup < t).map(score).collect();
        let controls: Vec<f64> = ds.samples.iter().filter(|s| s.followup > t).map(score).collect();
        match (auc_t(&model, &ds, t), naive_auc(&cases, &controls)) {
            (Ok(est), Some(expected)) => {
                prop_assert!((est.auc - expected).abs() < 1e-15);
                prop_assert_eq!(est.pairs, (cases.len() * controls.len()) as u64);
                prop_assert!((0.0..=1.0).contains(&est.auc));
            }
            (Err(Error::AucUndefined { .. }), None) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn l2_error_is_metric_like(a in prop::collection::vec(0.0f64..10.0, 1..50), shift in -1.0f64..1.0) {
        let b: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let e = l2_error(&a, &b).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e, l2_error(&b, &a).unwrap());
        prop_assert_eq!(l2_error(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(e == 0.0, a == b);
    }

    #[test]
    fn importance_sums_to_total_gain(seed in any::<u64>()) {
        let (ds, grid, _) = small_case(seed);
        let model = fit(&ds, &grid, FitConfig::new(6, 3)).unwrap();
        let report = variable_importance(&model);
        let total: f64 = model.split_records().map(|(_, _, d)| -d).sum();
        let sum: f64 = report.raw.iter().sum();
        prop_assert!((sum - total).abs() <= 1e-9 * total.max(1.0));
        prop_assert!(report.raw.iter().all(|&r| r >= 0.0));
        if !report.degenerate {
            prop_assert!(report.relative.iter().any(|&r| r == 100.0));
        }
    }
}

#[test]
fn risk_trace_matches_brute_force() {
    for seed in 0..100u64 {
        let (ds, grid, _) = small_case(seed);
        let model = fit(&ds, &grid, FitConfig::new(8, 3).with_learning_rate(0.3)).unwrap();
        for m in 0..=8 {
            let oracle = oracle_risk(&model.truncated(m), &ds);
            assert!(close(model.risk_trace[m], oracle, 1e-9), "seed {seed} m {m}");
        }
    }
}

#[test]
fn fits_are_deterministic_across_thread_counts() {
    let spec = SimulationSpec::new(HazardFamily::Beta2, 3000, 4).with_irrelevant(2);
    let ds = simulate(&spec).dataset;
    let grid = build_grid(&ds, 10, QuantileWeighting::Duration);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| model_to_text(&fit(&ds, &grid, FitConfig::new(15, 3)).unwrap()).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}

#[test]
fn truncated_path_equals_shorter_fit() {
    let (ds, grid, _) = small_case(11);
    let long = fit(&ds, &grid, FitConfig::new(12, 2)).unwrap();
    let held_out = small_case(12).0;
    for m in [1, 5, 12] {
        let short = fit(&ds, &grid, FitConfig::new(m, 2)).unwrap();
        assert_eq!(model_to_text(&long.truncated(m)).unwrap(), model_to_text(&short).unwrap());
        if held_out.p() == ds.p() {
            assert_eq!(model_risk(&long.truncated(m), &held_out), model_risk(&short, &held_out));
        }
    }
}

#[test]
fn reloaded_model_predicts_identically() {
    let ds = simulate(&SimulationSpec::new(HazardFamily::Cosine, 400, 8).with_irrelevant(1)).dataset;
    let grid = build_grid(&ds, 10, QuantileWeighting::Duration);
    let model = fit(&ds, &grid, FitConfig::new(30, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.txt");
    write_model(&model, &path).unwrap();
    let back = read_model(&path).unwrap();
    for s in ds.samples.iter().take(50) {
        let t = 0.5 * s.followup;
        let x = s.covariates_at(t);
        assert_eq!(model.predict_hazard(t, x).unwrap(), back.predict_hazard(t, x).unwrap());
        assert_eq!(model.predict_survival(s, t).unwrap(), back.predict_survival(s, t).unwrap());
    }
}

#[test]
fn time_only_splits_give_time_full_importance() {
    // the covariate is constant, so only time can be split
    let samples = (0..40)
        .map(|i| {
            let t = 0.2 + (i % 10) as f64 * 0.3;
            FunctionalSample::new(format!("{i}"), vec![Epoch::new(0.0, t, vec![1.0])], t, i % 3 != 0)
        })
        .collect();
    let ds = Dataset::new(Schema::continuous(1), samples);
    let grid = build_grid(&ds, 5, QuantileWeighting::Duration);
    let model = fit(&ds, &grid, FitConfig::new(10, 2)).unwrap();
    let report = variable_importance(&model);
    assert_eq!(report.relative, vec![100.0, 0.0]);
}

#[test]
fn constant_hazard_is_recovered() {
    let family = HazardFamily::Constant { rate: 1.0, horizon: 1.0 };
    let ds = simulate(&SimulationSpec::new(family, 2000, 21)).dataset;
    let grid = build_grid(&ds, 10, QuantileWeighting::Duration);
    let model = fit(&ds, &grid, FitConfig::new(100, 1)).unwrap();
    for w in model.risk_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
    }
    // Per-decile raw rates of the noise covariate already scatter by about
    // 15% at this size and the fit follows them, so the pointwise bound is
    // loose and the 10% bound applies to the average deviation.
    let empirical = ds.event_count() as f64 / ds.total_followup();
    let deviations: Vec<f64> = sample_evaluation_points(&ds, &family, 1, 5)
        .iter()
        .map(|p| (model.predict_hazard(p.t, &p.x).unwrap() / empirical - 1.0).abs())
        .collect();
    let mean = deviations.iter().sum::<f64>() / deviations.len() as f64;
    let worst = deviations.iter().copied().fold(0.0, f64::max);
    assert!(mean < 0.1, "mean relative deviation {mean}");
    assert!(worst < 0.25, "worst relative deviation {worst}");
}
