//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line;
//! run with `--nocapture` to see them.

use std::sync::OnceLock;

use grkmeans::evaluation::{
    benchmark_methods, exhaustive_matching, hungarian_matching, transform_features,
};
use grkmeans::kmeans::{
    fit_with, kmeanspp_indices, lloyd, restart_rng, Euclidean, WeightedEuclidean,
};
use grkmeans::preprocess::feature_map_scales;
use grkmeans::rng::derive_seed;
use grkmeans::weights::compute_weights;
use grkmeans::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

const BASE_SEED: u64 = 2017;

fn data_path(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn iris() -> LabeledDataset {
    load_csv(data_path("iris.csv"), &LabelColumn::Name("class".into())).unwrap()
}

fn wine() -> LabeledDataset {
    load_csv(data_path("wine.csv"), &LabelColumn::Name("class".into())).unwrap()
}

fn verdict(id: &str, pass: bool, detail: String) {
    println!(
        "criterion {id}: {} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn mean_error(report: &BenchmarkReport, scheme: WeightScheme, p: u32, scaling: bool) -> f64 {
    report.cell(scheme, p, scaling).unwrap().mean_error_rate
}

#[test]
fn criterion_1_iris_scaled_ranking() {
    let start = std::time::Instant::now();
    let report = run_benchmark("iris", &iris(), &ExperimentConfig::new(1000, BASE_SEED)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let km = mean_error(&report, WeightScheme::Uniform, 1, true);
    let gr = mean_error(&report, WeightScheme::Gr, 1, true);
    let cv = mean_error(&report, WeightScheme::Cv, 1, true);
    let gr2 = mean_error(&report, WeightScheme::Gr, 2, true);
    let cv2 = mean_error(&report, WeightScheme::Cv, 2, true);
    let band = |x: f64| (0.02..=0.08).contains(&x);
    let pass = (gr2 - cv2).abs() <= 0.03
        && gr2.max(cv2) < cv
        && cv < gr
        && gr < km
        && (0.12..=0.22).contains(&km)
        && band(gr2)
        && band(cv2)
        && elapsed < 60.0;
    verdict(
        "1",
        pass,
        format!(
            "k-means {} gr {} cv {} gr^2 {} cv^2 {} in {elapsed:.1}s",
            pct(km),
            pct(gr),
            pct(cv),
            pct(gr2),
            pct(cv2)
        ),
    );
}

#[test]
fn criterion_2_wine() {
    let start = std::time::Instant::now();
    let report = run_benchmark("wine", &wine(), &ExperimentConfig::new(1000, BASE_SEED)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let raw: Vec<f64> = report
        .cells
        .iter()
        .filter(|c| !c.method.scaling)
        .map(|c| c.mean_error_rate)
        .collect();
    let scaled: Vec<f64> = report
        .cells
        .iter()
        .filter(|c| c.method.scaling)
        .map(|c| c.mean_error_rate)
        .collect();
    let km = mean_error(&report, WeightScheme::Uniform, 1, true);
    let raw_ok = raw.iter().all(|e| (e - 0.2978).abs() <= 0.03);
    let km_best = scaled.iter().all(|&e| km <= e);
    let pass = raw_ok && km_best && (0.02..=0.07).contains(&km) && elapsed < 120.0;
    let fmt = |v: &[f64]| v.iter().map(|&e| pct(e)).collect::<Vec<_>>().join(" ");
    verdict(
        "2",
        pass,
        format!(
            "raw [{}] scaled [{}] in {elapsed:.1}s",
            fmt(&raw),
            fmt(&scaled)
        ),
    );
}

fn trial_config(k: usize, seed: u64) -> KMeansConfig {
    KMeansConfig::new(k)
        .with_n_init(10)
        .with_seed(derive_seed(seed, 1))
}

#[test]
fn criterion_3_normalization_toy() {
    let mut good = 0;
    for t in 0..100 {
        let seed = derive_seed(BASE_SEED, t);
        let data = gen_norm_toy(50, seed).unwrap();
        let cfg = trial_config(2, seed);
        let err = |scaling| {
            let out = cluster(
                data.features(),
                &MethodSpec::new(WeightScheme::Uniform, 1, scaling),
                &cfg,
            )
            .unwrap();
            error_rate(&out.model.assignments, data.labels(), 2).unwrap()
        };
        if err(false) >= 0.4 && err(true) == 0.0 {
            good += 1;
        }
    }
    verdict("3", good >= 95, format!("{good}/100 trials"));
}

#[test]
fn criterion_4_gap_ratio_toy() {
    let mut good = 0;
    for t in 0..100 {
        let seed = derive_seed(BASE_SEED, t);
        let data = gen_gapratio_toy(50, seed).unwrap();
        let cfg = trial_config(2, seed);
        let run = |scheme| {
            let out = cluster(data.features(), &MethodSpec::new(scheme, 1, true), &cfg).unwrap();
            let err = error_rate(&out.model.assignments, data.labels(), 2).unwrap();
            (out.weights.values, err)
        };
        let (gw, gerr) = run(WeightScheme::Gr);
        let (cw, cerr) = run(WeightScheme::Cv);
        if gw[1] > gw[0] && gerr == 0.0 && cw[0] > cw[1] && cerr >= 0.3 {
            good += 1;
        }
    }
    verdict("4", good >= 95, format!("{good}/100 trials"));
}

const LEGO_RUNS: usize = 98;
const LEGO_SEED: u64 = 3;
const LEGO_P_MAX: u32 = 12;

struct LegoCurves {
    km: f64,
    gr: Vec<f64>,
    cv: Vec<f64>,
    gr_blue: Vec<f64>,
    cv_blue: Vec<f64>,
}

fn lego_curves() -> &'static LegoCurves {
    static CURVES: OnceLock<LegoCurves> = OnceLock::new();
    CURVES.get_or_init(|| {
        let cfg = ExperimentConfig::new(LEGO_RUNS, LEGO_SEED);
        let plain = LegoGenConfig::default();
        let blue = LegoGenConfig {
            blue_shift: 50.0,
            ..plain.clone()
        };
        let curve = |src: &LegoGenConfig, scheme| -> Vec<f64> {
            sweep_exponent(src, scheme, 1..=LEGO_P_MAX, true, &cfg)
                .unwrap()
                .iter()
                .map(|r| r.failure_rate)
                .collect()
        };
        LegoCurves {
            km: run_experiment(
                &plain,
                &MethodSpec::new(WeightScheme::Uniform, 1, true),
                &cfg,
            )
            .unwrap()
            .failure_rate,
            gr: curve(&plain, WeightScheme::Gr),
            cv: curve(&plain, WeightScheme::Cv),
            gr_blue: curve(&blue, WeightScheme::Gr),
            cv_blue: curve(&blue, WeightScheme::Cv),
        }
    })
}

fn fmt_curve(c: &[f64]) -> String {
    c.iter()
        .map(|f| format!("{:.0}", 100.0 * f))
        .collect::<Vec<_>>()
        .join(",")
}

#[test]
fn criterion_5a_lego_raw_failures() {
    let cfg = ExperimentConfig::new(LEGO_RUNS, LEGO_SEED);
    let lego = LegoGenConfig::default();
    let rates: Vec<(String, f64)> = benchmark_methods()
        .into_iter()
        .filter(|m| !m.scaling)
        .map(|m| {
            (
                m.label(),
                run_experiment(&lego, &m, &cfg).unwrap().failure_rate,
            )
        })
        .collect();
    let pass = rates.iter().all(|(_, f)| *f >= 0.8);
    let detail = rates
        .iter()
        .map(|(l, f)| format!("{l} {}", pct(*f)))
        .collect::<Vec<_>>()
        .join(", ");
    verdict("5a", pass, detail);
}

#[test]
fn criterion_5b_lego_gr_beats_kmeans() {
    let c = lego_curves();
    // "materially": at least ten points lower
    let pass = c.gr[0] + 0.10 <= c.km;
    verdict(
        "5b",
        pass,
        format!("gr p=1 {} vs k-means {}", pct(c.gr[0]), pct(c.km)),
    );
}

#[test]
fn criterion_5c_lego_gr_exponent_curve() {
    let c = lego_curves();
    let one_trial = 1.0 / LEGO_RUNS as f64 + 1e-12;
    let non_increasing = (1..9).all(|i| c.gr[i] <= c.gr[i - 1] + one_trial);
    let reaches_low = (7..=12).any(|p| c.gr[p - 1] <= 0.05);
    verdict(
        "5c",
        non_increasing && reaches_low,
        format!(
            "gr failure p=1..{LEGO_P_MAX}: [{}]%, non-increasing to p=9: {non_increasing}, <=5% in p=7..12: {reaches_low}",
            fmt_curve(&c.gr)
        ),
    );
}

#[test]
fn criterion_5d_lego_blue_shift() {
    let c = lego_curves();
    let gr_change =
        c.gr.iter()
            .zip(&c.gr_blue)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
    let cv_degrade =
        c.cv.iter()
            .zip(&c.cv_blue)
            .take(10)
            .map(|(a, b)| b - a)
            .fold(f64::MIN, f64::max);
    let pass = gr_change <= 0.05 + 1e-12 && cv_degrade >= 0.20 - 1e-12;
    verdict(
        "5d",
        pass,
        format!(
            "gr max change {} ; cv max degradation {} ; cv [{}]% -> [{}]%",
            pct(gr_change),
            pct(cv_degrade),
            fmt_curve(&c.cv),
            fmt_curve(&c.cv_blue)
        ),
    );
}

fn run_property<S: Strategy>(
    id: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> std::result::Result<(), TestCaseError>,
) where
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let outcome = runner.run(&strategy, test);
    let detail = match &outcome {
        Ok(()) => format!("{cases} cases"),
        Err(TestError::Fail(reason, value)) => format!("{reason} for input {value:?}"),
        Err(e) => e.to_string(),
    };
    verdict(id, outcome.is_ok(), detail);
}

fn matrix(
    rows: std::ops::RangeInclusive<usize>,
    cols: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = FeatureMatrix> {
    (rows, cols).prop_flat_map(|(m, n)| {
        prop::collection::vec(-100.0..100.0f64, m * n)
            .prop_map(move |v| FeatureMatrix::new(m, n, v).unwrap())
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn criterion_6a_lloyd_monotone() {
    run_property(
        "6a",
        200,
        (matrix(4..=40, 1..=4), 1usize..=4, any::<u64>()),
        |(x, k, seed)| {
            let cfg = KMeansConfig::new(k).with_seed(seed);
            let idx = kmeanspp_indices(&x, k, &mut restart_rng(seed, 0), &Euclidean).unwrap();
            let (_, trace) = lloyd(&x, x.select_rows(&idx), &cfg, &Euclidean).unwrap();
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "trace rose: {trace:?}");
            }
            Ok(())
        },
    );
}

#[test]
fn criterion_6b_feature_map_equivalence() {
    let schemes = prop::sample::select(vec![
        WeightScheme::Uniform,
        WeightScheme::Cv,
        WeightScheme::Gr,
    ]);
    run_property(
        "6b",
        200,
        (
            matrix(6..=40, 2..=5),
            schemes,
            1u32..=4,
            1usize..=4,
            any::<u64>(),
        ),
        |(x, scheme, p, k, seed)| {
            let Ok(w) = compute_weights(scheme, &x) else {
                return Ok(());
            };
            let w = w.with_exponent(p);
            let z = standardize(&x).unwrap();
            let cfg = KMeansConfig::new(k).with_seed(seed).with_n_init(3);
            let factors: Vec<f64> = feature_map_scales(&w).iter().map(|s| s * s).collect();
            let weighted = fit_with(&z, &cfg, &WeightedEuclidean { factors }).unwrap();
            let mapped = fit(&apply_feature_map(&z, &w).unwrap(), &cfg).unwrap();
            prop_assert_eq!(&weighted.assignments, &mapped.assignments);
            prop_assert!(rel_close(weighted.inertia, mapped.inertia, 1e-9));
            prop_assert!(rel_close(weighted.objective, mapped.objective, 1e-9));
            Ok(())
        },
    );
}

fn brute_force_inertia(x: &FeatureMatrix, k: usize) -> f64 {
    let m = x.n_rows();
    let n = x.n_cols();
    let mut labels = vec![0usize; m];
    let mut best = f64::INFINITY;
    let total = k.pow(m as u32);
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        let mut sums = vec![vec![0.0; n]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (j, s) in sums[l].iter_mut().enumerate() {
                *s += x.get(i, j);
            }
        }
        if counts.contains(&0) {
            continue;
        }
        let sse: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                (0..n)
                    .map(|j| (x.get(i, j) - sums[l][j] / counts[l] as f64).powi(2))
                    .sum::<f64>()
            })
            .sum();
        best = best.min(sse);
    }
    best
}

#[test]
fn criterion_6c_global_optimum_small_instances() {
    run_property(
        "6c",
        200,
        (matrix(3..=8, 1..=3), 1usize..=3, any::<u64>()),
        |(x, k, seed)| {
            prop_assume!(k <= x.n_rows());
            let model = fit(&x, &KMeansConfig::new(k).with_seed(seed).with_n_init(20)).unwrap();
            let best = brute_force_inertia(&x, k);
            prop_assert!(
                rel_close(model.inertia, best, 1e-9) || (model.inertia - best).abs() <= 1e-9,
                "fit {} vs optimum {best}",
                model.inertia
            );
            Ok(())
        },
    );
}

#[test]
fn criterion_6d_gap_ratio_invariance() {
    let data = (3usize..=30, 1usize..=4).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(-1000i32..1000, m * n).prop_map(move |v| (m, n, v)),
            prop::collection::vec(-1_000_000i32..1_000_000, n),
            prop::collection::vec(-20i32..20, n),
        )
    });
    run_property("6d", 300, data, |((m, n, v), shifts, exps)| {
        let x = FeatureMatrix::new(m, n, v.iter().map(|&a| a as f64).collect()).unwrap();
        let Ok(base) = gr_weights(&x) else {
            return Ok(());
        };
        let shifted = x.map_cells(|j, a| a + shifts[j] as f64);
        let scaled = x.map_cells(|j, a| a * 2f64.powi(exps[j]));
        let uniform_scale = x.map_cells(|_, a| a * 3.0);
        prop_assert_eq!(&gr_weights(&shifted).unwrap().values, &base.values);
        prop_assert_eq!(&gr_weights(&scaled).unwrap().values, &base.values);
        let uw = gr_weights(&uniform_scale).unwrap();
        for (a, b) in uw.values.iter().zip(&base.values) {
            prop_assert!(rel_close(*a, *b, 1e-12));
        }
        Ok(())
    });
}

#[test]
fn criterion_6e_weights_sum_to_one() {
    let schemes = prop::sample::select(vec![
        WeightScheme::Uniform,
        WeightScheme::Cv,
        WeightScheme::Gr,
    ]);
    run_property(
        "6e",
        500,
        (matrix(3..=50, 1..=8), schemes),
        |(x, scheme)| {
            if let Ok(w) = compute_weights(scheme, &x) {
                let sum: f64 = w.values.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9, "sum {sum}");
                prop_assert!(w.values.iter().all(|v| *v >= 0.0));
            }
            Ok(())
        },
    );
}

#[test]
fn criterion_6f_matching_equals_enumeration() {
    let tables = (1usize..=5)
        .prop_flat_map(|k| prop::collection::vec(prop::collection::vec(0u64..50, k), k));
    run_property("6f", 1000, tables, |table| {
        let k = table.len();
        prop_assert_eq!(hungarian_matching(&table), exhaustive_matching(&table));
        let mut assignments = Vec::new();
        let mut labels = Vec::new();
        for (c, row) in table.iter().enumerate() {
            for (l, &count) in row.iter().enumerate() {
                for _ in 0..count {
                    assignments.push(c);
                    labels.push(l);
                }
            }
        }
        if !labels.is_empty() {
            let expected =
                (labels.len() as u64 - exhaustive_matching(&table)) as f64 / labels.len() as f64;
            prop_assert_eq!(error_rate(&assignments, &labels, k).unwrap(), expected);
        }
        Ok(())
    });
}

#[test]
fn criterion_6g_determinism() {
    let cfg = ExperimentConfig::new(20, 99);
    let json = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let iris_json =
                serde_json::to_string(&run_benchmark("iris", &iris(), &cfg).unwrap()).unwrap();
            let lego = serde_json::to_string(
                &run_benchmark("lego", &LegoGenConfig::default(), &cfg).unwrap(),
            )
            .unwrap();
            let (w, z) = transform_features(
                iris().features(),
                &MethodSpec::new(WeightScheme::Gr, 3, true),
            )
            .unwrap();
            let single = serde_json::to_string(&(w, z)).unwrap();
            iris_json + &lego + &single
        })
    };
    let first = json(1);
    let second = json(1);
    let parallel = json(4);
    let pass = first == second && first == parallel;
    verdict(
        "6g",
        pass,
        format!("{} bytes compared across 3 runs", first.len()),
    );
}
