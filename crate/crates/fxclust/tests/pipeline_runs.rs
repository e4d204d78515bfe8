use std::path::Path;

use fxclust::formats::{dendrogram_from_json, matrix_from_csv, matrix_from_json};
use fxclust::ingest::{align, write_wide_csv, AlignPolicy};
use fxclust::pipeline::{dataset_returns, run, RunConfig, ThresholdMode};
use fxclust::synth::{planted_panel, random_walk_panel};
use fxclust::RateSeries;
use fxclust_core::metrics::Histogram;
use fxclust_core::{cdcc, similarity_distance, Linkage, Metric};

fn write_panel(dir: &Path, series: &[RateSeries]) -> std::path::PathBuf {
    let path = dir.join("rates.csv");
    std::fs::write(
        &path,
        write_wide_csv(&align(series, AlignPolicy::Intersect).unwrap()),
    )
    .unwrap();
    path
}

fn config(rates: &Path, out: &Path) -> RunConfig {
    RunConfig {
        rates: rates.to_path_buf(),
        out_dir: out.to_path_buf(),
        ..RunConfig::default()
    }
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn single_period_matrix_matches_pairwise_calls() {
    let tmp = tempfile::tempdir().unwrap();
    let series = random_walk_panel(5, 600, 17);
    let rates = write_panel(tmp.path(), &series);
    let out = tmp.path().join("out");
    let report = run(&config(&rates, &out)).unwrap();
    assert_eq!(report.periods.len(), 1);
    assert_eq!(report.cdcc, vec![vec![1.0]]);

    let dm = matrix_from_csv(&read(out.join("period_1/matrix.csv"))).unwrap();
    assert_eq!(
        dm,
        matrix_from_json(&read(out.join("period_1/matrix.json"))).unwrap()
    );
    let ds = align(&series, AlignPolicy::Intersect).unwrap();
    let hist: Vec<Histogram> = dataset_returns(&ds, 1)
        .unwrap()
        .iter()
        .map(|r| Histogram::from_values(&r.normalized, 0.05).unwrap())
        .collect();
    for i in 0..5 {
        for j in 0..5 {
            let direct = if i == j {
                0.0
            } else {
                similarity_distance(&hist[i], &hist[j]).unwrap()
            };
            assert_eq!(dm.get(i, j).to_bits(), direct.to_bits(), "({i},{j})");
        }
    }
    let dg = dendrogram_from_json(&read(out.join("period_1/dendrogram.json"))).unwrap();
    assert_eq!(dg.labels(), dm.labels());
    assert_eq!(report.moments.len(), 5);
    assert!(report
        .moments
        .iter()
        .all(|m| m.kurtosis > 1.0 && m.variance > 0.0));
}

#[test]
fn two_periods_give_unit_diagonal_cdcc() {
    let tmp = tempfile::tempdir().unwrap();
    let rates = write_panel(tmp.path(), &random_walk_panel(5, 801, 3));
    let out = tmp.path().join("out");
    let report = run(&RunConfig {
        periods: 2,
        ..config(&rates, &out)
    })
    .unwrap();
    assert_eq!(report.periods.len(), 2);
    assert_eq!(report.dropped_dates, 1);
    assert_eq!(report.periods[0].n_dates, 400);
    assert!(report.periods[0].end < report.periods[1].start);
    let t = &report.cdcc;
    assert_eq!((t[0][0], t[1][1]), (1.0, 1.0));
    assert_eq!(t[0][1], t[1][0]);
    let a = dendrogram_from_json(&read(out.join("period_1/dendrogram.json"))).unwrap();
    let b = dendrogram_from_json(&read(out.join("period_2/dendrogram.json"))).unwrap();
    assert_eq!(t[0][1], cdcc(&a, &b).unwrap());
}

fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let mut agree = 0usize;
    for i in 0..n {
        for j in 0..i {
            agree += usize::from((a[i] == a[j]) == (b[i] == b[j]));
        }
    }
    agree as f64 / (n * (n - 1) / 2) as f64
}

#[test]
fn planted_groups_are_recovered() {
    let tmp = tempfile::tempdir().unwrap();
    let (series, truth) = planted_panel(5, 2000, 42);
    let rates = write_panel(tmp.path(), &series);
    let out = tmp.path().join("out");
    let report = run(&config(&rates, &out)).unwrap();
    let assignment: Vec<usize> = read(out.join("period_1/cut.csv"))
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rand_index(&assignment, &truth), 1.0);
    assert_eq!(report.periods[0].n_clusters_ge2, 2);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let rates = write_panel(tmp.path(), &random_walk_panel(8, 500, 5));
    let cfg = RunConfig {
        periods: 2,
        dump_returns: true,
        ..config(&rates, &tmp.path().join("a"))
    };
    run(&cfg).unwrap();
    run(&RunConfig {
        out_dir: tmp.path().join("b"),
        ..cfg.clone()
    })
    .unwrap();
    let manifest = read(tmp.path().join("a/manifest.json"));
    assert_eq!(manifest, read(tmp.path().join("b/manifest.json")));
    let doc: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let files = doc["files"].as_array().unwrap();
    assert!(files.len() > 10);
    for f in files {
        let rel = f["path"].as_str().unwrap();
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(rel)).unwrap(),
            std::fs::read(tmp.path().join("b").join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn every_metric_and_linkage_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let rates = write_panel(tmp.path(), &random_walk_panel(6, 300, 9));
    for metric in [Metric::JsSqrt, Metric::KurtosisDelta, Metric::Pearson] {
        for linkage in Linkage::ALL {
            let out = tmp.path().join(format!("{metric}-{linkage}"));
            let report = run(&RunConfig {
                metric,
                linkage,
                threshold: ThresholdMode::Fixed(0.5),
                render: false,
                ..config(&rates, &out)
            })
            .unwrap();
            assert_eq!(report.settings.metric, metric.as_str());
            assert!(!out.join("period_1/dendrogram.svg").exists());
            let dm = matrix_from_csv(&read(out.join("period_1/matrix.csv"))).unwrap();
            assert_eq!(dm.metric(), metric);
        }
    }
}

#[test]
fn bridge_run_compares_numeraires() {
    let tmp = tempfile::tempdir().unwrap();
    let series = random_walk_panel(6, 400, 21);
    let rates = write_panel(tmp.path(), &series);
    // bridge quoted on every other date only
    let mut text = String::from("date,SDR\n");
    for (k, d) in series[0].dates().iter().enumerate().step_by(2) {
        text.push_str(&format!("{d},{}\n", 0.6 + 0.1 * ((k as f64) / 40.0).sin()));
    }
    let bridge = tmp.path().join("bridge.csv");
    std::fs::write(&bridge, text).unwrap();
    let out = tmp.path().join("out");
    let report = run(&RunConfig {
        bridge: Some(bridge),
        orientation: Some(fxclust::Orientation::NumerairePerAsset),
        numeraire: "USD".into(),
        ..config(&rates, &out)
    })
    .unwrap();
    let cmp = report.numeraire_comparison.unwrap();
    assert_eq!(
        (cmp.base.as_str(), cmp.bridge.as_str(), cmp.n_dates),
        ("USD", "SDR", 200)
    );
    assert!((-1.0..=1.0).contains(&cmp.cdcc));
    assert!(out.join("numeraire/USD/dendrogram.json").exists());
    assert!(out.join("numeraire/SDR/dendrogram.json").exists());

    // a missing orientation is an input error naming the stage
    let err = run(&RunConfig {
        bridge: Some(tmp.path().join("bridge.csv")),
        ..config(&rates, &tmp.path().join("out2"))
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().starts_with("redenominate"), "{err}");
}

#[test]
fn errors_carry_stage_and_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let flat = tmp.path().join("flat.csv");
    std::fs::write(
        &flat,
        "date,A,B\n2000-01-01,1,1\n2000-01-02,1,2\n2000-01-03,1,3\n2000-01-04,1,5\n",
    )
    .unwrap();
    let err = run(&config(&flat, &tmp.path().join("o"))).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().starts_with("returns"), "{err}");

    let err = run(&config(
        &tmp.path().join("missing.csv"),
        &tmp.path().join("o"),
    ))
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().starts_with("ingest"), "{err}");

    let rates = write_panel(tmp.path(), &random_walk_panel(3, 8, 1));
    let err = run(&RunConfig {
        periods: 3,
        ..config(&rates, &tmp.path().join("o"))
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().starts_with("split"), "{err}");
}

/// Independent draws per asset: the groups still form the top split of the
/// tree, but the auto threshold, which maximizes the number of clusters,
/// cuts inside the groups.
#[test]
fn independent_draws_split_at_the_root() {
    use fxclust::ingest::AssetMeta;
    use fxclust::synth::{daily_dates, prices_from_returns};
    use fxclust_core::{agglomerate, best_threshold, cut, distance_matrix};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal, StudentT};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let dates = daily_dates(20_001);
    let normal = Normal::new(0.0, 0.01).unwrap();
    let heavy = StudentT::new(3.0).unwrap();
    let series: Vec<RateSeries> = (0..20)
        .map(|i| {
            let r: Vec<f64> = (0..20_000)
                .map(|_| {
                    if i < 10 {
                        normal.sample(&mut rng)
                    } else {
                        0.01 * heavy.sample(&mut rng)
                    }
                })
                .collect();
            RateSeries::new(
                AssetMeta::new(format!("A{i:02}")),
                dates.clone(),
                prices_from_returns(1.0, &r),
            )
            .unwrap()
        })
        .collect();
    let ds = align(&series, AlignPolicy::Intersect).unwrap();
    let dm = distance_matrix(&dataset_returns(&ds, 1).unwrap(), Metric::JsSqrt, 0.05).unwrap();
    let dg = agglomerate(&dm, Linkage::Complete).unwrap();
    let truth: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
    let top = cut(&dg, dg.max_height());
    assert_eq!(rand_index(&top.assignment, &truth), 1.0);
    let (_, auto) = best_threshold(&dg);
    assert!(auto.n_clusters_ge2 > 2);
}
