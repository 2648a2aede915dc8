mod common;

use std::fs;

use common::*;
use tempfile::tempdir;
use xml_ridge::data::split_indices;
use xml_ridge::metrics::precision_at_k;
use xml_ridge::{parse_dataset, train, Dataset, DenseMatrix, MatrixPayload, RidgeModel, RidgeSolveConfig};

#[test]
fn missing_file_is_io_error() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("m.bin");
    let o = run(&["train", "--train", "/nonexistent/train.txt", "--lambda", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn usage_errors() {
    let dir = tempdir().unwrap();
    let (tr, te) = synthetic_files(dir.path(), &small_cfg(), 1, 50);
    let m = dir.path().join("m.bin");
    let o = run(&["train", "--train", s(&tr), "--lambda-grid", "0.1,1", "--out", s(&m)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tune"));
    assert_eq!(code(&run(&["train", "--train", s(&tr), "--out", s(&m)])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["train", "--train", s(&tr), "--lambda", "1", "--reduce", "pca:3", "--out", s(&m)])), 2);
    assert_eq!(code(&run(&["train", "--train", s(&tr), "--lambda", "1", "--out", s(&m)])), 0);
    let o = run(&["eval", "--model", s(&m), "--test", s(&te), "--k", "1,50"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_data_is_format_error() {
    let dir = tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "2 3 2\n0 0:1.0 7:1.0\n1 1:1.0\n").unwrap();
    let o = run(&["train", "--train", s(&bad), "--lambda", "1", "--out", s(&dir.path().join("m"))]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn singular_system_is_numerical_error() {
    let dir = tempdir().unwrap();
    let d = dir.path().join("d.txt");
    fs::write(&d, "3 2 1\n0 0:1.0\n0 0:2.0\n 0:3.0\n").unwrap();
    let o = run(&["train", "--train", s(&d), "--lambda", "0", "--mode", "primal", "--out", s(&dir.path().join("m"))]);
    assert_eq!(code(&o), 5);
}

#[test]
fn eval_dimension_mismatch_names_both_dims() {
    let dir = tempdir().unwrap();
    let (tr, _) = synthetic_files(dir.path(), &small_cfg(), 2, 50);
    let m = dir.path().join("m.bin");
    assert_eq!(code(&run(&["train", "--train", s(&tr), "--lambda", "1", "--out", s(&m)])), 0);
    let other = dir.path().join("other.txt");
    fs::write(&other, "1 500 20\n0 499:1.0\n").unwrap();
    let o = run(&["eval", "--model", s(&m), "--test", s(&other)]);
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("120") && err.contains("500"), "{err}");
}

#[test]
fn zero_model_precision_is_head_label_frequency() {
    let dir = tempdir().unwrap();
    let (_, te) = synthetic_files(dir.path(), &small_cfg(), 3, 80);
    let test: Dataset = parse_dataset(fs::File::open(&te).map(std::io::BufReader::new).unwrap()).unwrap();
    let zero = RidgeModel::new(MatrixPayload::Dense(DenseMatrix::zeros(120, 20)), 1.0, false);
    let m = dir.path().join("zero.bin");
    zero.save(&m).unwrap();
    let csv = dir.path().join("r.csv");
    let o = run(&["eval", "--model", s(&m), "--test", s(&te), "--train", s(&te), "--out", s(&csv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_csv(&fs::read_to_string(&csv).unwrap());
    let y = test.labels();
    for row in rows {
        let k = row[0] as usize;
        let hits: usize = (0..y.rows()).map(|i| (0..k).filter(|&l| y.get(i, l) != 0.0).count()).sum();
        assert_eq!(row[1], hits as f64 / (k * y.rows()) as f64);
    }
}

fn tune_output(args: &[&str]) -> (Vec<(f64, f64)>, f64) {
    let o = run(args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut rows = Vec::new();
    let mut selected = f64::NAN;
    for line in text.lines().skip(1) {
        if let Some(rest) = line.strip_prefix("selected lambda=") {
            selected = rest.split_whitespace().next().unwrap().parse().unwrap();
        } else if let Some((l, v)) = line.split_once(',') {
            rows.push((l.parse().unwrap(), v.parse().unwrap()));
        }
    }
    (rows, selected)
}

#[test]
fn tune_single_value_grid() {
    let dir = tempdir().unwrap();
    let (tr, _) = synthetic_files(dir.path(), &small_cfg(), 4, 10);
    let (rows, sel) = tune_output(&["tune", "--train", s(&tr), "--lambda-grid", "0.7"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(sel, 0.7);
}

#[test]
fn tune_matches_exhaustive_reevaluation() {
    let dir = tempdir().unwrap();
    let (tr, _) = synthetic_files(dir.path(), &small_cfg(), 5, 10);
    let (rows, sel) = tune_output(&["tune", "--train", s(&tr), "--lambda-grid", "10,0.1,1", "--seed", "3"]);
    let lambdas: Vec<f64> = rows.iter().map(|r| r.0).collect();
    assert_eq!(lambdas, vec![0.1, 1.0, 10.0]);

    let data: Dataset = parse_dataset(fs::File::open(&tr).map(std::io::BufReader::new).unwrap()).unwrap();
    let (ti, vi) = split_indices(data.num_instances(), 0.1, 3).unwrap();
    let (t, v) = (data.select_rows(&ti), data.select_rows(&vi));
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for &(lambda, printed) in &rows {
        let m = train(&t, &RidgeSolveConfig::with_lambda(lambda), None).unwrap();
        let preds = m.predict_topk(v.features(), 5).unwrap();
        let p5 = precision_at_k(&preds, v.labels(), 5).unwrap();
        assert!((p5 - printed).abs() <= 1e-12, "λ={lambda}: {p5} vs {printed}");
        if p5 > best.1 {
            best = (lambda, p5);
        }
    }
    assert_eq!(sel, best.0);
}

#[test]
fn tune_ties_pick_smaller_lambda() {
    let dir = tempdir().unwrap();
    let (tr, _) = synthetic_files(dir.path(), &small_cfg(), 6, 10);
    // λ values this close cannot change a top-5 ranking
    let (rows, sel) = tune_output(&["tune", "--train", s(&tr), "--lambda-grid", "1.0000001,1"]);
    assert_eq!(rows[0].1, rows[1].1);
    assert_eq!(sel, 1.0);
}

#[test]
fn tune_writes_final_model_and_uses_psp_with_weighting() {
    let dir = tempdir().unwrap();
    let (tr, te) = synthetic_files(dir.path(), &small_cfg(), 7, 50);
    let m = dir.path().join("tuned.bin");
    let o = run(&["tune", "--train", s(&tr), "--lambda-grid", "0.1,1", "--ps", "--out", s(&m)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("lambda,PSP@5\n"));
    assert!(RidgeModel::load(&m).unwrap().weighting_applied());
    assert_eq!(code(&run(&["eval", "--model", s(&m), "--test", s(&te)])), 0);
}

#[test]
fn predict_writes_ranked_labels() {
    let dir = tempdir().unwrap();
    let (tr, te) = synthetic_files(dir.path(), &small_cfg(), 8, 30);
    let m = dir.path().join("m.bin");
    assert_eq!(code(&run(&["train", "--train", s(&tr), "--lambda", "1", "--out", s(&m)])), 0);
    let o = run(&["predict", "--model", s(&m), "--test", s(&te), "--k", "3"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 30);
    for line in text.lines() {
        let scores: Vec<f64> = line.split(' ').map(|t| t.split_once(':').unwrap().1.parse().unwrap()).collect();
        assert_eq!(scores.len(), 3);
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn sparsify_zero_threshold_keeps_metrics_and_sweep_is_monotone() {
    let dir = tempdir().unwrap();
    let (tr, te) = synthetic_files(dir.path(), &small_cfg(), 9, 60);
    let m = dir.path().join("m.bin");
    assert_eq!(code(&run(&["train", "--train", s(&tr), "--lambda", "1", "--out", s(&m)])), 0);
    let sm = dir.path().join("s.bin");
    let o = run(&["sparsify", "--model", s(&m), "--threshold", "0", "--test", s(&te), "--out", s(&sm)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let row = &parse_csv(&stdout(&o))[0];
    let model = RidgeModel::load(&m).unwrap();
    assert_eq!(row[2] as usize, model.sparsify(0.0).0.stored_entries());
    assert_eq!(row[4], 1.0);

    let e1 = stdout(&run(&["eval", "--model", s(&m), "--test", s(&te)]));
    let e2 = stdout(&run(&["eval", "--model", s(&sm), "--test", s(&te)]));
    assert_eq!(e1, e2);

    let o = run(&["sparsify", "--model", s(&m), "--threshold", "0.2,0,0.01,0.05,0.1"]);
    let kept: Vec<f64> = parse_csv(&stdout(&o)).iter().map(|r| r[1]).collect();
    assert_eq!(kept.len(), 5);
    assert!(kept.windows(2).all(|w| w[0] >= w[1]), "{kept:?}");
    assert_eq!(code(&run(&["sparsify", "--model", s(&m), "--threshold", "0,1", "--out", s(&sm)])), 2);
}

#[test]
fn stats_histogram_and_contribution_identity() {
    let dir = tempdir().unwrap();
    let (tr, te) = synthetic_files(dir.path(), &small_cfg(), 10, 60);
    let m = dir.path().join("m.bin");
    assert_eq!(code(&run(&["train", "--train", s(&tr), "--lambda", "1", "--out", s(&m)])), 0);
    let prefix = dir.path().join("stats");
    let o = run(&["stats", "--train", s(&tr), "--model", s(&m), "--test", s(&te), "--k", "5", "--out", s(&prefix)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hist = fs::read_to_string(dir.path().join("stats.labels.csv")).unwrap();
    assert_eq!(hist.lines().count(), 21);
    let contrib = fs::read_to_string(dir.path().join("stats.contribution.csv")).unwrap();
    let hits: f64 = parse_csv(&contrib).iter().map(|r| r[3]).sum();
    let csv = dir.path().join("e.csv");
    run(&["eval", "--model", s(&m), "--test", s(&te), "--k", "5", "--out", s(&csv)]);
    let p5 = parse_csv(&fs::read_to_string(&csv).unwrap())[0][1];
    assert!((hits - 5.0 * 60.0 * p5).abs() < 1e-9);

    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "2 3 4\n 0:1.0\n 1:1.0\n").unwrap();
    let o = run(&["stats", "--train", s(&empty)]);
    assert_eq!(code(&o), 0);
    let counts: Vec<f64> = parse_csv(&stdout(&o)).iter().map(|r| r[2]).collect();
    assert_eq!(counts, vec![0.0; 4]);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempdir().unwrap();
    let (tr, te) = synthetic_files(dir.path(), &small_cfg(), 11, 40);
    let m = dir.path().join("m.bin");
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("train = {:?}\nlambda = 1000.0\nk = [1, 2]\nnormalize-rows = true\n", s(&tr))).unwrap();
    let o = run(&["train", "--config", s(&cfg), "--lambda", "0.5", "--out", s(&m)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let model = RidgeModel::load(&m).unwrap();
    assert_eq!(model.lambda(), 0.5);
    assert_eq!(model.provenance["normalize_rows"], "true");
    let o = run(&["eval", "--config", s(&cfg), "--model", s(&m), "--test", s(&te)]);
    assert_eq!(stdout(&o).lines().count(), 4);
    fs::write(&cfg, "lamda = 1.0\n").unwrap();
    assert_eq!(code(&run(&["train", "--config", s(&cfg)])), 2);
}

#[test]
fn embeddings_and_reduction_flow_through_eval() {
    let dir = tempdir().unwrap();
    let (tr, te) = synthetic_files(dir.path(), &small_cfg(), 12, 40);
    let emb = |rows: usize, name: &str| {
        let p = dir.path().join(name);
        let text: String = (0..rows).map(|i| format!("{} {}\n", (i % 7) as f64 * 0.1, 1.0)).collect();
        fs::write(&p, text).unwrap();
        p
    };
    let (etr, ete) = (emb(260, "tr.emb"), emb(40, "te.emb"));
    for reduce in ["svd:20", "rp:30", "rp:30:0.5"] {
        let m = dir.path().join(format!("m-{}.bin", reduce.replace(':', "_")));
        let o = run(&[
            "train", "--train", s(&tr), "--dense-embeddings", s(&etr), "--normalize-rows", "--reduce", reduce,
            "--lambda", "1", "--out", s(&m),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(m.with_file_name(format!("{}.transform", m.file_name().unwrap().to_str().unwrap())).exists());
        assert_eq!(code(&run(&["eval", "--model", s(&m), "--test", s(&te)])), 2);
        let o = run(&["eval", "--model", s(&m), "--test", s(&te), "--test-dense-embeddings", s(&ete)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn binary_embeddings_need_dimension() {
    let dir = tempdir().unwrap();
    let (tr, _) = synthetic_files(dir.path(), &small_cfg(), 13, 40);
    let p = dir.path().join("e.f32");
    let bytes: Vec<u8> = (0..260 * 2).flat_map(|i| (i as f32 * 0.01).to_le_bytes()).collect();
    fs::write(&p, bytes).unwrap();
    let m = dir.path().join("m.bin");
    let base = ["train", "--train", s(&tr), "--dense-embeddings", s(&p), "--lambda", "1", "--out", s(&m)];
    assert_eq!(code(&run(&base)), 2);
    let mut with_dim = base.to_vec();
    with_dim.extend(["--dense-dim", "2"]);
    assert_eq!(code(&run(&with_dim)), 0);
    assert_eq!(RidgeModel::load(&m).unwrap().feature_dim(), 122);
}
