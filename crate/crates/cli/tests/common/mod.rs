#![allow(dead_code)]

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use xml_ridge::synthetic::{power_law_dataset, SyntheticConfig};
use xml_ridge::{write_dataset, Dataset};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_xml-ridge"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn write(path: &Path, d: &Dataset) {
    write_dataset(d, BufWriter::new(File::create(path).unwrap())).unwrap();
}

/// Synthetic train/test pair written into `dir`.
pub fn synthetic_files(dir: &Path, cfg: &SyntheticConfig, seed: u64, test_rows: usize) -> (PathBuf, PathBuf) {
    let d: Dataset = power_law_dataset(cfg, seed).unwrap();
    let n = d.num_instances();
    let train: Vec<usize> = (0..n - test_rows).collect();
    let test: Vec<usize> = (n - test_rows..n).collect();
    let (tp, ep) = (dir.join("train.txt"), dir.join("test.txt"));
    write(&tp, &d.select_rows(&train));
    write(&ep, &d.select_rows(&test));
    (tp, ep)
}

pub fn small_cfg() -> SyntheticConfig {
    SyntheticConfig {
        instances: 300,
        features: 120,
        labels: 20,
        ..SyntheticConfig::default()
    }
}

/// Parses `k,p_at_k,psp_at_k` CSV rows.
pub fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}
