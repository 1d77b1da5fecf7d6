#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varsphere::simulation::simulate_sample;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_varsphere")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("failed to launch varsphere")
}

/// Writes a simulated 21-variable dataset (17 numeric, 4 categorical) to `dir/sample.csv`.
pub fn write_sample(dir: &Path, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = simulate_sample(30, std::f64::consts::FRAC_PI_3, 0.1, &mut rng).unwrap();
    let mut header: Vec<String> = (1..=s.numeric.len()).map(|j| format!("x{j}")).collect();
    header.extend((1..=s.categorical.len()).map(|j| format!("c{j}")));
    let mut text = header.join(",") + "\n";
    for i in 0..30 {
        let mut row: Vec<String> = s.numeric.iter().map(|x| format!("{:.12}", x[i])).collect();
        row.extend(s.categorical.iter().map(|c| format!("q{}", c[i] + 1)));
        text += &(row.join(",") + "\n");
    }
    let path = dir.join("sample.csv");
    fs::write(&path, text).unwrap();
    path
}

pub type Snapshot = Vec<(String, Vec<u8>)>;

/// Every file under `dir` with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Snapshot {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}
