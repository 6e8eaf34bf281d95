use dselect::harness::config::ExperimentConfig;
use dselect::harness::run_experiment;
use dselect::processes::{self, ProcessSpec};
use dselect::DensityHandle;

const GOLDEN: &str = include_str!("data/golden_iid_uniform_256.csv");

fn config(threads: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml_str(
        "seed = 0\nreplications = 3\nsample_sizes = [256]\n\
         [process]\nkind = \"iid\"\ndensity = \"uniform\"\n\
         [penalty]\nregime = \"beta\"\nK = 4.1\n",
    )
    .unwrap();
    c.threads = threads;
    c
}

#[test]
fn matches_frozen_csv() {
    for threads in [1, 3] {
        let result = run_experiment(&config(threads)).unwrap();
        assert_eq!(String::from_utf8(result.csv_bytes().unwrap()).unwrap(), GOLDEN);
    }
}

#[test]
fn frozen_rows_agree_with_half_interval_counts() {
    // On the two-function model, risk = 4(N₀/n − ½)² and γ = −2((N₀/n)² + (N₁/n)²).
    let mut rows = csv::Reader::from_reader(GOLDEN.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for (rep, row) in rows.records().enumerate() {
        let row = row.unwrap();
        assert_eq!(&row[col("selected_dim")], "2");
        let seed: u64 = row[col("seed")].parse().unwrap();
        let sample = processes::sample(&ProcessSpec::iid(DensityHandle::uniform()), 256, seed);
        let low = sample.values().iter().filter(|&&x| x < 0.5).count() as f64 / 256.0;
        let risk: f64 = row[col("risk_selected")].parse().unwrap();
        let contrast: f64 = row[col("contrast_selected")].parse().unwrap();
        let penalty: f64 = row[col("penalty_selected")].parse().unwrap();
        assert!((risk - 4.0 * (low - 0.5).powi(2)).abs() < 1e-15, "rep {rep}");
        assert!((contrast + 2.0 * (low * low + (1.0 - low).powi(2))).abs() < 1e-15, "rep {rep}");
        assert!((penalty - 4.1 * 2.0 / 256.0).abs() < 1e-15);
    }
}
