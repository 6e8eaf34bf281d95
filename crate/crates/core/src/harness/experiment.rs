use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSystem;
use crate::calibration::slope_heuristic;
use crate::error::{Error, Result};
use crate::estimator::{projection_chain, select_from_chain, PenaltySpec};
use crate::harness::config::{ExperimentConfig, PenaltyPlan};
use crate::harness::{mean, median, quantile};
use crate::models::{CollectionDescriptor, ModelCollection};
use crate::processes::{self, ProcessSpec};
use crate::risk::{oracle_from_chain, oracle_ratio, theorem_ratios, TrueCoefficients};

pub const CSV_COLUMNS: [&str; 11] = [
    "n",
    "replication",
    "seed",
    "selected_dim",
    "oracle_dim",
    "contrast_selected",
    "penalty_selected",
    "risk_selected",
    "oracle_risk",
    "oracle_ratio",
    "wall_ms",
];

/// One replication. The first eleven fields are the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub selected_dim: usize,
    pub oracle_dim: usize,
    pub contrast_selected: f64,
    pub penalty_selected: f64,
    pub risk_selected: f64,
    pub oracle_risk: f64,
    pub oracle_ratio: f64,
    pub wall_ms: u64,
    pub bias_sq_selected: f64,
    /// risk / inf_m (bias² + pen)
    pub theorem_ratio: f64,
    /// Same, with the infimum over D_m ≥ log n.
    pub theorem_ratio_restricted: Option<f64>,
    /// 2λ* when the penalty was calibrated on this sample.
    pub calibrated_slope: Option<f64>,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

impl ReplicationRecord {
    fn csv_fields(&self) -> [String; 11] {
        [
            self.n.to_string(),
            self.replication.to_string(),
            self.seed.to_string(),
            self.selected_dim.to_string(),
            self.oracle_dim.to_string(),
            float(self.contrast_selected),
            float(self.penalty_selected),
            float(self.risk_selected),
            float(self.oracle_risk),
            float(self.oracle_ratio),
            self.wall_ms.to_string(),
        ]
    }
}

pub fn write_csv_header<W: Write>(writer: &mut csv::Writer<W>) -> Result<()> {
    writer.write_record(CSV_COLUMNS)?;
    Ok(())
}

pub fn write_csv_rows<W: Write>(writer: &mut csv::Writer<W>, records: &[ReplicationRecord]) -> Result<()> {
    for r in records {
        writer.write_record(r.csv_fields())?;
    }
    writer.flush()?;
    Ok(())
}

/// Header plus rows.
pub fn write_csv<W: Write>(records: &[ReplicationRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    write_csv_header(&mut writer)?;
    write_csv_rows(&mut writer, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub replications: usize,
    pub collection: CollectionDescriptor,
    pub mean_risk: f64,
    pub median_risk: f64,
    pub risk_q05: f64,
    pub risk_q25: f64,
    pub risk_q75: f64,
    pub risk_q95: f64,
    pub median_oracle_ratio: f64,
    pub p95_oracle_ratio: f64,
    pub median_theorem_ratio: f64,
    pub p95_theorem_ratio: f64,
    pub median_theorem_ratio_restricted: Option<f64>,
    pub p95_theorem_ratio_restricted: Option<f64>,
    pub selected_dims: BTreeMap<usize, usize>,
}

impl SizeSummary {
    pub fn from_records(collection: CollectionDescriptor, records: &[ReplicationRecord]) -> Self {
        let risks: Vec<f64> = records.iter().map(|r| r.risk_selected).collect();
        let ratios: Vec<f64> = records.iter().map(|r| r.oracle_ratio).collect();
        let theorem: Vec<f64> = records.iter().map(|r| r.theorem_ratio).collect();
        let restricted: Option<Vec<f64>> = records.iter().map(|r| r.theorem_ratio_restricted).collect();
        let mut selected_dims = BTreeMap::new();
        for r in records {
            *selected_dims.entry(r.selected_dim).or_insert(0) += 1;
        }
        Self {
            n: collection.n,
            replications: records.len(),
            collection,
            mean_risk: mean(&risks),
            median_risk: median(&risks),
            risk_q05: quantile(&risks, 0.05),
            risk_q25: quantile(&risks, 0.25),
            risk_q75: quantile(&risks, 0.75),
            risk_q95: quantile(&risks, 0.95),
            median_oracle_ratio: median(&ratios),
            p95_oracle_ratio: quantile(&ratios, 0.95),
            median_theorem_ratio: median(&theorem),
            p95_theorem_ratio: quantile(&theorem, 0.95),
            median_theorem_ratio_restricted: restricted.as_deref().map(median),
            p95_theorem_ratio_restricted: restricted.as_deref().map(|r| quantile(r, 0.95)),
            selected_dims,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<ReplicationRecord>,
    pub summaries: Vec<SizeSummary>,
}

impl ExperimentResult {
    pub fn records_for(&self, n: usize) -> impl Iterator<Item = &ReplicationRecord> {
        self.records.iter().filter(move |r| r.n == n)
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv(&self.records, &mut buf)?;
        Ok(buf)
    }
}

/// Everything shared by the replications at one sample size.
struct SizeContext {
    n: usize,
    process: ProcessSpec,
    collection: ModelCollection,
    truths: TrueCoefficients,
    plan: PenaltyPlan,
    seed: u64,
    timing: bool,
}

impl SizeContext {
    fn new(config: &ExperimentConfig, basis: &BasisSystem, n: usize) -> Result<Self> {
        let process = config.process_spec()?;
        let collection = ModelCollection::build(basis, n)?;
        let truths = TrueCoefficients::for_collection(&collection, process.true_density())?;
        Ok(Self {
            n,
            plan: config.penalty_plan(n)?,
            process,
            collection,
            truths,
            seed: config.seed,
            timing: config.timing,
        })
    }

    fn replicate(&self, replication: usize) -> Result<ReplicationRecord> {
        let start = Instant::now();
        let seed = self.seed ^ replication as u64;
        let sample = processes::sample(&self.process, self.n, seed);
        let chain = projection_chain(&sample, &self.collection)?;
        let (penalty, calibrated_slope) = match self.plan {
            PenaltyPlan::Fixed(spec) => (spec, None),
            PenaltyPlan::Calibrate => {
                let dims: Vec<usize> = chain.iter().map(|e| e.dimension()).collect();
                let contrasts: Vec<f64> = chain.iter().map(|e| e.contrast).collect();
                let report = slope_heuristic(&dims, &contrasts, self.n)?;
                (PenaltySpec::custom(1.0, report.k_hat, self.n)?, Some(report.k_hat))
            }
        };
        let selection = select_from_chain(&chain, &penalty)?;
        let oracle = oracle_from_chain(&chain, &self.truths)?;
        let ratio = oracle_ratio(&selection, &oracle, &penalty, None)?;
        let selected_risk = oracle.per_model_risks[selection.selected];
        let theorem = theorem_ratios(selected_risk.risk, &self.truths, &self.collection, &penalty)?;
        let row = selection.selected_row();
        Ok(ReplicationRecord {
            n: self.n,
            replication,
            seed,
            selected_dim: row.dim,
            oracle_dim: oracle.oracle_dim,
            contrast_selected: row.contrast,
            penalty_selected: row.penalty,
            risk_selected: selected_risk.risk,
            oracle_risk: oracle.oracle_risk,
            oracle_ratio: ratio.value,
            wall_ms: if self.timing {
                start.elapsed().as_millis() as u64
            } else {
                0
            },
            bias_sq_selected: selected_risk.bias_sq,
            theorem_ratio: theorem.all_models.value,
            theorem_ratio_restricted: theorem.restricted.map(|r| r.value),
            calibrated_slope,
        })
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("threads: {e}")))
}

fn run_size(
    config: &ExperimentConfig,
    basis: &BasisSystem,
    pool: &rayon::ThreadPool,
    n: usize,
) -> Result<(Vec<ReplicationRecord>, SizeSummary)> {
    let ctx = SizeContext::new(config, basis, n)?;
    let records = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| ctx.replicate(rep))
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = SizeSummary::from_records(ctx.collection.descriptor(), &records);
    log::info!(
        "n = {n}: median risk {:.3e}, median oracle ratio {:.3}",
        summary.median_risk,
        summary.median_oracle_ratio
    );
    Ok((records, summary))
}

/// Runs every (n, replication) pair in memory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let basis = config.basis_system()?;
    let pool = thread_pool(config.threads)?;
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &n in &config.sample_sizes {
        let (r, s) = run_size(config, &basis, &pool, n)?;
        records.extend(r);
        summaries.push(s);
    }
    Ok(ExperimentResult { records, summaries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub completed_sizes: Vec<usize>,
    pub complete: bool,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Runs the experiment writing `replications.csv`, `summary.json` and
/// `manifest.json` into `dir`. Results are flushed after every sample size.
pub fn run_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<ExperimentResult> {
    config.validate()?;
    fs::create_dir_all(dir)?;
    let basis = config.basis_system()?;
    let pool = thread_pool(config.threads)?;
    let csv_path = dir.join("replications.csv");
    let summary_path = dir.join("summary.json");
    let manifest_path = dir.join("manifest.json");
    let mut manifest = Manifest {
        config: config.clone(),
        csv: PathBuf::from("replications.csv"),
        summary: PathBuf::from("summary.json"),
        completed_sizes: Vec::new(),
        complete: false,
    };
    let mut writer = csv::Writer::from_path(&csv_path)?;
    write_csv_header(&mut writer)?;
    writer.flush()?;
    write_json(&manifest, &manifest_path)?;

    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &n in &config.sample_sizes {
        let (r, s) = run_size(config, &basis, &pool, n)?;
        write_csv_rows(&mut writer, &r)?;
        records.extend(r);
        summaries.push(s);
        write_json(&summaries, &summary_path)?;
        manifest.completed_sizes.push(n);
        write_json(&manifest, &manifest_path)?;
    }
    manifest.complete = true;
    write_json(&manifest, &manifest_path)?;
    Ok(ExperimentResult { records, summaries })
}
