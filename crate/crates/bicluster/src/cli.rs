//! Command implementations behind the thin binary: simulate, fit, scan,
//! summarize, predict. Every command writes a manifest (arguments, seed,
//! version) next to its outputs so runs can be replayed exactly.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::car::precompute_car;
use crate::data::{
    build_default_adjacency, load_adjacency, load_dataset, save_adjacency, save_dataset,
    DataPaths, Dataset, IoConfig,
};
use crate::error::{Error, Result};
use crate::sampler::{run_chain, waic_scan, ChainOptions, SiteLabelPrior};
use crate::sim::{generate, SimConfig};
use crate::state::Hyperparameters;
use crate::summary::{
    co_clustering, conditional_indices, credible_intervals, ls_partition, ls_site_partitions,
    predictive_category_probs, relabel_site_level, relabel_trace, waic,
};
use crate::trace::{PosteriorTrace, PriorMode, RunMeta};

#[derive(Parser, Debug)]
#[command(
    name = "bicluster",
    version,
    about = "Bayesian repulsive nested biclustering with spatial effects and non-ignorable missingness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset with known truth.
    Simulate(SimulateArgs),
    /// Run one chain on a dataset and write the posterior trace.
    Fit(FitArgs),
    /// Fit a range of patient-cluster counts and report their WAIC.
    Scan(ScanArgs),
    /// Partition point estimates, co-clustering matrix, credible intervals.
    Summarize(SummarizeArgs),
    /// Posterior predictive category probabilities for new patients.
    Predict(PredictArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// Patients to generate.
    #[arg(long, default_value_t = 80)]
    pub n: usize,
    /// Teeth per patient (six sites each).
    #[arg(long, default_value_t = 28)]
    pub teeth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the CSV triple, truth sidecar, and adjacency.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON file overriding the full generating configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct DataArgs {
    /// Directory holding response.csv, patient_covariates.csv,
    /// site_covariates.csv.
    #[arg(long)]
    pub data: PathBuf,
    /// CSVs carry a header row.
    #[arg(long, default_value_t = false)]
    pub header: bool,
    /// Site covariate file already contains the intercept column.
    #[arg(long, default_value_t = false)]
    pub no_intercept: bool,
    /// Edge-list CSV overriding the default neighbor structure.
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
}

impl DataArgs {
    pub fn load(&self) -> Result<(Dataset, crate::data::AdjacencyGraph)> {
        let io = IoConfig {
            has_header: self.header,
            add_intercept: !self.no_intercept,
        };
        let dataset = load_dataset(&DataPaths::in_dir(&self.data), &io)?;
        let adjacency = match &self.adjacency {
            Some(path) => load_adjacency(path, dataset.n_sites())?,
            None => build_default_adjacency(dataset.geometry()),
        };
        Ok((dataset, adjacency))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Patient-cluster count for this chain.
    #[arg(long)]
    pub s: usize,
    /// Kept post-burn-in iterations.
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 3000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// bareb (repulsive prior) or indep (independent-prior baseline).
    #[arg(long, default_value = "bareb")]
    pub mode: String,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file overriding hyperparameter defaults.
    #[arg(long)]
    pub hp: Option<PathBuf>,
    /// Store the spatial and probit latent matrices in every snapshot.
    #[arg(long, default_value_t = false)]
    pub save_latent: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Inclusive patient-cluster range, e.g. 2..10 (or a comma list).
    #[arg(long)]
    pub s_range: String,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 3000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "bareb")]
    pub mode: String,
    /// Chains run concurrently up to this many threads.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub hp: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Trace file written by fit (trace.jsonl).
    #[arg(long)]
    pub trace: PathBuf,
    /// Credible level for the intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub trace: PathBuf,
    /// CSV of new-patient covariate rows (no header unless --header).
    #[arg(long)]
    pub covariates: PathBuf,
    /// 1-based site index to predict at.
    #[arg(long)]
    pub site: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Replay record written next to every command's outputs.
#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    args: &'a T,
}

fn write_manifest<T: Serialize>(out: &Path, command: &str, args: &T) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        args,
    };
    let file = std::fs::File::create(out.join("manifest.json"))?;
    serde_json::to_writer_pretty(file, &manifest)?;
    Ok(())
}

fn load_hyperparameters(path: &Option<PathBuf>, s: usize) -> Result<Hyperparameters> {
    let hp = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let hp: Hyperparameters = serde_json::from_str(&text)?;
            hp.for_row_clusters(s)
        }
        None => Hyperparameters::defaults(s),
    };
    hp.validate()?;
    Ok(hp)
}

fn configure_threads(threads: Option<usize>) {
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    write_manifest(&args.out, "simulate", args)?;
    let mut config = match &args.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => SimConfig::default(),
    };
    config.n_patients = args.n;
    config.n_teeth = args.teeth;
    let (dataset, truth) = generate(&config, args.seed)?;
    save_dataset(&dataset, &DataPaths::in_dir(&args.out))?;
    save_adjacency(
        &build_default_adjacency(dataset.geometry()),
        &args.out.join("adjacency.csv"),
    )?;
    let truth_file = std::fs::File::create(args.out.join("truth.json"))?;
    serde_json::to_writer(truth_file, &truth)?;
    println!(
        "wrote {} patients x {} sites to {} ({:.1}% teeth missing)",
        dataset.n_patients(),
        dataset.n_sites(),
        args.out.display(),
        100.0 * dataset.missing_tooth_fraction()
    );
    Ok(())
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    configure_threads(args.threads);
    write_manifest(&args.out, "fit", args)?;
    let (dataset, adjacency) = args.data.load()?;
    let hp = load_hyperparameters(&args.hp, args.s)?;
    let mode: PriorMode = args.mode.parse()?;
    let mut opts = ChainOptions::new(args.burnin, args.iters, args.seed).with_mode(mode);
    opts.keep_latent = args.save_latent;
    opts.site_label_prior = SiteLabelPrior::SampledWeights;
    let trace = run_chain(&dataset, &adjacency, args.s, &hp, &opts)?;
    trace.save_jsonl(&args.out.join("trace.jsonl"))?;
    let meta_file = std::fs::File::create(args.out.join("run_meta.json"))?;
    serde_json::to_writer_pretty(meta_file, &trace.meta)?;
    let mut acc = std::fs::File::create(args.out.join("acceptance.txt"))?;
    for line in trace.meta.accept.lines() {
        writeln!(acc, "{line}")?;
    }
    println!(
        "kept {} iterations in {:.1}s; acceptance rates written to acceptance.txt",
        trace.len(),
        trace.meta.runtime_secs
    );
    Ok(())
}

/// Parse "2..10" (inclusive) or "2,3,5".
pub fn parse_count_range(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad_range(text))?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad_range(text))?;
        if lo == 0 || hi < lo {
            return Err(bad_range(text));
        }
        Ok((lo..=hi).collect())
    } else {
        let vals: Vec<usize> = text
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| bad_range(text)))
            .collect::<Result<_>>()?;
        if vals.is_empty() || vals.contains(&0) {
            return Err(bad_range(text));
        }
        Ok(vals)
    }
}

fn bad_range(text: &str) -> Error {
    Error::validation(format!(
        "cannot parse cluster range {text:?}; expected LO..HI or a comma list"
    ))
}

pub fn cmd_scan(args: &ScanArgs) -> Result<()> {
    configure_threads(args.threads);
    write_manifest(&args.out, "scan", args)?;
    let (dataset, adjacency) = args.data.load()?;
    let counts = parse_count_range(&args.s_range)?;
    let hp = load_hyperparameters(&args.hp, *counts.iter().max().unwrap())?;
    let mode: PriorMode = args.mode.parse()?;
    let opts = ChainOptions::new(args.burnin, args.iters, args.seed).with_mode(mode);
    let rows = waic_scan(&dataset, &adjacency, &counts, &hp, &opts)?;
    let best = rows
        .iter()
        .min_by(|a, b| a.waic.partial_cmp(&b.waic).unwrap())
        .map(|r| r.n_row_clusters)
        .unwrap_or(0);

    let mut w = csv::Writer::from_path(args.out.join("waic.csv"))?;
    w.write_record(["s", "lppd", "p_eff", "waic", "best", "runtime_secs"])?;
    for r in &rows {
        w.write_record(&[
            r.n_row_clusters.to_string(),
            format!("{:.6}", r.lppd),
            format!("{:.6}", r.p_eff),
            format!("{:.6}", r.waic),
            ((r.n_row_clusters == best) as u8).to_string(),
            format!("{:.2}", r.runtime_secs),
        ])?;
    }
    w.flush()?;
    println!("s\tlppd\t\tp_eff\t\twaic");
    for r in &rows {
        let mark = if r.n_row_clusters == best { " *" } else { "" };
        println!(
            "{}\t{:.2}\t{:.2}\t{:.2}{}",
            r.n_row_clusters, r.lppd, r.p_eff, r.waic, mark
        );
    }
    Ok(())
}

fn load_trace(path: &Path) -> Result<PosteriorTrace> {
    // meta is reconstructed from the snapshots; the sidecar run_meta.json
    // is preferred when present
    let meta_path = path.parent().map(|d| d.join("run_meta.json"));
    let trace = PosteriorTrace::load_jsonl(
        path,
        RunMeta {
            n_row_clusters: 0,
            seed: 0,
            mode: PriorMode::Repulsive,
            n_burn: 0,
            n_keep: 0,
            runtime_secs: 0.0,
            accept: Default::default(),
        },
    )?;
    let mut trace = trace;
    if trace.snapshots.is_empty() {
        return Err(Error::validation("trace file holds no iterations"));
    }
    trace.meta.n_row_clusters = trace.snapshots[0].row_weights.len();
    trace.meta.n_keep = trace.snapshots.len();
    if let Some(mp) = meta_path {
        if mp.exists() {
            if let Ok(meta) = serde_json::from_str::<RunMeta>(&std::fs::read_to_string(&mp)?) {
                trace.meta = meta;
            }
        }
    }
    Ok(trace)
}

pub fn cmd_summarize(args: &SummarizeArgs) -> Result<()> {
    write_manifest(&args.out, "summarize", args)?;
    let (dataset, _) = args.data.load()?;
    let mut trace = load_trace(&args.trace)?;

    let labels = trace.row_label_matrix();
    let (_, row_ls) = ls_partition(&labels);
    relabel_trace(&mut trace, &row_ls);
    let site_ls = ls_site_partitions(&trace, &row_ls)?;
    relabel_site_level(&mut trace, &site_ls);
    let idx: Vec<usize> = structure_matched_indices(&trace, &row_ls, &site_ls);
    let intervals = credible_intervals(&trace, &idx, args.level)?;
    let h = co_clustering(&trace.row_label_matrix());
    let w = waic(&trace)?;

    // point-estimate labels, 1-based at the boundary
    let mut f = csv::Writer::from_path(args.out.join("row_clusters.csv"))?;
    f.write_record(["patient", "cluster"])?;
    for (i, &e) in row_ls.iter().enumerate() {
        f.write_record(&[(i + 1).to_string(), (e + 1).to_string()])?;
    }
    f.flush()?;

    let mut f = csv::Writer::from_path(args.out.join("site_clusters.csv"))?;
    f.write_record(["row_cluster", "site", "site_cluster"])?;
    for (s, labels) in site_ls.iter().enumerate() {
        for (j, &d) in labels.iter().enumerate() {
            f.write_record(&[
                (s + 1).to_string(),
                (j + 1).to_string(),
                (d + 1).to_string(),
            ])?;
        }
    }
    f.flush()?;

    // bicluster heatmap in long format: one row per (patient, site)
    let mut f = csv::Writer::from_path(args.out.join("bicluster_heatmap.csv"))?;
    f.write_record(["patient", "site", "row_cluster", "site_cluster"])?;
    for (i, &e) in row_ls.iter().enumerate() {
        for j in 0..dataset.n_sites() {
            f.write_record(&[
                (i + 1).to_string(),
                (j + 1).to_string(),
                (e + 1).to_string(),
                (site_ls[e][j] + 1).to_string(),
            ])?;
        }
    }
    f.flush()?;

    let mut f = csv::Writer::from_path(args.out.join("coclustering.csv"))?;
    for i in 0..h.rows() {
        let row: Vec<String> = h.row(i).iter().map(|v| format!("{v:.6}")).collect();
        f.write_record(&row)?;
    }
    f.flush()?;

    let mut f = csv::Writer::from_path(args.out.join("credible_intervals.csv"))?;
    f.write_record(["parameter", "mean", "lower", "upper"])?;
    for p in &intervals {
        f.write_record(&[
            p.name.clone(),
            format!("{:.6}", p.mean),
            format!("{:.6}", p.lower),
            format!("{:.6}", p.upper),
        ])?;
    }
    f.flush()?;

    #[derive(Serialize)]
    struct SummaryOut<'a> {
        waic: f64,
        lppd: f64,
        p_eff: f64,
        n_iterations: usize,
        n_structure_matched: usize,
        site_cluster_counts: Vec<usize>,
        row_cluster_sizes: Vec<usize>,
        acceptance: &'a crate::trace::AcceptanceReport,
    }
    let mut sizes = vec![0usize; trace.meta.n_row_clusters];
    for &e in &row_ls {
        sizes[e] += 1;
    }
    let out = SummaryOut {
        waic: w.waic,
        lppd: w.lppd,
        p_eff: w.p_eff,
        n_iterations: trace.len(),
        n_structure_matched: idx.len(),
        site_cluster_counts: site_ls
            .iter()
            .map(|l| l.iter().max().map_or(1, |&m| m + 1))
            .collect(),
        row_cluster_sizes: sizes,
        acceptance: &trace.meta.accept,
    };
    let file = std::fs::File::create(args.out.join("summary.json"))?;
    serde_json::to_writer_pretty(file, &out)?;
    println!(
        "waic {:.2} (lppd {:.2}, p_eff {:.2}); cluster sizes {:?}",
        w.waic, w.lppd, w.p_eff, out.row_cluster_sizes
    );
    Ok(())
}

/// Iterations matching both the patient partition and each cluster's
/// site-cluster count.
pub fn structure_matched_indices(
    trace: &PosteriorTrace,
    row_ref: &[usize],
    site_refs: &[Vec<usize>],
) -> Vec<usize> {
    conditional_indices(trace, row_ref)
        .into_iter()
        .filter(|&b| {
            site_refs.iter().enumerate().all(|(s, r)| {
                trace.snapshots[b].n_site_clusters(s)
                    == r.iter().max().map_or(1, |&m| m + 1)
            })
        })
        .collect()
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    write_manifest(&args.out, "predict", args)?;
    let (dataset, adjacency) = args.data.load()?;
    let car = precompute_car(&adjacency)?;
    let mut trace = load_trace(&args.trace)?;
    if args.site == 0 || args.site > dataset.n_sites() {
        return Err(Error::validation(format!(
            "site {} out of range 1..={}",
            args.site,
            dataset.n_sites()
        )));
    }

    let labels = trace.row_label_matrix();
    let (_, row_ls) = ls_partition(&labels);
    relabel_trace(&mut trace, &row_ls);
    let idx: Vec<usize> = (0..trace.len()).collect();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(args.data.header)
        .trim(csv::Trim::All)
        .from_path(&args.covariates)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(
            record
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::validation(format!("non-numeric covariate {v:?}")))
                })
                .collect::<Result<_>>()?,
        );
    }

    let mut f = csv::Writer::from_path(args.out.join("predictions.csv"))?;
    f.write_record(["row", "none", "slight", "moderate", "severe", "missing"])?;
    for (r, x_new) in rows.iter().enumerate() {
        let probs =
            predictive_category_probs(&trace, &idx, &dataset, &car, x_new, args.site - 1)?;
        f.write_record(&[
            (r + 1).to_string(),
            format!("{:.6}", probs[0]),
            format!("{:.6}", probs[1]),
            format!("{:.6}", probs[2]),
            format!("{:.6}", probs[3]),
            format!("{:.6}", probs[4]),
        ])?;
    }
    f.flush()?;
    println!("wrote {} prediction rows", rows.len());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Predict(a) => cmd_predict(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(parse_count_range("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_count_range("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_count_range("3,7,2").unwrap(), vec![3, 7, 2]);
        assert!(parse_count_range("5..2").is_err());
        assert!(parse_count_range("x").is_err());
    }
}
