//! Posterior trace: per-iteration snapshots, their JSON-lines wire format,
//! and run metadata.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mat::Mat;
use crate::state::BiclusterState;

/// Prior regime for a chain: repulsive kernels on the cluster coefficients
/// with split/merge moves, or the independent-prior baseline with urn-style
/// site clustering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    Repulsive,
    Independent,
}

impl std::str::FromStr for PriorMode {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bareb" | "repulsive" => Ok(PriorMode::Repulsive),
            "indep" | "independent" => Ok(PriorMode::Independent),
            other => Err(crate::error::Error::validation(format!(
                "unknown mode {other:?}; expected bareb or indep"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Counter {
    pub proposed: u64,
    pub accepted: u64,
}

impl Counter {
    pub fn add(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn add_many(&mut self, accepted: usize, proposed: usize) {
        self.proposed += proposed as u64;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Per-kernel Metropolis acceptance counters for one run.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub row_coef: Counter,
    pub site_coef: Counter,
    pub spatial: Counter,
    pub corr: Counter,
    pub bandwidth_row: Counter,
    pub bandwidth_site: Counter,
    pub split: Counter,
    pub merge: Counter,
}

impl AcceptanceReport {
    pub fn lines(&self) -> Vec<String> {
        [
            ("row_coef", self.row_coef),
            ("site_coef", self.site_coef),
            ("spatial", self.spatial),
            ("corr", self.corr),
            ("bandwidth_row", self.bandwidth_row),
            ("bandwidth_site", self.bandwidth_site),
            ("split", self.split),
            ("merge", self.merge),
        ]
        .iter()
        .map(|(name, c)| {
            format!(
                "{name}: {}/{} ({:.3})",
                c.accepted,
                c.proposed,
                c.rate()
            )
        })
        .collect()
    }
}

/// One kept iteration: the state (latent matrices optional to keep traces
/// small), the per-patient log predictive densities over observed cells,
/// and the cumulative acceptance counters at that point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub row_labels: Vec<usize>,
    pub row_weights: Vec<f64>,
    pub site_labels: Vec<Vec<usize>>,
    pub site_weights: Vec<Vec<f64>>,
    pub row_coefs: Vec<Vec<f64>>,
    pub site_coefs: Vec<Vec<Vec<f64>>>,
    pub row_bandwidth: f64,
    pub site_bandwidths: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spatial: Option<Mat>,
    pub spatial_var: f64,
    pub spatial_corr: f64,
    pub noise_var: f64,
    pub missing_intercept: f64,
    pub missing_slope: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probit_latent: Option<Mat>,
    /// log p(y_i | state) over non-missing cells, one entry per patient.
    pub log_pred: Vec<f64>,
    pub accept: AcceptanceReport,
}

impl Snapshot {
    pub fn from_state(
        iteration: usize,
        state: &BiclusterState,
        log_pred: Vec<f64>,
        accept: AcceptanceReport,
        keep_latent: bool,
    ) -> Self {
        Snapshot {
            iteration,
            row_labels: state.row_labels.clone(),
            row_weights: state.row_weights.clone(),
            site_labels: state.site_labels.clone(),
            site_weights: state.site_weights.clone(),
            row_coefs: state.row_coefs.clone(),
            site_coefs: state.site_coefs.clone(),
            row_bandwidth: state.row_bandwidth,
            site_bandwidths: state.site_bandwidths.clone(),
            spatial: keep_latent.then(|| state.spatial.clone()),
            spatial_var: state.spatial_var,
            spatial_corr: state.spatial_corr,
            noise_var: state.noise_var,
            missing_intercept: state.missing_intercept,
            missing_slope: state.missing_slope,
            probit_latent: keep_latent.then(|| state.probit_latent.clone()),
            log_pred,
            accept,
        }
    }

    /// Rebuild a full state from a snapshot; requires the latent matrices.
    pub fn to_state(&self) -> Option<BiclusterState> {
        Some(BiclusterState {
            row_labels: self.row_labels.clone(),
            row_weights: self.row_weights.clone(),
            site_labels: self.site_labels.clone(),
            site_weights: self.site_weights.clone(),
            row_coefs: self.row_coefs.clone(),
            site_coefs: self.site_coefs.clone(),
            row_bandwidth: self.row_bandwidth,
            site_bandwidths: self.site_bandwidths.clone(),
            spatial: self.spatial.clone()?,
            spatial_var: self.spatial_var,
            spatial_corr: self.spatial_corr,
            noise_var: self.noise_var,
            missing_intercept: self.missing_intercept,
            missing_slope: self.missing_slope,
            probit_latent: self.probit_latent.clone()?,
        })
    }

    pub fn n_site_clusters(&self, s: usize) -> usize {
        self.site_coefs[s].len()
    }
}

/// Run configuration and outcome, written alongside every trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub n_row_clusters: usize,
    pub seed: u64,
    pub mode: PriorMode,
    pub n_burn: usize,
    pub n_keep: usize,
    pub runtime_secs: f64,
    pub accept: AcceptanceReport,
}

/// Kept iterations of one chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosteriorTrace {
    pub meta: RunMeta,
    pub snapshots: Vec<Snapshot>,
}

impl PosteriorTrace {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// B x N matrix of per-patient log predictive densities.
    pub fn log_pred_matrix(&self) -> Vec<&[f64]> {
        self.snapshots.iter().map(|s| s.log_pred.as_slice()).collect()
    }

    /// B x N matrix of patient labels.
    pub fn row_label_matrix(&self) -> Vec<&[usize]> {
        self.snapshots.iter().map(|s| s.row_labels.as_slice()).collect()
    }

    /// One JSON object per kept iteration.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for snap in &self.snapshots {
            serde_json::to_writer(&mut w, snap)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_jsonl(path: &Path, meta: RunMeta) -> Result<Self> {
        let r = BufReader::new(std::fs::File::open(path)?);
        let mut snapshots = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            snapshots.push(serde_json::from_str(&line)?);
        }
        Ok(PosteriorTrace { meta, snapshots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parsing() {
        assert_eq!("bareb".parse::<PriorMode>().unwrap(), PriorMode::Repulsive);
        assert_eq!("indep".parse::<PriorMode>().unwrap(), PriorMode::Independent);
        assert!("other".parse::<PriorMode>().is_err());
    }

    #[test]
    fn counter_rates() {
        let mut c = Counter::default();
        c.add(true);
        c.add(false);
        assert_eq!(c.rate(), 0.5);
    }
}
