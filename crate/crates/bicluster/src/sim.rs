//! Synthetic data generation with a recorded ground truth, following the
//! reference simulation design: three balanced patient clusters over an
//! 80 x 168 response matrix with nested site clusters of sizes (2, 3, 4),
//! Gaussian noise, a smooth spatial field, and probit tooth masking tuned
//! to roughly 20% missing teeth.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::car::precompute_car;
use crate::data::{build_default_adjacency, Dataset, SiteGeometry, SITES_PER_TOOTH};
use crate::error::{Error, Result};
use crate::mat::{dot, Mat};
use crate::rng::{SeedSource, StreamKind};

/// Generating configuration. Defaults reproduce the reference design.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_patients: usize,
    pub n_teeth: usize,
    /// Per-cluster patient coefficients; the cluster count is the length.
    pub row_coefs: Vec<Vec<f64>>,
    /// Nested site-cluster coefficients per patient cluster.
    pub site_coefs: Vec<Vec<Vec<f64>>>,
    pub noise_sd: f64,
    pub spatial_var: f64,
    pub spatial_corr: f64,
    /// Retention probit coefficients (c0, c1): a tooth stays present with
    /// probability Φ(c0 + c1·tooth mean), so larger means keep more teeth.
    /// The model-space missingness truth is the negation; see
    /// [`SimulationTruth::missing_coefs`].
    pub retention_coefs: (f64, f64),
    /// Scale of the continuous covariates.
    pub covariate_sd: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_patients: 80,
            n_teeth: 28,
            row_coefs: vec![
                vec![0.5, 1.5, 0.5],
                vec![1.5, 2.5, 2.0],
                vec![2.5, 3.0, 3.5],
            ],
            site_coefs: vec![
                vec![vec![0.0, 0.5, 0.5], vec![1.5, 2.0, 2.0]],
                vec![
                    vec![0.0, 0.5, 0.5],
                    vec![1.5, 2.0, 2.0],
                    vec![3.0, 4.5, 3.5],
                ],
                vec![
                    vec![0.0, 0.5, 0.5],
                    vec![1.5, 2.0, 2.0],
                    vec![3.0, 4.5, 3.5],
                    vec![4.5, 8.0, 5.0],
                ],
            ],
            noise_sd: 1.0,
            spatial_var: 4.0,
            spatial_corr: 0.96,
            retention_coefs: (0.1, 0.2),
            covariate_sd: 3.0,
        }
    }
}

impl SimConfig {
    pub fn n_row_clusters(&self) -> usize {
        self.row_coefs.len()
    }

    pub fn site_cluster_counts(&self) -> Vec<usize> {
        self.site_coefs.iter().map(Vec::len).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 || self.n_teeth == 0 {
            return Err(Error::validation("need at least one patient and tooth"));
        }
        if self.row_coefs.is_empty() || self.site_coefs.len() != self.row_coefs.len() {
            return Err(Error::dim(
                "row_coefs and site_coefs must list the same cluster count",
            ));
        }
        let p = self.row_coefs[0].len();
        if p == 0 || self.row_coefs.iter().any(|b| b.len() != p) {
            return Err(Error::dim("row coefficient vectors must share a length"));
        }
        let q = self
            .site_coefs
            .first()
            .and_then(|g| g.first())
            .map_or(0, Vec::len);
        if q == 0
            || self
                .site_coefs
                .iter()
                .any(|g| g.is_empty() || g.iter().any(|v| v.len() != q))
        {
            return Err(Error::dim("site coefficient vectors must share a length"));
        }
        if !(self.noise_sd > 0.0 && self.spatial_var > 0.0) {
            return Err(Error::validation("scales must be positive"));
        }
        if !(self.spatial_corr > -1.0 && self.spatial_corr < 1.0) {
            return Err(Error::validation("spatial correlation must lie in (-1, 1)"));
        }
        Ok(())
    }
}

/// Generating parameters and latents, kept for recovery scoring.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationTruth {
    pub row_labels: Vec<usize>,
    /// Site labels per patient cluster (same layout as the sampler state).
    pub site_labels: Vec<Vec<usize>>,
    pub row_coefs: Vec<Vec<f64>>,
    pub site_coefs: Vec<Vec<Vec<f64>>>,
    pub noise_var: f64,
    pub spatial_var: f64,
    pub spatial_corr: f64,
    /// Missingness probit truth in model space: P(missing) =
    /// Φ(c0 + c1·tooth mean) with these coefficients.
    pub missing_coefs: (f64, f64),
    /// Spatial field before masking.
    pub spatial: Mat,
    /// Complete response surface before masking.
    pub full_response: Mat,
}

/// Generate one dataset and its truth. Balanced site clusters are assigned
/// round-robin; a patient drawn with every tooth masked has its masking
/// redrawn, matching the all-teeth-present-excluded inclusion rule.
pub fn generate(config: &SimConfig, seed: u64) -> Result<(Dataset, SimulationTruth)> {
    config.validate()?;
    let geometry = SiteGeometry::default_for_teeth(config.n_teeth)?;
    let car = precompute_car(&build_default_adjacency(&geometry))?;
    let seeds = SeedSource::new(seed);
    let mut rng = seeds.stream(StreamKind::Simulate, 0);

    let (n, j_count, t_count) = (config.n_patients, geometry.site_count(), config.n_teeth);
    let s_count = config.n_row_clusters();
    let p = config.row_coefs[0].len();
    let q = config.site_coefs[0][0].len();

    // patient covariates: continuous N(0, sd²) except a final binary column
    let x = Mat::from_rows(
        (0..n)
            .map(|_| {
                (0..p)
                    .map(|k| {
                        if k + 1 == p {
                            f64::from(rng.gen::<bool>())
                        } else {
                            rng.sample::<f64, _>(StandardNormal) * config.covariate_sd
                        }
                    })
                    .collect()
            })
            .collect(),
    );
    // site covariates: intercept, continuous N(0, sd²), final Binomial(5, 1/2)
    let z = Mat::from_rows(
        (0..j_count)
            .map(|_| {
                (0..q)
                    .map(|k| {
                        if k == 0 {
                            1.0
                        } else if k + 1 == q {
                            (0..5).filter(|_| rng.gen::<bool>()).count() as f64
                        } else {
                            rng.sample::<f64, _>(StandardNormal) * config.covariate_sd
                        }
                    })
                    .collect()
            })
            .collect(),
    );

    // balanced labels
    let row_labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..s_count)).collect();
    let site_labels: Vec<Vec<usize>> = config
        .site_cluster_counts()
        .iter()
        .map(|&d| (0..j_count).map(|j| j % d).collect())
        .collect();

    // spatial field and complete response
    let mut spatial = Mat::zeros(n, j_count);
    let mut mean = Mat::zeros(n, j_count);
    let mut full_response = Mat::zeros(n, j_count);
    for i in 0..n {
        let nu = car.sample_spatial_row(config.spatial_var, config.spatial_corr, &mut rng);
        let s = row_labels[i];
        let xb = dot(x.row(i), &config.row_coefs[s]);
        for j in 0..j_count {
            let zg = dot(z.row(j), &config.site_coefs[s][site_labels[s][j]]);
            let m = xb + zg + nu[j];
            spatial[(i, j)] = nu[j];
            mean[(i, j)] = m;
            full_response[(i, j)] =
                m + rng.sample::<f64, _>(StandardNormal) * config.noise_sd;
        }
    }

    // probit masking on tooth means of the noiseless surface; redraw rows
    // that lose every tooth
    let (c0, c1) = config.retention_coefs;
    let mut cells: Vec<Vec<Option<f64>>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![None; j_count];
        loop {
            let mut present = 0;
            for t in 0..t_count {
                let sites = geometry.sites_of_tooth(t);
                let tooth_mean = sites
                    .clone()
                    .map(|j| mean[(i, j)])
                    .sum::<f64>()
                    / SITES_PER_TOOTH as f64;
                let retain_score =
                    c0 + c1 * tooth_mean + rng.sample::<f64, _>(StandardNormal);
                let keep = retain_score > 0.0;
                if keep {
                    present += 1;
                }
                for j in sites {
                    row[j] = keep.then(|| full_response[(i, j)]);
                }
            }
            if present > 0 {
                break;
            }
        }
        cells.push(row);
    }

    let dataset = Dataset::from_cells(&cells, x, z, geometry)?;
    let truth = SimulationTruth {
        row_labels,
        site_labels,
        row_coefs: config.row_coefs.clone(),
        site_coefs: config.site_coefs.clone(),
        noise_var: config.noise_sd * config.noise_sd,
        spatial_var: config.spatial_var,
        spatial_corr: config.spatial_corr,
        missing_coefs: (-c0, -c1),
        spatial,
        full_response,
    };
    Ok((dataset, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let cfg = SimConfig {
            n_patients: 6,
            n_teeth: 4,
            ..SimConfig::default()
        };
        let (a, _) = generate(&cfg, 5).unwrap();
        let (b, _) = generate(&cfg, 5).unwrap();
        assert_eq!(a.cells(), b.cells());
        assert_eq!(a.x(), b.x());
    }

    #[test]
    fn noiseless_limit_recovers_mean_surface() {
        let mut cfg = SimConfig {
            n_patients: 5,
            n_teeth: 4,
            noise_sd: 1e-12,
            spatial_var: 1e-24,
            ..SimConfig::default()
        };
        cfg.retention_coefs = (1e6, 0.0); // keep everything
        let (data, truth) = generate(&cfg, 3).unwrap();
        for i in 0..5 {
            let s = truth.row_labels[i];
            for j in 0..data.n_sites() {
                let want = dot(data.x_row(i), &truth.row_coefs[s])
                    + dot(
                        data.z_row(j),
                        &truth.site_coefs[s][truth.site_labels[s][j]],
                    );
                assert!(
                    (data.y(i, j) - want).abs() < 1e-5,
                    "cell ({i},{j}): {} vs {want}",
                    data.y(i, j)
                );
            }
        }
    }

    #[test]
    fn extreme_retention_keeps_all_teeth() {
        let cfg = SimConfig {
            n_patients: 8,
            n_teeth: 4,
            retention_coefs: (1e6, 0.0),
            ..SimConfig::default()
        };
        let (data, _) = generate(&cfg, 7).unwrap();
        assert_eq!(data.missing_tooth_fraction(), 0.0);
    }

    #[test]
    fn site_clusters_balanced() {
        let cfg = SimConfig::default();
        let (_, truth) = generate(&cfg, 11).unwrap();
        for (s, labels) in truth.site_labels.iter().enumerate() {
            let d = truth.site_coefs[s].len();
            let mut counts = vec![0usize; d];
            for &l in labels {
                counts[l] += 1;
            }
            assert!(counts.iter().all(|&c| c == 168 / d), "{counts:?}");
        }
    }

    #[test]
    fn default_missingness_near_twenty_percent() {
        let (data, _) = generate(&SimConfig::default(), 42).unwrap();
        let f = data.missing_tooth_fraction();
        assert!((0.10..0.30).contains(&f), "fraction {f}");
    }
}
