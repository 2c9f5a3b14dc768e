//! Sampler state: every quantity any update reads or writes, plus the
//! derived mean cache that the kernels patch incrementally.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SITES_PER_TOOTH};
use crate::error::{Error, Result};
use crate::likelihood::missing_logprob;
use crate::mat::{dot, Mat};
use crate::math::{sample_categorical_log, sample_dirichlet, sample_truncated_std_normal};
use crate::rng::{SeedSource, StreamKind};

/// Prior and proposal configuration. Defaults follow the reference
/// simulation setup.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Dirichlet concentration for the patient-cluster weights (length S).
    pub row_concentration: Vec<f64>,
    /// Symmetric Dirichlet concentration for each site-weight vector.
    pub site_concentration: f64,
    /// Inverse-gamma shape/scale for the observation noise variance.
    pub noise_shape: f64,
    pub noise_scale: f64,
    /// Prior variances for the two kernel bandwidths.
    pub row_bandwidth_var: f64,
    pub site_bandwidth_var: f64,
    /// Inverse-gamma shape/scale for the spatial variance.
    pub spatial_shape: f64,
    pub spatial_scale: f64,
    /// Uniform support for the spatial correlation.
    pub corr_lower: f64,
    pub corr_upper: f64,
    /// Prior variance for the missingness regression coefficients.
    pub missing_coef_var: f64,
    /// Cap on site-cluster counts.
    pub max_site_clusters: usize,
    /// Random-walk proposal scales.
    pub step_row_coef: f64,
    pub step_site_coef: f64,
    pub step_spatial: f64,
    pub step_corr: f64,
    pub step_bandwidth: f64,
    /// Urn total mass for the independent-prior baseline.
    pub urn_mass: f64,
    /// Coefficient prior variance for the independent-prior baseline.
    pub indep_prior_var: f64,
}

impl Hyperparameters {
    pub fn defaults(n_row_clusters: usize) -> Self {
        Hyperparameters {
            row_concentration: vec![1.0; n_row_clusters],
            site_concentration: 1.0,
            noise_shape: 0.5,
            noise_scale: 0.5,
            row_bandwidth_var: 100.0,
            site_bandwidth_var: 100.0,
            spatial_shape: 1.0,
            spatial_scale: 1.0,
            corr_lower: 0.95,
            corr_upper: 1.0,
            missing_coef_var: 100.0,
            max_site_clusters: 10,
            step_row_coef: 0.1,
            step_site_coef: 0.1,
            step_spatial: 0.1,
            step_corr: 0.1,
            step_bandwidth: 0.1,
            urn_mass: 1.0,
            indep_prior_var: 100.0,
        }
    }

    /// Same hyperparameters resized to a different cluster count; extra
    /// concentration entries repeat the last value.
    pub fn for_row_clusters(&self, n_row_clusters: usize) -> Self {
        let mut hp = self.clone();
        let fill = hp.row_concentration.last().copied().unwrap_or(1.0);
        hp.row_concentration.resize(n_row_clusters, fill);
        hp
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("site_concentration", self.site_concentration),
            ("noise_shape", self.noise_shape),
            ("noise_scale", self.noise_scale),
            ("row_bandwidth_var", self.row_bandwidth_var),
            ("site_bandwidth_var", self.site_bandwidth_var),
            ("spatial_shape", self.spatial_shape),
            ("spatial_scale", self.spatial_scale),
            ("missing_coef_var", self.missing_coef_var),
            ("step_row_coef", self.step_row_coef),
            ("step_site_coef", self.step_site_coef),
            ("step_spatial", self.step_spatial),
            ("step_corr", self.step_corr),
            ("step_bandwidth", self.step_bandwidth),
            ("urn_mass", self.urn_mass),
            ("indep_prior_var", self.indep_prior_var),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::validation(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.row_concentration.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::validation("row_concentration entries must be > 0"));
        }
        if !(0.0 <= self.corr_lower && self.corr_lower < self.corr_upper && self.corr_upper <= 1.0)
        {
            return Err(Error::validation(format!(
                "correlation support must satisfy 0 <= lower < upper <= 1, got ({}, {})",
                self.corr_lower, self.corr_upper
            )));
        }
        if self.max_site_clusters < 1 {
            return Err(Error::validation("max_site_clusters must be >= 1"));
        }
        Ok(())
    }
}

/// Full sampler state for one chain. The patient-cluster count is fixed per
/// chain; site-cluster counts move through split/merge.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BiclusterState {
    /// Patient cluster labels, 0-based, length N.
    pub row_labels: Vec<usize>,
    /// Patient cluster weights, length S, simplex.
    pub row_weights: Vec<f64>,
    /// Per-cluster site labels, 0-based: site_labels[s][j] in 0..D_s.
    pub site_labels: Vec<Vec<usize>>,
    /// Per-cluster site weights, each a simplex of length D_s.
    pub site_weights: Vec<Vec<f64>>,
    /// Patient-covariate coefficients, one vector of length p per cluster.
    pub row_coefs: Vec<Vec<f64>>,
    /// Site-covariate coefficients: site_coefs[s][d] has length q.
    pub site_coefs: Vec<Vec<Vec<f64>>>,
    /// Kernel bandwidth for the patient-coefficient configuration.
    pub row_bandwidth: f64,
    /// Kernel bandwidths for each cluster's site-coefficient configuration.
    pub site_bandwidths: Vec<f64>,
    /// Spatial effects, N x J.
    pub spatial: Mat,
    pub spatial_var: f64,
    pub spatial_corr: f64,
    /// Observation noise variance.
    pub noise_var: f64,
    /// Missingness probit intercept and slope on the tooth-mean scale.
    pub missing_intercept: f64,
    pub missing_slope: f64,
    /// Latent probit variables, N x T; sign matches tooth missingness.
    pub probit_latent: Mat,
}

impl BiclusterState {
    #[inline]
    pub fn n_row_clusters(&self) -> usize {
        self.row_weights.len()
    }

    #[inline]
    pub fn n_site_clusters(&self, s: usize) -> usize {
        self.site_coefs[s].len()
    }

    /// Members of one patient cluster.
    pub fn cluster_members(&self, s: usize) -> Vec<usize> {
        self.row_labels
            .iter()
            .enumerate()
            .filter(|(_, &e)| e == s)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn cluster_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_row_clusters()];
        for &e in &self.row_labels {
            counts[e] += 1;
        }
        counts
    }

    pub fn site_cluster_counts(&self, s: usize) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_site_clusters(s)];
        for &d in &self.site_labels[s] {
            counts[d] += 1;
        }
        counts
    }

    /// Check every structural invariant; used by tests and the per-sweep
    /// debug assertion in the chain driver. The site-cluster cap is passed
    /// in because the urn baseline is unbounded.
    pub fn validate(&self, data: &Dataset, hp: &Hyperparameters, site_cluster_cap: usize) -> Result<()> {
        let (n, j, t) = (data.n_patients(), data.n_sites(), data.n_teeth());
        let s_count = self.n_row_clusters();
        if self.row_labels.len() != n {
            return Err(Error::dim("row_labels length != patients"));
        }
        if self.row_labels.iter().any(|&e| e >= s_count) {
            return Err(Error::validation("row label out of range"));
        }
        check_simplex(&self.row_weights, "row_weights")?;
        if self.site_labels.len() != s_count
            || self.site_weights.len() != s_count
            || self.row_coefs.len() != s_count
            || self.site_coefs.len() != s_count
            || self.site_bandwidths.len() != s_count
        {
            return Err(Error::dim("per-cluster containers must have length S"));
        }
        for s in 0..s_count {
            let d_s = self.n_site_clusters(s);
            if d_s < 1 || d_s > site_cluster_cap {
                return Err(Error::validation(format!(
                    "cluster {s}: site-cluster count {d_s} outside 1..={site_cluster_cap}"
                )));
            }
            if self.site_labels[s].len() != j {
                return Err(Error::dim("site label vector length != sites"));
            }
            if self.site_labels[s].iter().any(|&d| d >= d_s) {
                return Err(Error::validation("site label out of range"));
            }
            if self.site_weights[s].len() != d_s {
                return Err(Error::dim("site weight length != site-cluster count"));
            }
            check_simplex(&self.site_weights[s], "site_weights")?;
            if self.row_coefs[s].len() != data.n_patient_covs() {
                return Err(Error::dim("row coefficient length != p"));
            }
            for g in &self.site_coefs[s] {
                if g.len() != data.n_site_covs() {
                    return Err(Error::dim("site coefficient length != q"));
                }
            }
            for a in 0..d_s {
                for b in 0..a {
                    if self.site_coefs[s][a] == self.site_coefs[s][b] {
                        return Err(Error::Degenerate(format!(
                            "cluster {s}: duplicate site coefficients {a} and {b}"
                        )));
                    }
                }
            }
        }
        for a in 0..s_count {
            for b in 0..a {
                if self.row_coefs[a] == self.row_coefs[b] {
                    return Err(Error::Degenerate(format!(
                        "duplicate row coefficients {a} and {b}"
                    )));
                }
            }
        }
        if self.spatial.rows() != n || self.spatial.cols() != j {
            return Err(Error::dim("spatial matrix must be N x J"));
        }
        if self.probit_latent.rows() != n || self.probit_latent.cols() != t {
            return Err(Error::dim("probit latent matrix must be N x T"));
        }
        for i in 0..n {
            for tt in 0..t {
                let g = self.probit_latent[(i, tt)];
                if (g > 0.0) != data.is_tooth_missing(i, tt) {
                    return Err(Error::validation(format!(
                        "latent sign disagrees with missingness at patient {} tooth {}",
                        i + 1,
                        tt + 1
                    )));
                }
            }
        }
        if !(self.noise_var > 0.0) || !(self.spatial_var > 0.0) {
            return Err(Error::validation("variances must stay positive"));
        }
        if !(self.spatial_corr > hp.corr_lower && self.spatial_corr < hp.corr_upper) {
            return Err(Error::validation("spatial correlation left its support"));
        }
        Ok(())
    }
}

fn check_simplex(w: &[f64], name: &str) -> Result<()> {
    if w.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::validation(format!("{name} has negative entries")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-8 {
        return Err(Error::validation(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

/// Draw an initial state from the priors: labels from their categorical
/// priors, coefficients from independent standard normals (jittered apart if
/// a collision ever occurs), spatial effects at zero, latents consistent
/// with the observed missingness. Deterministic in the seed.
pub fn init_state(
    data: &Dataset,
    n_row_clusters: usize,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<BiclusterState> {
    hp.validate()?;
    if n_row_clusters == 0 {
        return Err(Error::validation("need at least one patient cluster"));
    }
    if n_row_clusters > data.n_patients() {
        return Err(Error::validation(format!(
            "{} clusters for {} patients",
            n_row_clusters,
            data.n_patients()
        )));
    }
    if hp.row_concentration.len() != n_row_clusters {
        return Err(Error::dim(format!(
            "row_concentration length {} != cluster count {}",
            hp.row_concentration.len(),
            n_row_clusters
        )));
    }
    let seeds = SeedSource::new(seed);
    let mut rng = seeds.stream(StreamKind::Init, 0);
    let (n, j, t) = (data.n_patients(), data.n_sites(), data.n_teeth());
    let (p, q) = (data.n_patient_covs(), data.n_site_covs());

    let row_weights = sample_dirichlet(&hp.row_concentration, &mut rng);
    let logw: Vec<f64> = row_weights.iter().map(|w| w.ln()).collect();
    let row_labels: Vec<usize> = (0..n).map(|_| sample_categorical_log(&logw, &mut rng)).collect();

    let d_init = 3.min(hp.max_site_clusters);
    let mut site_labels = Vec::with_capacity(n_row_clusters);
    let mut site_weights = Vec::with_capacity(n_row_clusters);
    let mut site_coefs = Vec::with_capacity(n_row_clusters);
    let mut row_coefs = Vec::with_capacity(n_row_clusters);
    for _ in 0..n_row_clusters {
        let phi = sample_dirichlet(&vec![hp.site_concentration; d_init], &mut rng);
        let logphi: Vec<f64> = phi.iter().map(|w| w.ln()).collect();
        site_labels.push((0..j).map(|_| sample_categorical_log(&logphi, &mut rng)).collect());
        site_weights.push(phi);
        site_coefs.push(draw_distinct_points(d_init, q, &mut rng));
        row_coefs.push(Vec::new());
    }
    let distinct_rows = draw_distinct_points(n_row_clusters, p, &mut rng);
    for (s, v) in distinct_rows.into_iter().enumerate() {
        row_coefs[s] = v;
    }

    let mut probit_latent = Mat::zeros(n, t);
    for i in 0..n {
        for tt in 0..t {
            probit_latent[(i, tt)] =
                sample_truncated_std_normal(0.0, data.is_tooth_missing(i, tt), &mut rng);
        }
    }

    let state = BiclusterState {
        row_labels,
        row_weights,
        site_labels,
        site_weights,
        row_coefs,
        site_coefs,
        row_bandwidth: 1.0,
        site_bandwidths: vec![1.0; n_row_clusters],
        spatial: Mat::zeros(n, j),
        spatial_var: 1.0,
        spatial_corr: 0.5 * (hp.corr_lower + hp.corr_upper),
        noise_var: 1.0,
        missing_intercept: 0.0,
        missing_slope: 0.0,
        probit_latent,
    };
    state.validate(data, hp, hp.max_site_clusters)?;
    Ok(state)
}

fn draw_distinct_points<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    // collisions have probability zero; the jitter loop is a formality that
    // keeps the distinctness invariant unconditional
    loop {
        let mut collided = false;
        for a in 0..count {
            for b in 0..a {
                if pts[a] == pts[b] {
                    collided = true;
                    for v in pts[a].iter_mut() {
                        *v += 1e-6 * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
        }
        if !collided {
            return pts;
        }
    }
}

/// Derived means kept consistent with the state after every accepted move:
/// cell means, tooth means, the probit mean surface, and the per-tooth
/// missingness log-likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanCache {
    /// mu[(i,j)] = x_i·β_{e_i} + z_j·γ_{e_i, r_{e_i j}} + ν_ij.
    pub mu: Mat,
    /// Tooth averages of mu, N x T.
    pub tooth_mean: Mat,
    /// mu_star[(i,t)] = c0 + c1·tooth_mean[(i,t)].
    pub mu_star: Mat,
    /// missing_logprob(δ_it, mu_star_it), cached for the MH ratios.
    pub miss_ll: Mat,
}

impl MeanCache {
    /// Exact recomputation from the current state; also the oracle the
    /// incremental patches are checked against.
    pub fn compute(state: &BiclusterState, data: &Dataset) -> MeanCache {
        let (n, j_count, t_count) = (data.n_patients(), data.n_sites(), data.n_teeth());
        let mut mu = Mat::zeros(n, j_count);
        let mut tooth_mean = Mat::zeros(n, t_count);
        for i in 0..n {
            let s = state.row_labels[i];
            let xb = dot(data.x_row(i), &state.row_coefs[s]);
            let labels = &state.site_labels[s];
            let nu = state.spatial.row(i);
            let row = mu.row_mut(i);
            for j in 0..j_count {
                row[j] = xb + dot(data.z_row(j), &state.site_coefs[s][labels[j]]) + nu[j];
            }
            for t in 0..t_count {
                let sites = data.geometry().sites_of_tooth(t);
                tooth_mean[(i, t)] =
                    row[sites].iter().sum::<f64>() / SITES_PER_TOOTH as f64;
            }
        }
        let mut cache = MeanCache {
            mu,
            tooth_mean,
            mu_star: Mat::zeros(n, t_count),
            miss_ll: Mat::zeros(n, t_count),
        };
        cache.refresh_probit_surface(state, data);
        cache
    }

    /// Recompute mu_star and the missingness log-likelihood from the tooth
    /// means (after a change to the missingness coefficients).
    pub fn refresh_probit_surface(&mut self, state: &BiclusterState, data: &Dataset) {
        for i in 0..data.n_patients() {
            for t in 0..data.n_teeth() {
                let ms = state.missing_intercept + state.missing_slope * self.tooth_mean[(i, t)];
                self.mu_star[(i, t)] = ms;
                self.miss_ll[(i, t)] = missing_logprob(data.is_tooth_missing(i, t), ms);
            }
        }
    }

    #[inline]
    fn set_mu_star(&mut self, i: usize, t: usize, state: &BiclusterState, data: &Dataset, miss_ll: Option<f64>) {
        let ms = state.missing_intercept + state.missing_slope * self.tooth_mean[(i, t)];
        self.mu_star[(i, t)] = ms;
        self.miss_ll[(i, t)] = miss_ll
            .unwrap_or_else(|| missing_logprob(data.is_tooth_missing(i, t), ms));
    }

    /// One cell of one patient moved by `delta` (spatial update).
    #[inline]
    pub fn shift_cell(
        &mut self,
        i: usize,
        j: usize,
        tooth: usize,
        delta: f64,
        state: &BiclusterState,
        data: &Dataset,
        new_miss_ll: Option<f64>,
    ) {
        self.mu[(i, j)] += delta;
        self.tooth_mean[(i, tooth)] += delta / SITES_PER_TOOTH as f64;
        self.set_mu_star(i, tooth, state, data, new_miss_ll);
    }

    /// Every cell of one patient moved by the same `delta` (row-coefficient
    /// update).
    pub fn shift_patient(&mut self, i: usize, delta: f64, state: &BiclusterState, data: &Dataset) {
        for v in self.mu.row_mut(i) {
            *v += delta;
        }
        for t in 0..data.n_teeth() {
            self.tooth_mean[(i, t)] += delta;
            self.set_mu_star(i, t, state, data, None);
        }
    }

    /// Sparse shifts for one patient: per-site deltas plus the implied
    /// per-tooth mean deltas (site-coefficient and split/merge updates).
    pub fn shift_sites(
        &mut self,
        i: usize,
        site_shifts: &[(usize, f64)],
        tooth_shifts: &[(usize, f64)],
        state: &BiclusterState,
        data: &Dataset,
    ) {
        for &(j, d) in site_shifts {
            self.mu[(i, j)] += d;
        }
        for &(t, d) in tooth_shifts {
            self.tooth_mean[(i, t)] += d;
            self.set_mu_star(i, t, state, data, None);
        }
    }

    /// Rebuild one patient's row from scratch (label change).
    pub fn rebuild_patient(&mut self, i: usize, state: &BiclusterState, data: &Dataset) {
        let s = state.row_labels[i];
        let xb = dot(data.x_row(i), &state.row_coefs[s]);
        let labels = &state.site_labels[s];
        let nu = state.spatial.row(i);
        {
            let row = self.mu.row_mut(i);
            for j in 0..data.n_sites() {
                row[j] = xb + dot(data.z_row(j), &state.site_coefs[s][labels[j]]) + nu[j];
            }
        }
        for t in 0..data.n_teeth() {
            let sites = data.geometry().sites_of_tooth(t);
            self.tooth_mean[(i, t)] =
                self.mu.row(i)[sites].iter().sum::<f64>() / SITES_PER_TOOTH as f64;
            self.set_mu_star(i, t, state, data, None);
        }
    }

    /// Largest absolute deviation from a fresh recomputation.
    pub fn drift(&self, state: &BiclusterState, data: &Dataset) -> f64 {
        let fresh = MeanCache::compute(state, data);
        self.mu
            .max_abs_diff(&fresh.mu)
            .max(self.tooth_mean.max_abs_diff(&fresh.tooth_mean))
            .max(self.mu_star.max_abs_diff(&fresh.mu_star))
            .max(self.miss_ll.max_abs_diff(&fresh.miss_ll))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SiteGeometry;
    use crate::testutil::toy_dataset;
    use approx::assert_relative_eq;

    #[test]
    fn init_is_deterministic() {
        let data = toy_dataset(12, 2, 1);
        let hp = Hyperparameters::defaults(3);
        let a = init_state(&data, 3, &hp, 99).unwrap();
        let b = init_state(&data, 3, &hp, 99).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = init_state(&data, 3, &hp, 100).unwrap();
        assert_ne!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn init_single_cluster_labels() {
        let data = toy_dataset(6, 2, 2);
        let hp = Hyperparameters::defaults(1);
        let st = init_state(&data, 1, &hp, 5).unwrap();
        assert!(st.row_labels.iter().all(|&e| e == 0));
    }

    #[test]
    fn init_rejects_more_clusters_than_patients() {
        let data = toy_dataset(3, 2, 3);
        let hp = Hyperparameters::defaults(4);
        assert!(init_state(&data, 4, &hp, 5).is_err());
    }

    #[test]
    fn init_covers_all_labels_over_seeds() {
        // Monte-Carlo sanity oracle: with 80 patients, 3 clusters, and unit
        // concentration, P(every cluster occupied) = 1 - 3·E[(1-w)^80]
        // + 3·E[w^80] with w ~ Beta(1,2), i.e. 1 - 3/41 + 6/(81·82).
        let data = toy_dataset(80, 2, 4);
        let hp = Hyperparameters::defaults(3);
        let hits = (0..100)
            .filter(|&seed| {
                let st = init_state(&data, 3, &hp, seed).unwrap();
                st.cluster_counts().iter().all(|&c| c > 0)
            })
            .count();
        let p: f64 = 1.0 - 3.0 / 41.0 + 6.0 / (81.0 * 82.0);
        let se = (p * (1.0 - p) / 100.0).sqrt();
        assert!(
            (hits as f64 / 100.0 - p).abs() < 3.0 * se,
            "{hits}/100 vs {p:.4}"
        );
    }

    #[test]
    fn cache_zero_case() {
        let data = toy_dataset(4, 2, 6);
        let hp = Hyperparameters::defaults(2);
        let mut st = init_state(&data, 2, &hp, 7).unwrap();
        for s in 0..2 {
            st.row_coefs[s] = vec![0.0, s as f64 * 1e-9];
            for d in 0..st.n_site_clusters(s) {
                st.site_coefs[s][d] = vec![0.0, d as f64 * 1e-9];
            }
        }
        st.missing_intercept = 0.7;
        let cache = MeanCache::compute(&st, &data);
        for i in 0..4 {
            for j in 0..data.n_sites() {
                assert!(cache.mu[(i, j)].abs() < 1e-8);
            }
            for t in 0..2 {
                assert_relative_eq!(cache.mu_star[(i, t)], 0.7, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn cache_single_patient_known_coefficients() {
        // one patient, x = (1,1,1), coefficients (0.5, 1.5, 0.5), no site
        // effect and no spatial term: every cell mean is 2.5
        let g = SiteGeometry::single_jaw(1).unwrap();
        let cells = vec![vec![Some(1.0); 6]];
        let x = Mat::from_rows(vec![vec![1.0, 1.0, 1.0]]);
        let z = Mat::from_rows((0..6).map(|_| vec![1.0]).collect());
        let data = Dataset::from_cells(&cells, x, z, g).unwrap();
        let hp = Hyperparameters::defaults(1);
        let mut st = init_state(&data, 1, &hp, 1).unwrap();
        st.row_coefs[0] = vec![0.5, 1.5, 0.5];
        st.site_labels[0] = vec![0; 6];
        st.site_coefs[0] = vec![vec![0.0]];
        let cache = MeanCache::compute(&st, &data);
        for j in 0..6 {
            assert_relative_eq!(cache.mu[(0, j)], 2.5, epsilon = 1e-12);
        }
        assert_relative_eq!(cache.tooth_mean[(0, 0)], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn incremental_patches_match_recompute() {
        let data = toy_dataset(6, 3, 8);
        let hp = Hyperparameters::defaults(2);
        let mut st = init_state(&data, 2, &hp, 11).unwrap();
        st.missing_intercept = 0.2;
        st.missing_slope = -0.4;
        let mut cache = MeanCache::compute(&st, &data);

        // patient-wide shift
        st.row_coefs[0][0] += 0.3;
        for i in st.cluster_members(0) {
            let delta = data.x_row(i)[0] * 0.3;
            cache.shift_patient(i, delta, &st, &data);
        }
        assert!(cache.drift(&st, &data) < 1e-12);

        // single-cell shift
        st.spatial[(2, 5)] += 1.25;
        let tooth = data.geometry().tooth_of(5);
        cache.shift_cell(2, 5, tooth, 1.25, &st, &data, None);
        assert!(cache.drift(&st, &data) < 1e-12);

        // site-sparse shift: move one site cluster coefficient
        let s = st.row_labels[3];
        let d = st.site_labels[s][4];
        st.site_coefs[s][d][1] += 0.5;
        let site_shifts: Vec<(usize, f64)> = (0..data.n_sites())
            .filter(|&j| st.site_labels[s][j] == d)
            .map(|j| (j, data.z_row(j)[1] * 0.5))
            .collect();
        let mut tooth_shifts = vec![0.0; data.n_teeth()];
        for &(j, delta) in &site_shifts {
            tooth_shifts[data.geometry().tooth_of(j)] += delta / SITES_PER_TOOTH as f64;
        }
        let tooth_shifts: Vec<(usize, f64)> = tooth_shifts
            .into_iter()
            .enumerate()
            .filter(|(_, d)| *d != 0.0)
            .collect();
        for i in st.cluster_members(s) {
            cache.shift_sites(i, &site_shifts, &tooth_shifts, &st, &data);
        }
        assert!(cache.drift(&st, &data) < 1e-12);

        // label change
        st.row_labels[1] = 1 - st.row_labels[1];
        cache.rebuild_patient(1, &st, &data);
        assert!(cache.drift(&st, &data) < 1e-12);
    }
}
