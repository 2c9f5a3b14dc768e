//! Chain orchestration: the per-sweep kernel schedule, trace recording, the
//! scan over patient-cluster counts, and the joint density used by the
//! consistency checks.

pub mod indep;
pub mod kernels;
pub mod rj;

use std::time::Instant;

use rayon::prelude::*;

use crate::car::{gibbs_spatial_var, mh_update_corr, mh_update_spatial, precompute_car, CarStructure};
use crate::data::{AdjacencyGraph, Dataset};
use crate::dpp::log_dpp_density;
use crate::error::{Error, Result};
use crate::likelihood::gaussian_loglik;
use crate::math::{ln_gamma, log_normal_pdf};
use crate::rng::{SeedSource, StreamKind};
use crate::state::{init_state, BiclusterState, Hyperparameters, MeanCache};
use crate::trace::{AcceptanceReport, PosteriorTrace, PriorMode, RunMeta, Snapshot};

pub use kernels::SiteLabelPrior;
pub use rj::{force_split, merge_log_acceptance, split_log_jacobian, update_site_cluster_count, RjOutcome};

/// Everything configuring one chain besides the data and hyperparameters.
#[derive(Clone, Debug)]
pub struct ChainOptions {
    pub n_burn: usize,
    pub n_keep: usize,
    pub seed: u64,
    pub mode: PriorMode,
    /// Store the spatial and probit latent matrices in each snapshot.
    pub keep_latent: bool,
    /// Which prior weight the site-label scan uses.
    pub site_label_prior: SiteLabelPrior,
    /// Disable every data term, leaving the prior chain (testing hook).
    pub likelihood: bool,
}

impl ChainOptions {
    pub fn new(n_burn: usize, n_keep: usize, seed: u64) -> Self {
        ChainOptions {
            n_burn,
            n_keep,
            seed,
            mode: PriorMode::Repulsive,
            keep_latent: false,
            site_label_prior: SiteLabelPrior::SampledWeights,
            likelihood: true,
        }
    }

    pub fn with_mode(mut self, mode: PriorMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Effective cap on site-cluster counts: the urn baseline is unbounded.
fn site_cluster_cap(mode: PriorMode, data: &Dataset, hp: &Hyperparameters) -> usize {
    match mode {
        PriorMode::Repulsive => hp.max_site_clusters,
        PriorMode::Independent => data.n_sites(),
    }
}

/// Run one chain for `n_burn + n_keep` sweeps and keep every post-burn-in
/// snapshot. Deterministic in the seed.
pub fn run_chain(
    data: &Dataset,
    adjacency: &AdjacencyGraph,
    n_row_clusters: usize,
    hp: &Hyperparameters,
    opts: &ChainOptions,
) -> Result<PosteriorTrace> {
    let car = precompute_car(adjacency)?;
    run_chain_with_car(data, &car, n_row_clusters, hp, opts)
}

pub fn run_chain_with_car(
    data: &Dataset,
    car: &CarStructure,
    n_row_clusters: usize,
    hp: &Hyperparameters,
    opts: &ChainOptions,
) -> Result<PosteriorTrace> {
    let started = Instant::now();
    let hp = hp.for_row_clusters(n_row_clusters);
    let seeds = SeedSource::new(opts.seed);
    let mut state = init_state(data, n_row_clusters, &hp, opts.seed)?;
    let mut cache = MeanCache::compute(&state, data);
    let mut accept = AcceptanceReport::default();
    let mut snapshots = Vec::with_capacity(opts.n_keep);

    let total = opts.n_burn + opts.n_keep;
    for iteration in 0..total {
        sweep(
            &mut state, &mut cache, data, car, &hp, opts, &seeds, iteration as u64, &mut accept,
        )
        .map_err(|e| Error::Sampler {
            iteration,
            message: e.to_string(),
        })?;

        #[cfg(debug_assertions)]
        {
            let drift = cache.drift(&state, data);
            debug_assert!(drift < 1e-10, "cache drift {drift} at iteration {iteration}");
            state
                .validate(data, &hp, site_cluster_cap(opts.mode, data, &hp))
                .expect("state invariant violated");
        }

        if iteration >= opts.n_burn {
            let log_pred = kernels::log_pred_per_patient(&cache, data, state.noise_var);
            snapshots.push(Snapshot::from_state(
                iteration,
                &state,
                log_pred,
                accept,
                opts.keep_latent,
            ));
        }
    }

    Ok(PosteriorTrace {
        meta: RunMeta {
            n_row_clusters,
            seed: opts.seed,
            mode: opts.mode,
            n_burn: opts.n_burn,
            n_keep: opts.n_keep,
            runtime_secs: started.elapsed().as_secs_f64(),
            accept,
        },
        snapshots,
    })
}

/// One full sweep: weights, labels, coefficients, missingness regression,
/// exact cache refresh, spatial block, latents, bandwidths, split/merge,
/// noise variance.
#[allow(clippy::too_many_arguments)]
fn sweep(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    car: &CarStructure,
    hp: &Hyperparameters,
    opts: &ChainOptions,
    seeds: &SeedSource,
    iteration: u64,
    accept: &mut AcceptanceReport,
) -> Result<()> {
    let mode = opts.mode;
    let likelihood = opts.likelihood;

    kernels::gibbs_weights(state, hp, mode, &mut seeds.stream(StreamKind::Weights, iteration));

    kernels::gibbs_row_labels(state, cache, data, likelihood, seeds, iteration);

    match mode {
        PriorMode::Repulsive => {
            kernels::gibbs_site_labels(
                state,
                cache,
                data,
                opts.site_label_prior,
                likelihood,
                seeds,
                iteration,
            );
        }
        PriorMode::Independent => {
            indep::polya_urn_site_labels(state, cache, data, hp, likelihood, seeds, iteration);
        }
    }

    kernels::mh_row_coefs(
        state, cache, data, hp, mode, likelihood, seeds, iteration, &mut accept.row_coef,
    )?;
    kernels::mh_site_coefs(
        state, cache, data, hp, mode, likelihood, seeds, iteration, &mut accept.site_coef,
    )?;

    kernels::gibbs_missing_coefs(
        state,
        cache,
        data,
        hp,
        &mut seeds.stream(StreamKind::MissingCoefs, iteration),
    );

    // exact recomputation point: incremental patches accumulate no error
    *cache = MeanCache::compute(state, data);

    let (acc, prop) = mh_update_spatial(state, cache, data, car, hp, likelihood, seeds, iteration);
    accept.spatial.add_many(acc, prop);
    gibbs_spatial_var(
        state,
        car,
        hp,
        &mut seeds.stream(StreamKind::SpatialVar, iteration),
    );
    accept.corr.add(mh_update_corr(
        state,
        car,
        hp,
        &mut seeds.stream(StreamKind::SpatialCorr, iteration),
    ));

    kernels::gibbs_probit_latent(state, cache, data, seeds, iteration);

    if mode == PriorMode::Repulsive {
        kernels::mh_bandwidths(
            state,
            hp,
            &mut seeds.stream(StreamKind::Bandwidth, iteration),
            &mut accept.bandwidth_row,
            &mut accept.bandwidth_site,
        );
        for s in 0..state.n_row_clusters() {
            let mut rng = seeds.unit_stream(StreamKind::SplitMerge, iteration, s as u64);
            let outcome = update_site_cluster_count(state, cache, data, hp, s, likelihood, &mut rng);
            if outcome.was_split {
                accept.split.add(outcome.accepted);
            } else {
                accept.merge.add(outcome.accepted);
            }
        }
    }

    kernels::gibbs_noise_var(
        state,
        cache,
        data,
        hp,
        &mut seeds.stream(StreamKind::NoiseVar, iteration),
    );
    Ok(())
}

/// One row of a scan over patient-cluster counts.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ScanRow {
    pub n_row_clusters: usize,
    pub waic: f64,
    pub lppd: f64,
    pub p_eff: f64,
    pub runtime_secs: f64,
}

/// Fit every requested cluster count (chains run in parallel across the
/// thread pool) and report the information criterion per count. Lower is
/// better; the summary layer marks the minimum.
pub fn waic_scan(
    data: &Dataset,
    adjacency: &AdjacencyGraph,
    counts: &[usize],
    hp: &Hyperparameters,
    opts: &ChainOptions,
) -> Result<Vec<ScanRow>> {
    let car = precompute_car(adjacency)?;
    let mut rows: Vec<ScanRow> = counts
        .par_iter()
        .map(|&s| {
            let trace = run_chain_with_car(data, &car, s, hp, opts)?;
            let w = crate::summary::waic(&trace)?;
            Ok(ScanRow {
                n_row_clusters: s,
                waic: w.waic,
                lppd: w.lppd,
                p_eff: w.p_eff,
                runtime_secs: trace.meta.runtime_secs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.n_row_clusters);
    Ok(rows)
}

/// Augmented joint log density of data and state: observation terms, the
/// probit latents around their mean surface, and every prior. Normalizers
/// that cancel in all acceptance ratios (the repulsive configuration
/// normalizer at fixed cluster count) are dropped consistently.
pub fn joint_log_density(
    state: &BiclusterState,
    data: &Dataset,
    car: &CarStructure,
    hp: &Hyperparameters,
    mode: PriorMode,
) -> Result<f64> {
    let cache = MeanCache::compute(state, data);
    let mut total = 0.0;

    // observations
    for i in 0..data.n_patients() {
        for j in 0..data.n_sites() {
            if data.is_observed(i, j) {
                total += gaussian_loglik(data.y(i, j), cache.mu[(i, j)], state.noise_var);
            }
        }
    }
    // probit latents (their sign carries the missingness indicators)
    for i in 0..data.n_patients() {
        for t in 0..data.n_teeth() {
            total += log_normal_pdf(state.probit_latent[(i, t)], cache.mu_star[(i, t)], 1.0);
        }
    }
    // labels and weights
    for &e in &state.row_labels {
        total += state.row_weights[e].ln();
    }
    total += log_dirichlet_pdf(&state.row_weights, &hp.row_concentration);
    match mode {
        PriorMode::Repulsive => {
            for s in 0..state.n_row_clusters() {
                let conc = vec![hp.site_concentration; state.n_site_clusters(s)];
                total += log_dirichlet_pdf(&state.site_weights[s], &conc);
                for &d in &state.site_labels[s] {
                    total += state.site_weights[s][d].ln();
                }
                // coefficient configuration and cluster-count prior; their
                // shared normalizer cancels exactly
                total += log_dpp_density(&state.site_coefs[s], state.site_bandwidths[s])?;
                total -= ln_gamma(state.n_site_clusters(s) as f64 + 1.0);
                total += log_normal_pdf(state.site_bandwidths[s], 0.0, hp.site_bandwidth_var);
            }
            total += log_dpp_density(&state.row_coefs, state.row_bandwidth)?;
            total += log_normal_pdf(state.row_bandwidth, 0.0, hp.row_bandwidth_var);
        }
        PriorMode::Independent => {
            for s in 0..state.n_row_clusters() {
                let counts = state.site_cluster_counts(s);
                total += counts.len() as f64 * hp.urn_mass.ln();
                for &c in &counts {
                    if c > 0 {
                        total += ln_gamma(c as f64);
                    }
                }
                for gamma in &state.site_coefs[s] {
                    for &v in gamma {
                        total += log_normal_pdf(v, 0.0, hp.indep_prior_var);
                    }
                }
            }
            for beta in &state.row_coefs {
                for &v in beta {
                    total += log_normal_pdf(v, 0.0, hp.indep_prior_var);
                }
            }
        }
    }
    // spatial block
    for i in 0..data.n_patients() {
        total += crate::car::car_logpdf(
            state.spatial.row(i),
            state.spatial_var,
            state.spatial_corr,
            car,
        );
    }
    total += log_inverse_gamma_pdf(state.spatial_var, hp.spatial_shape, hp.spatial_scale);
    if state.spatial_corr <= hp.corr_lower || state.spatial_corr >= hp.corr_upper {
        return Err(Error::validation("correlation outside prior support"));
    }
    total -= (hp.corr_upper - hp.corr_lower).ln();
    // scalar priors
    total += log_inverse_gamma_pdf(state.noise_var, hp.noise_shape, hp.noise_scale);
    total += log_normal_pdf(state.missing_intercept, 0.0, hp.missing_coef_var);
    total += log_normal_pdf(state.missing_slope, 0.0, hp.missing_coef_var);
    Ok(total)
}

fn log_dirichlet_pdf(w: &[f64], conc: &[f64]) -> f64 {
    let mut total = ln_gamma(conc.iter().sum());
    for (&wi, &a) in w.iter().zip(conc) {
        total -= ln_gamma(a);
        total += (a - 1.0) * wi.ln();
    }
    total
}

fn log_inverse_gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Likelihood-only part of the joint: Gaussian observation terms plus the
/// integrated missingness probabilities. Invariant under any relabeling.
pub fn data_log_likelihood(state: &BiclusterState, data: &Dataset) -> f64 {
    let cache = MeanCache::compute(state, data);
    let mut total = 0.0;
    for i in 0..data.n_patients() {
        for j in 0..data.n_sites() {
            if data.is_observed(i, j) {
                total += gaussian_loglik(data.y(i, j), cache.mu[(i, j)], state.noise_var);
            }
        }
        for t in 0..data.n_teeth() {
            total += cache.miss_ll[(i, t)];
        }
    }
    total
}
