//! Per-sweep conditional updates: weights, labels, coefficients, the
//! missingness regression, latents, bandwidths, and the noise variance.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, SITES_PER_TOOTH};
use crate::dpp::{log_dpp_density, schur_log_ratio};
use crate::error::Result;
use crate::likelihood::missing_logprob;
use crate::mat::{dot, Mat};
use crate::math::{
    log_normal_pdf, sample_categorical_log, sample_dirichlet, sample_inverse_gamma,
    sample_truncated_std_normal, LOG_2PI,
};
use crate::rng::{SeedSource, StreamKind};
use crate::state::{BiclusterState, Hyperparameters, MeanCache};
use crate::trace::{Counter, PriorMode};

/// Conjugate Dirichlet draws for the patient weights and, under the
/// repulsive prior, each cluster's site weights.
pub fn gibbs_weights<R: Rng + ?Sized>(
    state: &mut BiclusterState,
    hp: &Hyperparameters,
    mode: PriorMode,
    rng: &mut R,
) {
    let counts = state.cluster_counts();
    let conc: Vec<f64> = hp
        .row_concentration
        .iter()
        .zip(&counts)
        .map(|(&a, &n)| a + n as f64)
        .collect();
    state.row_weights = sample_dirichlet(&conc, rng);
    if mode == PriorMode::Repulsive {
        for s in 0..state.n_row_clusters() {
            let site_counts = state.site_cluster_counts(s);
            let conc: Vec<f64> = site_counts
                .iter()
                .map(|&n| hp.site_concentration + n as f64)
                .collect();
            state.site_weights[s] = sample_dirichlet(&conc, rng);
        }
    }
}

/// Gibbs scan over the patient labels. The full conditionals are
/// independent across patients given everything else, so each patient draws
/// from its own substream and the cache rows are rebuilt afterwards.
pub fn gibbs_row_labels(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    likelihood: bool,
    seeds: &SeedSource,
    iteration: u64,
) -> usize {
    let s_count = state.n_row_clusters();
    if s_count == 1 {
        return 0;
    }
    let (n, j_count, t_count) = (data.n_patients(), data.n_sites(), data.n_teeth());
    let log_w: Vec<f64> = state.row_weights.iter().map(|w| w.ln()).collect();

    // z_j·γ_{s, r_sj} per (s, j), and its tooth averages
    let mut zg = Mat::zeros(s_count, j_count);
    let mut zg_tooth = Mat::zeros(s_count, t_count);
    for s in 0..s_count {
        let row = zg.row_mut(s);
        for (j, rj) in state.site_labels[s].iter().enumerate() {
            row[j] = dot(data.z_row(j), &state.site_coefs[s][*rj]);
        }
        for t in 0..t_count {
            let sites = data.geometry().sites_of_tooth(t);
            zg_tooth[(s, t)] = row[sites].iter().sum::<f64>() / SITES_PER_TOOTH as f64;
        }
    }
    // tooth averages of the spatial rows
    let mut nu_tooth = Mat::zeros(n, t_count);
    for i in 0..n {
        let nu = state.spatial.row(i);
        for t in 0..t_count {
            let sites = data.geometry().sites_of_tooth(t);
            nu_tooth[(i, t)] = nu[sites].iter().sum::<f64>() / SITES_PER_TOOTH as f64;
        }
    }

    let inv_2s2 = 0.5 / state.noise_var;
    let mut changed = Vec::new();
    let mut lw = vec![0.0; s_count];
    for i in 0..n {
        let mut rng = seeds.unit_stream(StreamKind::RowLabels, iteration, i as u64);
        let y = data.y_row(i);
        let obs = data.observed_row(i);
        let nu = state.spatial.row(i);
        for s in 0..s_count {
            let xb = dot(data.x_row(i), &state.row_coefs[s]);
            let mut ll = log_w[s];
            if likelihood {
                let zg_s = zg.row(s);
                let mut ssr = 0.0;
                for j in 0..j_count {
                    if obs[j] {
                        let r = y[j] - nu[j] - xb - zg_s[j];
                        ssr += r * r;
                    }
                }
                ll -= ssr * inv_2s2;
                for t in 0..t_count {
                    let tm = xb + zg_tooth[(s, t)] + nu_tooth[(i, t)];
                    ll += missing_logprob(
                        data.is_tooth_missing(i, t),
                        state.missing_intercept + state.missing_slope * tm,
                    );
                }
            }
            lw[s] = ll;
        }
        let new = sample_categorical_log(&lw, &mut rng);
        if new != state.row_labels[i] {
            state.row_labels[i] = new;
            changed.push(i);
        }
    }
    for &i in &changed {
        cache.rebuild_patient(i, state, data);
    }
    changed.len()
}

/// Which prior weight enters the site-label full conditional: the sampled
/// site weights (default) or, for comparison, the raw Dirichlet
/// concentration as the conditional is typeset in some derivations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteLabelPrior {
    SampledWeights,
    Concentration,
}

/// Gibbs scan over the nested site labels for every patient cluster.
/// Sequential within a cluster: reassigning a site moves its tooth mean,
/// which the remaining sites' missingness terms must see.
pub fn gibbs_site_labels(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    prior: SiteLabelPrior,
    likelihood: bool,
    seeds: &SeedSource,
    iteration: u64,
) -> usize {
    let s_count = state.n_row_clusters();
    let j_count = data.n_sites();
    let mut changed = 0;
    for s in 0..s_count {
        let d_count = state.n_site_clusters(s);
        if d_count == 1 {
            continue;
        }
        let mut rng = seeds.unit_stream(StreamKind::SiteLabels, iteration, s as u64);
        let members = state.cluster_members(s);
        let log_prior: Vec<f64> = match prior {
            SiteLabelPrior::SampledWeights => {
                state.site_weights[s].iter().map(|w| w.ln()).collect()
            }
            // symmetric concentration: a flat prior weight up to a constant
            SiteLabelPrior::Concentration => vec![0.0; d_count],
        };
        let inv_2s2 = 0.5 / state.noise_var;
        let mut lw = vec![0.0; d_count];
        for j in 0..j_count {
            let cur = state.site_labels[s][j];
            let tooth = data.geometry().tooth_of(j);
            let z_j = data.z_row(j);
            let zg_cur = dot(z_j, &state.site_coefs[s][cur]);
            for d in 0..d_count {
                let mut ll = log_prior[d];
                if likelihood && !members.is_empty() {
                    if d == cur {
                        for &i in &members {
                            if data.is_observed(i, j) {
                                let r = data.y(i, j) - cache.mu[(i, j)];
                                ll -= r * r * inv_2s2;
                            }
                            ll += cache.miss_ll[(i, tooth)];
                        }
                    } else {
                        let delta = dot(z_j, &state.site_coefs[s][d]) - zg_cur;
                        let tooth_delta = delta / SITES_PER_TOOTH as f64;
                        for &i in &members {
                            if data.is_observed(i, j) {
                                let r = data.y(i, j) - cache.mu[(i, j)] - delta;
                                ll -= r * r * inv_2s2;
                            }
                            ll += missing_logprob(
                                data.is_tooth_missing(i, tooth),
                                state.missing_intercept
                                    + state.missing_slope
                                        * (cache.tooth_mean[(i, tooth)] + tooth_delta),
                            );
                        }
                    }
                }
                lw[d] = ll;
            }
            let new = sample_categorical_log(&lw, &mut rng);
            if new != cur {
                state.site_labels[s][j] = new;
                let delta = dot(z_j, &state.site_coefs[s][new]) - zg_cur;
                for &i in &members {
                    cache.shift_cell(i, j, tooth, delta, state, data, None);
                }
                changed += 1;
            }
        }
    }
    changed
}

/// Entrywise Metropolis updates of the per-cluster patient coefficients.
/// A move shifts every cell of the cluster's patients by the same amount,
/// so the observation term reduces to residual sums.
#[allow(clippy::too_many_arguments)]
pub fn mh_row_coefs(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    mode: PriorMode,
    likelihood: bool,
    seeds: &SeedSource,
    iteration: u64,
    counter: &mut Counter,
) -> Result<()> {
    let p = data.n_patient_covs();
    let t_count = data.n_teeth();
    let inv_2s2 = 0.5 / state.noise_var;
    for s in 0..state.n_row_clusters() {
        let mut rng = seeds.unit_stream(StreamKind::RowCoefs, iteration, s as u64);
        let members = state.cluster_members(s);
        // per-member residual sums over observed cells
        let mut res_sum = vec![0.0; members.len()];
        let mut n_obs = vec![0.0; members.len()];
        if likelihood {
            for (m, &i) in members.iter().enumerate() {
                let y = data.y_row(i);
                let obs = data.observed_row(i);
                let mu = cache.mu.row(i);
                let (mut rs, mut no) = (0.0, 0.0);
                for j in 0..data.n_sites() {
                    if obs[j] {
                        rs += y[j] - mu[j];
                        no += 1.0;
                    }
                }
                res_sum[m] = rs;
                n_obs[m] = no;
            }
        }
        for k in 0..p {
            let step: f64 = rng.sample::<f64, _>(StandardNormal) * hp.step_row_coef;
            let mut proposal = state.row_coefs[s].clone();
            proposal[k] += step;
            let log_prior = match mode {
                PriorMode::Repulsive => {
                    schur_log_ratio(&state.row_coefs, s, &proposal, state.row_bandwidth)?
                }
                PriorMode::Independent => {
                    log_normal_pdf(proposal[k], 0.0, hp.indep_prior_var)
                        - log_normal_pdf(state.row_coefs[s][k], 0.0, hp.indep_prior_var)
                }
            };
            let mut log_accept = log_prior;
            if likelihood && log_accept > f64::NEG_INFINITY {
                for (m, &i) in members.iter().enumerate() {
                    let shift = data.x_row(i)[k] * step;
                    log_accept -= (n_obs[m] * shift * shift - 2.0 * shift * res_sum[m]) * inv_2s2;
                    for t in 0..t_count {
                        log_accept += missing_logprob(
                            data.is_tooth_missing(i, t),
                            state.missing_intercept
                                + state.missing_slope * (cache.tooth_mean[(i, t)] + shift),
                        ) - cache.miss_ll[(i, t)];
                    }
                }
            }
            let accept = log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept;
            counter.add(accept);
            if accept {
                state.row_coefs[s] = proposal;
                if likelihood {
                    for (m, &i) in members.iter().enumerate() {
                        let shift = data.x_row(i)[k] * step;
                        cache.shift_patient(i, shift, state, data);
                        res_sum[m] -= n_obs[m] * shift;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Entrywise Metropolis updates of the site-cluster coefficients; the
/// likelihood touches only the owning bicluster's cells and the teeth that
/// contain them.
#[allow(clippy::too_many_arguments)]
pub fn mh_site_coefs(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    mode: PriorMode,
    likelihood: bool,
    seeds: &SeedSource,
    iteration: u64,
    counter: &mut Counter,
) -> Result<()> {
    let q = data.n_site_covs();
    let inv_2s2 = 0.5 / state.noise_var;
    let sites_per_tooth = SITES_PER_TOOTH as f64;
    for s in 0..state.n_row_clusters() {
        let mut rng = seeds.unit_stream(StreamKind::SiteCoefs, iteration, s as u64);
        let members = state.cluster_members(s);
        for d in 0..state.n_site_clusters(s) {
            let sites: Vec<usize> = (0..data.n_sites())
                .filter(|&j| state.site_labels[s][j] == d)
                .collect();
            for k in 0..q {
                let step: f64 = rng.sample::<f64, _>(StandardNormal) * hp.step_site_coef;
                let mut proposal = state.site_coefs[s][d].clone();
                proposal[k] += step;
                let log_prior = match mode {
                    PriorMode::Repulsive => schur_log_ratio(
                        &state.site_coefs[s],
                        d,
                        &proposal,
                        state.site_bandwidths[s],
                    )?,
                    PriorMode::Independent => {
                        log_normal_pdf(proposal[k], 0.0, hp.indep_prior_var)
                            - log_normal_pdf(state.site_coefs[s][d][k], 0.0, hp.indep_prior_var)
                    }
                };
                let mut log_accept = log_prior;
                let mut site_shifts: Vec<(usize, f64)> = Vec::new();
                let mut tooth_shifts: Vec<(usize, f64)> = Vec::new();
                if likelihood && log_accept > f64::NEG_INFINITY && !sites.is_empty() {
                    site_shifts = sites
                        .iter()
                        .map(|&j| (j, data.z_row(j)[k] * step))
                        .collect();
                    let mut per_tooth = std::collections::BTreeMap::new();
                    for &(j, delta) in &site_shifts {
                        *per_tooth.entry(data.geometry().tooth_of(j)).or_insert(0.0) +=
                            delta / sites_per_tooth;
                    }
                    tooth_shifts = per_tooth.into_iter().collect();
                    for &i in &members {
                        for &(j, delta) in &site_shifts {
                            if data.is_observed(i, j) {
                                let r = data.y(i, j) - cache.mu[(i, j)];
                                log_accept -= (delta * delta - 2.0 * delta * r) * inv_2s2;
                            }
                        }
                        for &(t, tooth_delta) in &tooth_shifts {
                            log_accept += missing_logprob(
                                data.is_tooth_missing(i, t),
                                state.missing_intercept
                                    + state.missing_slope
                                        * (cache.tooth_mean[(i, t)] + tooth_delta),
                            ) - cache.miss_ll[(i, t)];
                        }
                    }
                }
                let accept = log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept;
                counter.add(accept);
                if accept {
                    state.site_coefs[s][d] = proposal;
                    if likelihood {
                        for &i in &members {
                            cache.shift_sites(i, &site_shifts, &tooth_shifts, state, data);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Conjugate bivariate normal draw for the missingness regression of the
/// probit latents on (1, tooth mean), with unit noise and a zero-mean
/// normal prior. Refreshes the probit surface afterwards.
pub fn gibbs_missing_coefs<R: Rng + ?Sized>(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    rng: &mut R,
) {
    let (n, t_count) = (data.n_patients(), data.n_teeth());
    let (mut s_m, mut s_mm, mut s_g, mut s_mg) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for t in 0..t_count {
            let m = cache.tooth_mean[(i, t)];
            let g = state.probit_latent[(i, t)];
            s_m += m;
            s_mm += m * m;
            s_g += g;
            s_mg += m * g;
        }
    }
    let prior_prec = 1.0 / hp.missing_coef_var;
    // posterior precision = XᵀX + prior, rhs = Xᵀg
    let a11 = (n * t_count) as f64 + prior_prec;
    let a12 = s_m;
    let a22 = s_mm + prior_prec;
    // 2x2 Cholesky of the precision
    let l11 = a11.sqrt();
    let l21 = a12 / l11;
    let l22 = (a22 - l21 * l21).sqrt();
    // mean = Λ^{-1} rhs
    let u1 = s_g / l11;
    let u2 = (s_mg - l21 * u1) / l22;
    let mean1 = u2 / l22;
    let mean0 = (u1 - l21 * mean1) / l11;
    // draw = mean + L^{-T} ξ
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    let d1 = z1 / l22;
    let d0 = (z0 - l21 * d1) / l11;
    state.missing_intercept = mean0 + d0;
    state.missing_slope = mean1 + d1;
    cache.refresh_probit_surface(state, data);
}

/// Truncated-normal refresh of the probit latents, signed by the observed
/// missingness.
pub fn gibbs_probit_latent(
    state: &mut BiclusterState,
    cache: &MeanCache,
    data: &Dataset,
    seeds: &SeedSource,
    iteration: u64,
) {
    for i in 0..data.n_patients() {
        let mut rng = seeds.unit_stream(StreamKind::ProbitLatent, iteration, i as u64);
        for t in 0..data.n_teeth() {
            state.probit_latent[(i, t)] = sample_truncated_std_normal(
                cache.mu_star[(i, t)],
                data.is_tooth_missing(i, t),
                &mut rng,
            );
        }
    }
}

/// Random-walk Metropolis on the kernel bandwidths. The configuration
/// density is the Gram log-determinant; a proposal that makes the Gram
/// numerically singular is rejected outright.
pub fn mh_bandwidths<R: Rng + ?Sized>(
    state: &mut BiclusterState,
    hp: &Hyperparameters,
    rng: &mut R,
    row_counter: &mut Counter,
    site_counter: &mut Counter,
) {
    let propose = |cur: f64, rng: &mut R| cur + rng.sample::<f64, _>(StandardNormal) * hp.step_bandwidth;

    let prop = propose(state.row_bandwidth, rng);
    let log_accept = bandwidth_log_ratio(
        &state.row_coefs,
        state.row_bandwidth,
        prop,
        hp.row_bandwidth_var,
    );
    let accept = log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept;
    row_counter.add(accept);
    if accept {
        state.row_bandwidth = prop;
    }

    for s in 0..state.n_row_clusters() {
        let prop = propose(state.site_bandwidths[s], rng);
        let log_accept = bandwidth_log_ratio(
            &state.site_coefs[s],
            state.site_bandwidths[s],
            prop,
            hp.site_bandwidth_var,
        );
        let accept = log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept;
        site_counter.add(accept);
        if accept {
            state.site_bandwidths[s] = prop;
        }
    }
}

fn bandwidth_log_ratio(points: &[Vec<f64>], cur: f64, prop: f64, prior_var: f64) -> f64 {
    let new_det = match log_dpp_density(points, prop) {
        Ok(v) => v,
        Err(_) => return f64::NEG_INFINITY,
    };
    let old_det = log_dpp_density(points, cur)
        .expect("current bandwidth cannot be degenerate for a valid configuration");
    new_det - old_det + log_normal_pdf(prop, 0.0, prior_var) - log_normal_pdf(cur, 0.0, prior_var)
}

/// Conjugate inverse-gamma draw for the observation noise variance.
pub fn gibbs_noise_var<R: Rng + ?Sized>(
    state: &mut BiclusterState,
    cache: &MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    rng: &mut R,
) {
    let mut ssr = 0.0;
    let mut n_obs = 0usize;
    for i in 0..data.n_patients() {
        let y = data.y_row(i);
        let obs = data.observed_row(i);
        let mu = cache.mu.row(i);
        for j in 0..data.n_sites() {
            if obs[j] {
                let r = y[j] - mu[j];
                ssr += r * r;
                n_obs += 1;
            }
        }
    }
    state.noise_var = sample_inverse_gamma(
        hp.noise_shape + n_obs as f64 / 2.0,
        hp.noise_scale + ssr / 2.0,
        rng,
    );
}

/// Per-patient log predictive density over observed cells at the current
/// state, the quantity the information criterion integrates.
pub fn log_pred_per_patient(cache: &MeanCache, data: &Dataset, noise_var: f64) -> Vec<f64> {
    let half_const = 0.5 * (LOG_2PI + noise_var.ln());
    let inv_2s2 = 0.5 / noise_var;
    (0..data.n_patients())
        .map(|i| {
            let y = data.y_row(i);
            let obs = data.observed_row(i);
            let mu = cache.mu.row(i);
            let mut ssr = 0.0;
            let mut n = 0.0;
            for j in 0..data.n_sites() {
                if obs[j] {
                    let r = y[j] - mu[j];
                    ssr += r * r;
                    n += 1.0;
                }
            }
            -n * half_const - ssr * inv_2s2
        })
        .collect()
}
