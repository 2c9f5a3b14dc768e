//! Independent-prior baseline: urn-scheme resampling of the nested site
//! labels with cluster birth from the coefficient prior and removal of
//! emptied clusters. Replaces both the site-label Gibbs scan and the
//! split/merge move when the chain runs without repulsion.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, SITES_PER_TOOTH};
use crate::likelihood::missing_logprob;
use crate::mat::dot;
use crate::math::sample_categorical_log;
use crate::rng::{SeedSource, StreamKind};
use crate::state::{BiclusterState, Hyperparameters, MeanCache};

/// One restaurant-style sweep over every cluster's site labels: each site
/// leaves its cluster (dissolving it if emptied) and rejoins an existing
/// cluster with weight proportional to its occupancy times the site
/// likelihood, or a fresh cluster with weight proportional to the total
/// mass, its coefficients drawn from the independent prior.
pub fn polya_urn_site_labels(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    likelihood: bool,
    seeds: &SeedSource,
    iteration: u64,
) {
    let j_count = data.n_sites();
    let sites_per_tooth = SITES_PER_TOOTH as f64;
    for s in 0..state.n_row_clusters() {
        let mut rng = seeds.unit_stream(StreamKind::PolyaUrn, iteration, s as u64);
        let members = state.cluster_members(s);
        let inv_2s2 = 0.5 / state.noise_var;
        let mut counts = state.site_cluster_counts(s);
        for j in 0..j_count {
            let cur = state.site_labels[s][j];
            let old_gamma = state.site_coefs[s][cur].clone();
            counts[cur] -= 1;
            if counts[cur] == 0 {
                counts.remove(cur);
                state.site_coefs[s].remove(cur);
                for lab in state.site_labels[s].iter_mut() {
                    if *lab > cur {
                        *lab -= 1;
                    }
                }
            }
            let d_count = counts.len();
            // fresh-cluster coefficients from the independent prior
            let sd = hp.indep_prior_var.sqrt();
            let fresh: Vec<f64> = (0..data.n_site_covs())
                .map(|_| rng.sample::<f64, _>(StandardNormal) * sd)
                .collect();

            let zg_old = dot(data.z_row(j), &old_gamma);
            let tooth = data.geometry().tooth_of(j);
            let site_loglik = |gamma: &[f64]| -> f64 {
                if !likelihood || members.is_empty() {
                    return 0.0;
                }
                let delta = dot(data.z_row(j), gamma) - zg_old;
                let mut ll = 0.0;
                for &i in &members {
                    if data.is_observed(i, j) {
                        let r = data.y(i, j) - cache.mu[(i, j)] - delta;
                        ll -= r * r * inv_2s2;
                    }
                    ll += missing_logprob(
                        data.is_tooth_missing(i, tooth),
                        state.missing_intercept
                            + state.missing_slope
                                * (cache.tooth_mean[(i, tooth)] + delta / sites_per_tooth),
                    );
                }
                ll
            };

            let mut lw: Vec<f64> = (0..d_count)
                .map(|d| (counts[d] as f64).ln() + site_loglik(&state.site_coefs[s][d]))
                .collect();
            lw.push(hp.urn_mass.ln() + site_loglik(&fresh));

            let pick = sample_categorical_log(&lw, &mut rng);
            let new_gamma = if pick == d_count {
                counts.push(1);
                state.site_coefs[s].push(fresh.clone());
                fresh
            } else {
                counts[pick] += 1;
                state.site_coefs[s][pick].clone()
            };
            state.site_labels[s][j] = pick;
            let delta = dot(data.z_row(j), &new_gamma) - zg_old;
            if delta != 0.0 {
                for &i in &members {
                    cache.shift_cell(i, j, tooth, delta, state, data, None);
                }
            }
        }
        // occupancy frequencies stand in for the site weights downstream
        state.site_weights[s] = counts.iter().map(|&c| c as f64 / j_count as f64).collect();
    }
}
