//! Trans-dimensional moves on the site-cluster count: moment-matched
//! split/merge with a weighted site reallocation proposal.
//!
//! A split of cluster d draws α ~ Beta(1,1) and auxiliaries
//! β_k ~ Beta(2,2), sets
//!
//! ```text
//! w̃1 = w1·α              γ̃1k = γ1k − √((1−α)/α)·βk
//! w̃2 = w1·(1−α)          γ̃2k = γ1k + √(α/(1−α))·βk
//! ```
//!
//! so the weighted coefficient mean is preserved exactly, then reallocates
//! the cluster's sites between the two halves with probability proportional
//! to new weight times site likelihood. The Jacobian of the transform is
//! w1·[α(1−α)]^{-l/2}. A merge inverts the construction: the auxiliaries
//! and the reallocation are reconstructed from the pair being merged, and
//! its log acceptance is the negative of the matching split's, identically.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, SITES_PER_TOOTH};
use crate::dpp::log_dpp_density;
use crate::likelihood::missing_logprob;
use crate::mat::dot;
use crate::math::{ln_beta, log_beta_pdf, log_sum_exp};
use crate::state::{BiclusterState, Hyperparameters, MeanCache};

/// Probability of proposing a merge at the given cluster count.
fn merge_prob(d_count: usize, d_max: usize) -> f64 {
    if d_count >= d_max {
        1.0
    } else if d_count >= 2 {
        0.5
    } else {
        0.0
    }
}

/// The deterministic part of a split: moment-matched weights and
/// coefficients.
fn split_transform(w1: f64, gamma1: &[f64], alpha: f64, beta_aux: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
    let w1_new = w1 * alpha;
    let w2_new = w1 * (1.0 - alpha);
    let down = ((1.0 - alpha) / alpha).sqrt();
    let up = (alpha / (1.0 - alpha)).sqrt();
    let g1: Vec<f64> = gamma1
        .iter()
        .zip(beta_aux)
        .map(|(&g, &b)| g - down * b)
        .collect();
    let g2: Vec<f64> = gamma1
        .iter()
        .zip(beta_aux)
        .map(|(&g, &b)| g + up * b)
        .collect();
    (w1_new, w2_new, g1, g2)
}

/// log |det J| of (w1, γ1, α, β) → (w̃1, w̃2, γ̃1, γ̃2).
pub fn split_log_jacobian(w1: f64, alpha: f64, dim: usize) -> f64 {
    w1.ln() - 0.5 * dim as f64 * (alpha * (1.0 - alpha)).ln()
}

/// Base configuration a split is evaluated against. For a forward split it
/// is the live state; for a merge it is the virtual post-merge state,
/// expressed as per-site and per-tooth offsets from the live cache.
struct BaseView {
    site_delta: Vec<f64>,
    tooth_delta: Vec<f64>,
}

impl BaseView {
    fn identity(n_sites: usize, n_teeth: usize) -> Self {
        BaseView {
            site_delta: vec![0.0; n_sites],
            tooth_delta: vec![0.0; n_teeth],
        }
    }

    #[inline]
    fn mu(&self, cache: &MeanCache, i: usize, j: usize) -> f64 {
        cache.mu[(i, j)] + self.site_delta[j]
    }

    #[inline]
    fn tooth_mean(&self, cache: &MeanCache, i: usize, t: usize) -> f64 {
        cache.tooth_mean[(i, t)] + self.tooth_delta[t]
    }
}

struct SplitEval {
    log_ratio: f64,
    /// Per entry of `sites`: assigned to the second (new) half.
    to_second: Vec<bool>,
    w1_new: f64,
    w2_new: f64,
    gamma1_new: Vec<f64>,
    gamma2_new: Vec<f64>,
}

/// Everything entering a split's log acceptance ratio, evaluated from an
/// arbitrary base configuration. `forced` fixes the reallocation (merge
/// reversal); otherwise it is drawn from the weighted proposal.
#[allow(clippy::too_many_arguments)]
fn eval_split(
    state: &BiclusterState,
    cache: &MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    view: &BaseView,
    members: &[usize],
    base_gammas: &[Vec<f64>],
    base_phi_d: f64,
    split_at: usize,
    sites: &[usize],
    bandwidth: f64,
    alpha: f64,
    beta_aux: &[f64],
    likelihood: bool,
    forced: Option<&[bool]>,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Option<SplitEval> {
    let dim = beta_aux.len();
    let d_base = base_gammas.len();
    debug_assert!(alpha > 0.0 && alpha < 1.0);

    // auxiliary density; a merge whose reconstructed auxiliaries fall
    // outside the Beta support can never be reached by a split
    let mut log_aux = 0.0;
    for &b in beta_aux {
        let lp = log_beta_pdf(b, 2.0, 2.0);
        if lp == f64::NEG_INFINITY {
            return Some(SplitEval {
                log_ratio: f64::INFINITY, // negated by the merge caller
                to_second: forced.map(<[bool]>::to_vec).unwrap_or_default(),
                w1_new: 0.0,
                w2_new: 0.0,
                gamma1_new: Vec::new(),
                gamma2_new: Vec::new(),
            });
        }
        log_aux += lp;
    }

    let (w1_new, w2_new, gamma1_new, gamma2_new) =
        split_transform(base_phi_d, &base_gammas[split_at], alpha, beta_aux);

    // determinant ratio of the coefficient configurations
    let mut new_set = base_gammas.to_vec();
    new_set[split_at] = gamma1_new.clone();
    new_set.push(gamma2_new.clone());
    let det_term = match (
        log_dpp_density(&new_set, bandwidth),
        log_dpp_density(base_gammas, bandwidth),
    ) {
        (Err(_), _) => f64::NEG_INFINITY, // degenerate split target
        (Ok(_), Err(_)) => f64::INFINITY, // degenerate merge target, negated by caller
        (Ok(n), Ok(b)) => n - b,
    };
    if det_term == f64::NEG_INFINITY && forced.is_none() {
        return None; // forward split into a degenerate configuration
    }

    // site reallocation: weight ∝ new weight × site likelihood
    let inv_2s2 = 0.5 / state.noise_var;
    let sites_per_tooth = SITES_PER_TOOTH as f64;
    let site_logw = |j: usize, gamma_new: &[f64], w_new: f64| -> f64 {
        let mut lw = w_new.ln();
        if likelihood {
            let delta = dot(data.z_row(j), gamma_new) - dot(data.z_row(j), &base_gammas[split_at]);
            let tooth = data.geometry().tooth_of(j);
            for &i in members {
                if data.is_observed(i, j) {
                    let r = data.y(i, j) - view.mu(cache, i, j) - delta;
                    lw -= r * r * inv_2s2;
                }
                lw += missing_logprob(
                    data.is_tooth_missing(i, tooth),
                    state.missing_intercept
                        + state.missing_slope
                            * (view.tooth_mean(cache, i, tooth) + delta / sites_per_tooth),
                );
            }
        }
        lw
    };

    let mut log_p0 = 0.0;
    let mut to_second = Vec::with_capacity(sites.len());
    let mut n2 = 0usize;
    for (pos, &j) in sites.iter().enumerate() {
        let lw1 = site_logw(j, &gamma1_new, w1_new);
        let lw2 = site_logw(j, &gamma2_new, w2_new);
        let lse = log_sum_exp(&[lw1, lw2]);
        let second = match forced {
            Some(assign) => assign[pos],
            None => {
                let rng = rng.as_deref_mut().expect("rng required when drawing");
                let u: f64 = rng.gen();
                u.ln() < lw2 - lse
            }
        };
        log_p0 += if second { lw2 - lse } else { lw1 - lse };
        if second {
            n2 += 1;
        }
        to_second.push(second);
    }
    let n1 = sites.len() - n2;

    // exact likelihood change of the assignment against the base state
    let mut delta_loglik = 0.0;
    if likelihood {
        let site_deltas: Vec<f64> = sites
            .iter()
            .zip(&to_second)
            .map(|(&j, &second)| {
                let g = if second { &gamma2_new } else { &gamma1_new };
                dot(data.z_row(j), g) - dot(data.z_row(j), &base_gammas[split_at])
            })
            .collect();
        let mut tooth_deltas = std::collections::BTreeMap::new();
        for (&j, &delta) in sites.iter().zip(&site_deltas) {
            *tooth_deltas.entry(data.geometry().tooth_of(j)).or_insert(0.0) +=
                delta / sites_per_tooth;
        }
        for &i in members {
            for (&j, &delta) in sites.iter().zip(&site_deltas) {
                if data.is_observed(i, j) {
                    let r = data.y(i, j) - view.mu(cache, i, j);
                    delta_loglik -= (delta * delta - 2.0 * delta * r) * inv_2s2;
                }
            }
            for (&t, &td) in &tooth_deltas {
                let base_tm = view.tooth_mean(cache, i, t);
                let missing = data.is_tooth_missing(i, t);
                delta_loglik += missing_logprob(
                    missing,
                    state.missing_intercept + state.missing_slope * (base_tm + td),
                ) - missing_logprob(
                    missing,
                    state.missing_intercept + state.missing_slope * base_tm,
                );
            }
        }
    }

    // prior on the weights and labels, collapsed to the changed blocks
    let a = hp.site_concentration;
    let log_w_term = (a - 1.0 + n1 as f64) * w1_new.ln() + (a - 1.0 + n2 as f64) * w2_new.ln()
        - (a - 1.0 + (n1 + n2) as f64) * base_phi_d.ln()
        - ln_beta(a, a * d_base as f64);

    let d_max = hp.max_site_clusters;
    let log_move = merge_prob(d_base + 1, d_max).ln() - (1.0 - merge_prob(d_base, d_max)).ln();

    let log_ratio = delta_loglik + det_term + log_w_term
        - 2.0 * ((d_base + 1) as f64).ln()
        + log_move
        - (log_aux + log_p0)
        + split_log_jacobian(base_phi_d, alpha, dim);

    Some(SplitEval {
        log_ratio,
        to_second,
        w1_new,
        w2_new,
        gamma1_new,
        gamma2_new,
    })
}

/// Outcome of one trans-dimensional attempt.
#[derive(Clone, Copy, Debug)]
pub struct RjOutcome {
    pub was_split: bool,
    pub accepted: bool,
    pub log_accept: f64,
}

/// One split-or-merge attempt for the given patient cluster.
pub fn update_site_cluster_count(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    s: usize,
    likelihood: bool,
    rng: &mut ChaCha8Rng,
) -> RjOutcome {
    let d_count = state.n_site_clusters(s);
    if hp.max_site_clusters == 1 {
        return RjOutcome {
            was_split: false,
            accepted: false,
            log_accept: f64::NEG_INFINITY,
        };
    }
    let u: f64 = rng.gen();
    if u < merge_prob(d_count, hp.max_site_clusters) {
        merge_move(state, cache, data, hp, s, likelihood, rng)
    } else {
        split_move(state, cache, data, hp, s, likelihood, rng)
    }
}

fn split_move(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    s: usize,
    likelihood: bool,
    rng: &mut ChaCha8Rng,
) -> RjOutcome {
    let d_count = state.n_site_clusters(s);
    let d = rng.gen_range(0..d_count);
    let alpha = loop {
        let a: f64 = rng.gen();
        if a > 0.0 && a < 1.0 {
            break a;
        }
    };
    let beta22 = Beta::new(2.0, 2.0).expect("fixed parameters");
    let beta_aux: Vec<f64> = (0..data.n_site_covs()).map(|_| beta22.sample(rng)).collect();

    let members = state.cluster_members(s);
    let sites: Vec<usize> = (0..data.n_sites())
        .filter(|&j| state.site_labels[s][j] == d)
        .collect();
    let view = BaseView::identity(data.n_sites(), data.n_teeth());

    let eval = eval_split(
        state,
        cache,
        data,
        hp,
        &view,
        &members,
        &state.site_coefs[s],
        state.site_weights[s][d],
        d,
        &sites,
        state.site_bandwidths[s],
        alpha,
        &beta_aux,
        likelihood,
        None,
        Some(rng),
    );
    let Some(eval) = eval else {
        return RjOutcome {
            was_split: true,
            accepted: false,
            log_accept: f64::NEG_INFINITY,
        };
    };

    let accepted = eval.log_ratio >= 0.0 || rng.gen::<f64>().ln() < eval.log_ratio;
    if accepted {
        apply_split(state, cache, data, s, d, &sites, &members, &eval);
    }
    RjOutcome {
        was_split: true,
        accepted,
        log_accept: eval.log_ratio,
    }
}

fn apply_split(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    s: usize,
    d: usize,
    sites: &[usize],
    members: &[usize],
    eval: &SplitEval,
) {
    let old_gamma = state.site_coefs[s][d].clone();
    let new_index = state.n_site_clusters(s);
    state.site_weights[s][d] = eval.w1_new;
    state.site_weights[s].push(eval.w2_new);
    state.site_coefs[s][d] = eval.gamma1_new.clone();
    state.site_coefs[s].push(eval.gamma2_new.clone());
    let mut site_shifts = Vec::with_capacity(sites.len());
    let mut tooth_acc = std::collections::BTreeMap::new();
    for (pos, &j) in sites.iter().enumerate() {
        let g = if eval.to_second[pos] {
            state.site_labels[s][j] = new_index;
            &eval.gamma2_new
        } else {
            &eval.gamma1_new
        };
        let delta = dot(data.z_row(j), g) - dot(data.z_row(j), &old_gamma);
        site_shifts.push((j, delta));
        *tooth_acc.entry(data.geometry().tooth_of(j)).or_insert(0.0) +=
            delta / SITES_PER_TOOTH as f64;
    }
    let tooth_shifts: Vec<(usize, f64)> = tooth_acc.into_iter().collect();
    for &i in members {
        cache.shift_sites(i, &site_shifts, &tooth_shifts, state, data);
    }
}

/// Split cluster d with the given auxiliaries, draw the site reallocation,
/// and apply the move unconditionally. Returns the split's log acceptance;
/// None if the proposal lands on a degenerate configuration. Reversibility
/// harness for the matching [`merge_log_acceptance`].
#[allow(clippy::too_many_arguments)]
pub fn force_split(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    s: usize,
    d: usize,
    alpha: f64,
    beta_aux: &[f64],
    likelihood: bool,
    rng: &mut ChaCha8Rng,
) -> Option<f64> {
    let members = state.cluster_members(s);
    let sites: Vec<usize> = (0..data.n_sites())
        .filter(|&j| state.site_labels[s][j] == d)
        .collect();
    let view = BaseView::identity(data.n_sites(), data.n_teeth());
    let eval = eval_split(
        state,
        cache,
        data,
        hp,
        &view,
        &members,
        &state.site_coefs[s],
        state.site_weights[s][d],
        d,
        &sites,
        state.site_bandwidths[s],
        alpha,
        beta_aux,
        likelihood,
        None,
        Some(rng),
    )?;
    apply_split(state, cache, data, s, d, &sites, &members, &eval);
    Some(eval.log_ratio)
}

/// Log acceptance of merging the ordered pair (d1, d2), computed as the
/// negated log acceptance of the reverse split from the merged state with
/// the auxiliaries reconstructed by inverting the moment match.
pub fn merge_log_acceptance(
    state: &BiclusterState,
    cache: &MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    s: usize,
    d1: usize,
    d2: usize,
    likelihood: bool,
) -> f64 {
    let merged = MergePlan::build(state, data, s, d1, d2);
    let members = state.cluster_members(s);
    let eval = eval_split(
        state,
        cache,
        data,
        hp,
        &merged.view,
        &members,
        &merged.base_gammas,
        merged.w_merged,
        merged.split_at,
        &merged.sites,
        state.site_bandwidths[s],
        merged.alpha,
        &merged.beta_aux,
        likelihood,
        Some(&merged.forced),
        None,
    )
    .expect("forced evaluation always yields terms");
    -eval.log_ratio
}

/// Deterministic pieces of a merge of (d1, d2): the moment-matched merged
/// cluster, the reconstructed split auxiliaries, and the base view offsets.
struct MergePlan {
    w_merged: f64,
    gamma_merged: Vec<f64>,
    alpha: f64,
    beta_aux: Vec<f64>,
    base_gammas: Vec<Vec<f64>>,
    split_at: usize,
    sites: Vec<usize>,
    forced: Vec<bool>,
    view: BaseView,
}

impl MergePlan {
    fn build(state: &BiclusterState, data: &Dataset, s: usize, d1: usize, d2: usize) -> Self {
        assert_ne!(d1, d2);
        let w1 = state.site_weights[s][d1];
        let w2 = state.site_weights[s][d2];
        let g1 = &state.site_coefs[s][d1];
        let g2 = &state.site_coefs[s][d2];
        let w_merged = w1 + w2;
        let gamma_merged: Vec<f64> = g1
            .iter()
            .zip(g2)
            .map(|(&a, &b)| (w1 * a + w2 * b) / w_merged)
            .collect();
        let alpha = w1 / w_merged;
        let scale = (alpha * (1.0 - alpha)).sqrt();
        let beta_aux: Vec<f64> = g1.iter().zip(g2).map(|(&a, &b)| (b - a) * scale).collect();

        let mut base_gammas = state.site_coefs[s].clone();
        base_gammas[d1] = gamma_merged.clone();
        base_gammas.remove(d2);
        let split_at = if d2 < d1 { d1 - 1 } else { d1 };

        let mut sites = Vec::new();
        let mut forced = Vec::new();
        let mut view = BaseView::identity(data.n_sites(), data.n_teeth());
        for j in 0..data.n_sites() {
            let lab = state.site_labels[s][j];
            if lab == d1 || lab == d2 {
                let delta = dot(data.z_row(j), &gamma_merged)
                    - dot(data.z_row(j), &state.site_coefs[s][lab]);
                view.site_delta[j] = delta;
                view.tooth_delta[data.geometry().tooth_of(j)] += delta / SITES_PER_TOOTH as f64;
                sites.push(j);
                forced.push(lab == d2);
            }
        }
        MergePlan {
            w_merged,
            gamma_merged,
            alpha,
            beta_aux,
            base_gammas,
            split_at,
            sites,
            forced,
            view,
        }
    }
}

fn merge_move(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    hp: &Hyperparameters,
    s: usize,
    likelihood: bool,
    rng: &mut ChaCha8Rng,
) -> RjOutcome {
    let d_count = state.n_site_clusters(s);
    debug_assert!(d_count >= 2);
    let d1 = rng.gen_range(0..d_count);
    let mut d2 = rng.gen_range(0..d_count - 1);
    if d2 >= d1 {
        d2 += 1;
    }
    let log_accept = merge_log_acceptance(state, cache, data, hp, s, d1, d2, likelihood);
    let accepted = log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept;
    if accepted {
        apply_merge(state, cache, data, s, d1, d2);
    }
    RjOutcome {
        was_split: false,
        accepted,
        log_accept,
    }
}

/// Collapse (d1, d2) into one cluster at d1's slot and remove d2,
/// relabeling and patching the cache.
pub fn apply_merge(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    s: usize,
    d1: usize,
    d2: usize,
) {
    let plan = MergePlan::build(state, data, s, d1, d2);
    let members = state.cluster_members(s);

    let mut site_shifts = Vec::with_capacity(plan.sites.len());
    let mut tooth_acc = std::collections::BTreeMap::new();
    for &j in &plan.sites {
        let delta = plan.view.site_delta[j];
        site_shifts.push((j, delta));
        *tooth_acc.entry(data.geometry().tooth_of(j)).or_insert(0.0) +=
            delta / SITES_PER_TOOTH as f64;
    }
    let tooth_shifts: Vec<(usize, f64)> = tooth_acc.into_iter().collect();

    state.site_weights[s][d1] = plan.w_merged;
    state.site_weights[s].remove(d2);
    state.site_coefs[s][d1] = plan.gamma_merged;
    state.site_coefs[s].remove(d2);
    for lab in state.site_labels[s].iter_mut() {
        if *lab == d2 {
            *lab = d1;
        }
        if *lab > d2 {
            *lab -= 1;
        }
    }
    for &i in &members {
        cache.shift_sites(i, &site_shifts, &tooth_shifts, state, data);
    }
}
