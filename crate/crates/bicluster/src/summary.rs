//! Posterior summaries: the information criterion, co-clustering matrices
//! and least-squares partition point estimates, label-switching repair,
//! credible intervals, and posterior predictive category probabilities.

use serde::{Deserialize, Serialize};

use crate::car::CarStructure;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::CAL_BIN_EDGES;
use crate::mat::{dot, Mat};
use crate::math::{log_mean_exp, normal_cdf, quantile, sample_variance};
use crate::trace::PosteriorTrace;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WaicResult {
    pub waic: f64,
    pub lppd: f64,
    pub p_eff: f64,
}

/// Watanabe-Akaike criterion from the stored per-patient log predictive
/// densities: -2·Σᵢ[log mean_b p(yᵢ|θ_b) - Var_b(log p(yᵢ|θ_b))], the
/// variance with divisor B-1.
pub fn waic(trace: &PosteriorTrace) -> Result<WaicResult> {
    let b = trace.len();
    if b < 2 {
        return Err(Error::validation(format!(
            "information criterion needs at least 2 kept iterations, got {b}"
        )));
    }
    let n = trace.snapshots[0].log_pred.len();
    let mut lppd = 0.0;
    let mut p_eff = 0.0;
    let mut column = vec![0.0; b];
    for i in 0..n {
        for (bi, snap) in trace.snapshots.iter().enumerate() {
            column[bi] = snap.log_pred[i];
        }
        lppd += log_mean_exp(&column);
        p_eff += sample_variance(&column);
    }
    Ok(WaicResult {
        waic: -2.0 * (lppd - p_eff),
        lppd,
        p_eff,
    })
}

/// Pairwise co-clustering probability matrix: H[a][b] = fraction of
/// iterations in which items a and b share a label.
pub fn co_clustering(labels: &[&[usize]]) -> Mat {
    let b = labels.len();
    assert!(b > 0);
    let n = labels[0].len();
    let mut h = Mat::zeros(n, n);
    for row in labels {
        for a in 0..n {
            for c in 0..a {
                if row[a] == row[c] {
                    h[(a, c)] += 1.0;
                }
            }
        }
    }
    let inv_b = 1.0 / b as f64;
    for a in 0..n {
        for c in 0..a {
            let v = h[(a, c)] * inv_b;
            h[(a, c)] = v;
            h[(c, a)] = v;
        }
        h[(a, a)] = 1.0;
    }
    h
}

/// Least-squares partition summary: among the sampled labelings, the one
/// whose co-clustering indicator matrix is Frobenius-closest to H. Ties go
/// to the earliest iteration. Returns (iteration index, labels).
pub fn ls_partition(labels: &[&[usize]]) -> (usize, Vec<usize>) {
    let h = co_clustering(labels);
    let mut best = (0usize, f64::INFINITY);
    for (bi, row) in labels.iter().enumerate() {
        let dist = ls_distance(row, &h);
        if dist < best.1 {
            best = (bi, dist);
        }
    }
    (best.0, labels[best.0].to_vec())
}

/// Frobenius distance (over the strict upper triangle; the diagonal always
/// matches and the matrices are symmetric) between a labeling's indicator
/// matrix and H.
pub fn ls_distance(labels: &[usize], h: &Mat) -> f64 {
    let n = labels.len();
    let mut dist = 0.0;
    for a in 0..n {
        for c in 0..a {
            let v = (labels[a] == labels[c]) as u8 as f64;
            let d = v - h[(a, c)];
            dist += d * d;
        }
    }
    dist
}

/// Minimum-cost perfect assignment on a square cost matrix (shortest
/// augmenting path with potentials). Returns the column chosen for each
/// row.
pub fn min_cost_assignment(cost: &Mat) -> Vec<usize> {
    let n = cost.rows();
    assert_eq!(n, cost.cols());
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Label permutation minimizing element mismatches against a reference:
/// perm[k] is the new name of label k. Solved as an assignment on the
/// negated label-overlap counts, which equals the brute-force minimum over
/// all permutations.
pub fn best_relabel_permutation(labels: &[usize], reference: &[usize], n_labels: usize) -> Vec<usize> {
    assert_eq!(labels.len(), reference.len());
    let mut overlap = Mat::zeros(n_labels, n_labels);
    for (&l, &r) in labels.iter().zip(reference) {
        overlap[(l, r)] += 1.0;
    }
    let mut cost = Mat::zeros(n_labels, n_labels);
    for k in 0..n_labels {
        for l in 0..n_labels {
            cost[(k, l)] = -overlap[(k, l)];
        }
    }
    min_cost_assignment(&cost)
}

fn apply_permutation<T: Clone>(items: &[T], perm: &[usize]) -> Vec<T> {
    let mut out = items.to_vec();
    for (k, &target) in perm.iter().enumerate() {
        out[target] = items[k].clone();
    }
    out
}

/// Relabel every iteration's patient-cluster labels (and everything indexed
/// by them) to best match the reference labeling.
pub fn relabel_trace(trace: &mut PosteriorTrace, reference: &[usize]) {
    let s_count = trace.meta.n_row_clusters;
    for snap in &mut trace.snapshots {
        let perm = best_relabel_permutation(&snap.row_labels, reference, s_count);
        if perm.iter().enumerate().all(|(k, &t)| k == t) {
            continue;
        }
        for lab in &mut snap.row_labels {
            *lab = perm[*lab];
        }
        snap.row_weights = apply_permutation(&snap.row_weights, &perm);
        snap.row_coefs = apply_permutation(&snap.row_coefs, &perm);
        snap.site_labels = apply_permutation(&snap.site_labels, &perm);
        snap.site_weights = apply_permutation(&snap.site_weights, &perm);
        snap.site_coefs = apply_permutation(&snap.site_coefs, &perm);
        snap.site_bandwidths = apply_permutation(&snap.site_bandwidths, &perm);
    }
}

/// Within each patient cluster, relabel the site clusters of iterations
/// whose cluster count matches the reference's, to best match the reference
/// site labels.
pub fn relabel_site_level(trace: &mut PosteriorTrace, site_refs: &[Vec<usize>]) {
    for snap in &mut trace.snapshots {
        for (s, site_ref) in site_refs.iter().enumerate() {
            let d_ref = site_ref.iter().max().map_or(1, |&m| m + 1);
            if snap.n_site_clusters(s) != d_ref {
                continue;
            }
            let perm = best_relabel_permutation(&snap.site_labels[s], site_ref, d_ref);
            if perm.iter().enumerate().all(|(k, &t)| k == t) {
                continue;
            }
            for lab in &mut snap.site_labels[s] {
                *lab = perm[*lab];
            }
            snap.site_weights[s] = apply_permutation(&snap.site_weights[s], &perm);
            snap.site_coefs[s] = apply_permutation(&snap.site_coefs[s], &perm);
        }
    }
}

/// Iterations whose patient labeling equals the reference exactly (run
/// after [`relabel_trace`], so pure label permutations have been repaired).
pub fn conditional_indices(trace: &PosteriorTrace, row_ref: &[usize]) -> Vec<usize> {
    trace
        .snapshots
        .iter()
        .enumerate()
        .filter(|(_, s)| s.row_labels == row_ref)
        .map(|(b, _)| b)
        .collect()
}

/// Site-level least-squares partitions per patient cluster, computed over
/// the iterations whose patient labeling matches the reference.
pub fn ls_site_partitions(
    trace: &PosteriorTrace,
    row_ref: &[usize],
) -> Result<Vec<Vec<usize>>> {
    let idx = conditional_indices(trace, row_ref);
    if idx.is_empty() {
        return Err(Error::validation(
            "no kept iteration matches the reference patient labeling; \
             relabel the trace against it first"
                .to_string(),
        ));
    }
    let s_count = trace.meta.n_row_clusters;
    let mut out = Vec::with_capacity(s_count);
    for s in 0..s_count {
        let rows: Vec<&[usize]> = idx
            .iter()
            .map(|&b| trace.snapshots[b].site_labels[s].as_slice())
            .collect();
        out.push(ls_partition(&rows).1);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Posterior means and equal-tailed credible intervals for the coefficients
/// and scalar parameters, over the given iterations (which must share one
/// site-cluster structure for the site coefficients to be comparable).
pub fn credible_intervals(
    trace: &PosteriorTrace,
    indices: &[usize],
    level: f64,
) -> Result<Vec<ParamSummary>> {
    if indices.is_empty() {
        return Err(Error::validation("no iterations selected"));
    }
    let lo_q = (1.0 - level) / 2.0;
    let hi_q = 1.0 - lo_q;
    let first = &trace.snapshots[indices[0]];
    let s_count = first.row_coefs.len();
    let mut out = Vec::new();
    let mut push = |name: String, mut vals: Vec<f64>| {
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(ParamSummary {
            name,
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
            lower: quantile(&vals, lo_q),
            upper: quantile(&vals, hi_q),
        });
    };
    let snaps = |b: &usize| &trace.snapshots[*b];
    for s in 0..s_count {
        for k in 0..first.row_coefs[s].len() {
            push(
                format!("row_coef[{}][{}]", s + 1, k + 1),
                indices.iter().map(|b| snaps(b).row_coefs[s][k]).collect(),
            );
        }
    }
    for s in 0..s_count {
        let d_count = first.site_coefs[s].len();
        if indices
            .iter()
            .any(|b| snaps(b).site_coefs[s].len() != d_count)
        {
            return Err(Error::validation(format!(
                "site-cluster count varies across the selected iterations for cluster {}",
                s + 1
            )));
        }
        for d in 0..d_count {
            for k in 0..first.site_coefs[s][d].len() {
                push(
                    format!("site_coef[{}][{}][{}]", s + 1, d + 1, k + 1),
                    indices
                        .iter()
                        .map(|b| snaps(b).site_coefs[s][d][k])
                        .collect(),
                );
            }
        }
    }
    for (name, get) in [
        ("noise_var", &(|s: &crate::trace::Snapshot| s.noise_var) as &dyn Fn(_) -> f64),
        ("spatial_var", &|s: &crate::trace::Snapshot| s.spatial_var),
        ("spatial_corr", &|s: &crate::trace::Snapshot| s.spatial_corr),
        ("missing_intercept", &|s: &crate::trace::Snapshot| s.missing_intercept),
        ("missing_slope", &|s: &crate::trace::Snapshot| s.missing_slope),
    ] {
        push(
            name.to_string(),
            indices.iter().map(|b| get(snaps(b))).collect(),
        );
    }
    Ok(out)
}

/// Posterior predictive probabilities of the five response categories
/// (none/slight/moderate/severe/missing) for a new patient with covariates
/// `x_new` at the given site.
///
/// Per draw: patient cluster marginalized over the sampled weights, site
/// cluster over the sampled site weights; the response picks up the noise
/// variance plus the spatial marginal variance of a fresh spatial row; the
/// missing probability integrates the spatial tooth average out of the
/// probit. The four response bins split the non-missing mass with the
/// lowest bin absorbing the negative tail.
pub fn predictive_category_probs(
    trace: &PosteriorTrace,
    indices: &[usize],
    data: &Dataset,
    car: &CarStructure,
    x_new: &[f64],
    site: usize,
) -> Result<[f64; 5]> {
    if site >= data.n_sites() {
        return Err(Error::validation(format!(
            "site index {} out of range for {} sites",
            site + 1,
            data.n_sites()
        )));
    }
    if x_new.len() != data.n_patient_covs() {
        return Err(Error::dim(format!(
            "covariate vector length {} != {}",
            x_new.len(),
            data.n_patient_covs()
        )));
    }
    if indices.is_empty() {
        return Err(Error::validation("no iterations selected"));
    }
    let tooth = data.geometry().tooth_of(site);
    let tooth_sites: Vec<usize> = data.geometry().sites_of_tooth(tooth).collect();
    let mut acc = [0.0f64; 5];
    for &b in indices {
        let snap = &trace.snapshots[b];
        let site_var = snap.spatial_var * car.marginal_inverse_diag(snap.spatial_corr, site);
        let tooth_var = snap.spatial_var * car.average_inverse_quad(snap.spatial_corr, &tooth_sites);
        let resp_sd = (snap.noise_var + site_var).sqrt();
        let probit_scale = (1.0 + snap.missing_slope * snap.missing_slope * tooth_var).sqrt();
        for (s, &w_s) in snap.row_weights.iter().enumerate() {
            let xb = dot(x_new, &snap.row_coefs[s]);
            // expected tooth mean with site memberships marginalized
            let mut tooth_mean = 0.0;
            for &tj in &tooth_sites {
                let mut zg = 0.0;
                for (d, &phi) in snap.site_weights[s].iter().enumerate() {
                    zg += phi * dot(data.z_row(tj), &snap.site_coefs[s][d]);
                }
                tooth_mean += xb + zg;
            }
            tooth_mean /= tooth_sites.len() as f64;
            let mu_star = snap.missing_intercept + snap.missing_slope * tooth_mean;
            let p_miss = normal_cdf(mu_star / probit_scale);
            acc[4] += w_s * p_miss;
            for (d, &phi) in snap.site_weights[s].iter().enumerate() {
                let mu = xb + dot(data.z_row(site), &snap.site_coefs[s][d]);
                let weight = w_s * (1.0 - p_miss) * phi;
                let c1 = normal_cdf((CAL_BIN_EDGES[0] - mu) / resp_sd);
                let c3 = normal_cdf((CAL_BIN_EDGES[1] - mu) / resp_sd);
                let c5 = normal_cdf((CAL_BIN_EDGES[2] - mu) / resp_sd);
                acc[0] += weight * c1;
                acc[1] += weight * (c3 - c1);
                acc[2] += weight * (c5 - c3);
                acc[3] += weight * (1.0 - c5);
            }
        }
    }
    for v in &mut acc {
        *v /= indices.len() as f64;
    }
    Ok(acc)
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |&m| m + 1);
    let kb = b.iter().max().map_or(0, |&m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let comb2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut sum_cells = 0.0;
    let mut row_sums = vec![0u64; ka];
    let mut col_sums = vec![0u64; kb];
    for (x, row) in table.iter().enumerate() {
        for (y, &c) in row.iter().enumerate() {
            sum_cells += comb2(c);
            row_sums[x] += c;
            col_sums[y] += c;
        }
    }
    let sum_rows: f64 = row_sums.iter().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = col_sums.iter().map(|&c| comb2(c)).sum();
    let total = comb2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-300 {
        1.0
    } else {
        (sum_cells - expected) / (max_index - expected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{AcceptanceReport, PosteriorTrace, PriorMode, RunMeta, Snapshot};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_trace(label_rows: Vec<Vec<usize>>, log_pred: Vec<Vec<f64>>) -> PosteriorTrace {
        let s_count = label_rows
            .iter()
            .flat_map(|r| r.iter())
            .max()
            .map_or(1, |&m| m + 1);
        let snapshots = label_rows
            .into_iter()
            .zip(log_pred)
            .enumerate()
            .map(|(it, (labels, lp))| Snapshot {
                iteration: it,
                row_labels: labels,
                row_weights: vec![1.0 / s_count as f64; s_count],
                site_labels: vec![vec![0; 1]; s_count],
                site_weights: vec![vec![1.0]; s_count],
                row_coefs: vec![vec![0.0]; s_count],
                site_coefs: vec![vec![vec![0.0]]; s_count],
                row_bandwidth: 1.0,
                site_bandwidths: vec![1.0; s_count],
                spatial: None,
                spatial_var: 1.0,
                spatial_corr: 0.96,
                noise_var: 1.0,
                missing_intercept: 0.0,
                missing_slope: 0.0,
                probit_latent: None,
                log_pred: lp,
                accept: AcceptanceReport::default(),
            })
            .collect();
        PosteriorTrace {
            meta: RunMeta {
                n_row_clusters: s_count,
                seed: 0,
                mode: PriorMode::Repulsive,
                n_burn: 0,
                n_keep: 0,
                runtime_secs: 0.0,
                accept: AcceptanceReport::default(),
            },
            snapshots,
        }
    }

    #[test]
    fn waic_identical_densities_has_zero_penalty() {
        let t = toy_trace(
            vec![vec![0, 0], vec![0, 0]],
            vec![vec![-1.0, -2.0], vec![-1.0, -2.0]],
        );
        let w = waic(&t).unwrap();
        assert_relative_eq!(w.p_eff, 0.0, epsilon = 1e-12);
        assert_relative_eq!(w.waic, -2.0 * (-3.0), epsilon = 1e-12);
    }

    #[test]
    fn waic_hand_example() {
        // one patient, log densities {-1, -3}: lppd = log((e^-1 + e^-3)/2),
        // sample variance 2, WAIC = -2(lppd - 2)
        let t = toy_trace(vec![vec![0], vec![0]], vec![vec![-1.0], vec![-3.0]]);
        let w = waic(&t).unwrap();
        assert_relative_eq!(w.lppd, -1.566219169516972813, epsilon = 1e-12);
        assert_relative_eq!(w.p_eff, 2.0, epsilon = 1e-12);
        assert_relative_eq!(w.waic, -2.0 * (w.lppd - 2.0), epsilon = 1e-12);
    }

    #[test]
    fn waic_requires_two_iterations() {
        let t = toy_trace(vec![vec![0]], vec![vec![-1.0]]);
        assert!(waic(&t).is_err());
    }

    #[test]
    fn waic_matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = 40;
        let n = 7;
        let lp: Vec<Vec<f64>> = (0..b)
            .map(|_| (0..n).map(|_| rng.gen_range(-8.0..-0.5)).collect())
            .collect();
        let t = toy_trace(vec![vec![0; n]; b], lp.clone());
        let w = waic(&t).unwrap();
        // naive reference
        let mut want = 0.0;
        for i in 0..n {
            let col: Vec<f64> = (0..b).map(|bi| lp[bi][i]).collect();
            let m = col.iter().map(|v| v.exp()).sum::<f64>() / b as f64;
            let mean = col.iter().sum::<f64>() / b as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b as f64 - 1.0);
            want += -2.0 * (m.ln() - var);
        }
        assert_relative_eq!(w.waic, want, epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn ls_partition_identical_iterations() {
        let rows = vec![vec![0, 1, 1, 0]; 5];
        let refs: Vec<&[usize]> = rows.iter().map(|r| r.as_slice()).collect();
        let (idx, labels) = ls_partition(&refs);
        assert_eq!(idx, 0);
        assert_eq!(labels, vec![0, 1, 1, 0]);
    }

    #[test]
    fn ls_partition_tie_takes_earliest() {
        // two partitions equally frequent; distances tie; earliest wins
        let rows = vec![vec![0, 0, 1], vec![0, 1, 1], vec![0, 0, 1], vec![0, 1, 1]];
        let refs: Vec<&[usize]> = rows.iter().map(|r| r.as_slice()).collect();
        let (idx, _) = ls_partition(&refs);
        assert_eq!(idx, 0);
    }

    #[test]
    fn ls_partition_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let rows: Vec<Vec<usize>> = (0..12)
                .map(|_| (0..5).map(|_| rng.gen_range(0..3usize)).collect())
                .collect();
            let refs: Vec<&[usize]> = rows.iter().map(|r| r.as_slice()).collect();
            let h = co_clustering(&refs);
            let (idx, _) = ls_partition(&refs);
            let best_direct = refs
                .iter()
                .enumerate()
                .min_by(|(ai, a), (bi, b)| {
                    (ls_distance(a, &h), ai)
                        .partial_cmp(&(ls_distance(b, &h), bi))
                        .unwrap()
                })
                .unwrap()
                .0;
            assert_eq!(idx, best_direct);
        }
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 2..=5usize {
            for _ in 0..60 {
                let cost = Mat::from_rows(
                    (0..n)
                        .map(|_| (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect())
                        .collect(),
                );
                let got = min_cost_assignment(&cost);
                let got_cost: f64 = got.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
                let best = permutations(n)
                    .into_iter()
                    .map(|p| p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                assert_relative_eq!(got_cost, best, epsilon = 1e-9);
            }
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 1 {
            return vec![vec![0]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q: Vec<usize> = p.iter().map(|&x| x + 1).collect();
                q.insert(pos, 0);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn relabel_pure_swap_has_zero_distance() {
        let reference = vec![0, 0, 1, 1];
        let labels = vec![1, 1, 0, 0];
        let perm = best_relabel_permutation(&labels, &reference, 2);
        let relabeled: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
        assert_eq!(relabeled, reference);
    }

    #[test]
    fn relabel_matches_brute_force_over_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for s in 2..=4usize {
            for _ in 0..40 {
                let n = 9;
                let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..s)).collect();
                let reference: Vec<usize> = (0..n).map(|_| rng.gen_range(0..s)).collect();
                let perm = best_relabel_permutation(&labels, &reference, s);
                let dist = |p: &[usize]| {
                    labels
                        .iter()
                        .zip(&reference)
                        .filter(|(&l, &r)| p[l] != r)
                        .count()
                };
                let best = permutations(s).into_iter().map(|p| dist(&p)).min().unwrap();
                assert_eq!(dist(&perm), best);
            }
        }
    }

    #[test]
    fn ari_perfect_and_independent() {
        assert_relative_eq!(
            adjusted_rand_index(&[0, 0, 1, 1, 2], &[2, 2, 0, 0, 1]),
            1.0,
            epsilon = 1e-12
        );
        // one misplaced item lowers it below 1
        let a = adjusted_rand_index(&[0, 0, 1, 1, 1, 0], &[0, 0, 1, 1, 1, 1]);
        assert!(a < 1.0 && a > 0.0);
    }
}
