//! Conditional autoregressive spatial machinery.
//!
//! The precision of one spatial row is (B - ρW)/σ², with B the diagonal of
//! neighbor counts and W the site adjacency. B and W never change within a
//! run while ρ changes every sweep, so the generalized eigenvalues of
//! B^{-1/2} W B^{-1/2} are computed once; log det(B - ρW) is then an O(J)
//! sum for any ρ.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{AdjacencyGraph, Dataset};
use crate::error::{Error, Result};
use crate::likelihood::missing_logprob;
use crate::mat::Mat;
use crate::math::{log_normal_pdf, sample_inverse_gamma, LOG_2PI};
use crate::rng::{SeedSource, StreamKind};
use crate::state::{BiclusterState, Hyperparameters, MeanCache};

#[derive(Clone, Debug)]
pub struct CarStructure {
    neighbors: Vec<Vec<usize>>,
    degrees: Vec<f64>,
    /// Eigenvalues of B^{-1/2} W B^{-1/2}, ascending.
    eigenvalues: Vec<f64>,
    /// Row j holds site j's loadings across eigenvectors.
    eigenvectors: Mat,
    logdet_b: f64,
}

/// Eigendecompose the neighbor structure once per graph.
pub fn precompute_car(adjacency: &AdjacencyGraph) -> Result<CarStructure> {
    let n = adjacency.n_sites();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|j| adjacency.neighbors(j).to_vec()).collect();
    let degrees: Vec<f64> = (0..n).map(|j| adjacency.degree(j) as f64).collect();
    CarStructure::from_parts(neighbors, degrees)
}

impl CarStructure {
    /// Build from explicit neighbor lists and diagonal weights. The sampler
    /// always goes through [`precompute_car`]; this entry point allows
    /// degenerate or custom structures (e.g. a single free site with unit
    /// diagonal) in tests and extensions.
    pub fn from_parts(neighbors: Vec<Vec<usize>>, degrees: Vec<f64>) -> Result<Self> {
        let n = neighbors.len();
        if degrees.len() != n {
            return Err(Error::dim("degree vector length != site count"));
        }
        if let Some(j) = degrees.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::validation(format!(
                "site {} has no neighbors; the spatial precision would be singular",
                j + 1
            )));
        }
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (j, nb) in neighbors.iter().enumerate() {
            for &k in nb {
                m[(j, k)] = 1.0 / (degrees[j] * degrees[k]).sqrt();
            }
        }
        let eig = SymmetricEigen::new(m);
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let mut eigenvectors = Mat::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                eigenvectors[(j, k)] = eig.eigenvectors[(j, k)];
            }
        }
        let logdet_b = degrees.iter().map(|d| d.ln()).sum();
        Ok(CarStructure {
            neighbors,
            degrees,
            eigenvalues,
            eigenvectors,
            logdet_b,
        })
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.degrees.len()
    }

    #[inline]
    pub fn degree(&self, j: usize) -> f64 {
        self.degrees[j]
    }

    #[inline]
    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// log det(B - ρW) via the cached spectrum; -inf when ρ leaves the
    /// valid range and the matrix stops being positive definite.
    pub fn logdet_g(&self, rho: f64) -> f64 {
        let mut s = self.logdet_b;
        for &lam in &self.eigenvalues {
            let t = 1.0 - rho * lam;
            if t <= 0.0 {
                return f64::NEG_INFINITY;
            }
            s += t.ln();
        }
        s
    }

    /// νᵀ B ν.
    pub fn quad_b(&self, nu: &[f64]) -> f64 {
        nu.iter()
            .zip(&self.degrees)
            .map(|(&v, &d)| d * v * v)
            .sum()
    }

    /// νᵀ W ν.
    pub fn quad_w(&self, nu: &[f64]) -> f64 {
        self.neighbors
            .iter()
            .enumerate()
            .map(|(j, nb)| nu[j] * nb.iter().map(|&k| nu[k]).sum::<f64>())
            .sum()
    }

    /// νᵀ (B - ρW) ν.
    pub fn quad_form(&self, nu: &[f64], rho: f64) -> f64 {
        self.quad_b(nu) - rho * self.quad_w(nu)
    }

    /// Marginal variance multiplier [(B - ρW)^{-1}]_jj.
    pub fn marginal_inverse_diag(&self, rho: f64, j: usize) -> f64 {
        let u = self.eigenvectors.row(j);
        let s: f64 = u
            .iter()
            .zip(&self.eigenvalues)
            .map(|(&ujk, &lam)| ujk * ujk / (1.0 - rho * lam))
            .sum();
        s / self.degrees[j]
    }

    /// aᵀ (B - ρW)^{-1} a for the averaging vector a with weight 1/len on
    /// each listed site; used for the spatial variance of a tooth mean.
    pub fn average_inverse_quad(&self, rho: f64, sites: &[usize]) -> f64 {
        let scale = 1.0 / sites.len() as f64;
        let mut total = 0.0;
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let mut proj = 0.0;
            for &j in sites {
                proj += self.eigenvectors[(j, k)] / self.degrees[j].sqrt();
            }
            total += proj * proj / (1.0 - rho * lam);
        }
        total * scale * scale
    }

    /// Draw one spatial row from MVN(0, σ² (B - ρW)^{-1}).
    pub fn sample_spatial_row<R: Rng + ?Sized>(
        &self,
        sigma2_sp: f64,
        rho: f64,
        rng: &mut R,
    ) -> Vec<f64> {
        let n = self.n_sites();
        let sd = sigma2_sp.sqrt();
        let scaled: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|&lam| {
                let xi: f64 = rng.sample(StandardNormal);
                sd * xi / (1.0 - rho * lam).sqrt()
            })
            .collect();
        (0..n)
            .map(|j| {
                let row = self.eigenvectors.row(j);
                crate::mat::dot(row, &scaled) / self.degrees[j].sqrt()
            })
            .collect()
    }
}

/// Log-density of one spatial row under MVN(0, σ² (B - ρW)^{-1}).
pub fn car_logpdf(nu: &[f64], sigma2_sp: f64, rho: f64, car: &CarStructure) -> f64 {
    let j = car.n_sites() as f64;
    -0.5 * (j * (LOG_2PI + sigma2_sp.ln()) - car.logdet_g(rho)
        + car.quad_form(nu, rho) / sigma2_sp)
}

/// Conjugate inverse-gamma draw for the spatial scale.
pub fn gibbs_spatial_var<R: Rng + ?Sized>(
    state: &mut BiclusterState,
    car: &CarStructure,
    hp: &Hyperparameters,
    rng: &mut R,
) -> f64 {
    let n = state.spatial.rows();
    let j = car.n_sites();
    let mut quad = 0.0;
    for i in 0..n {
        quad += car.quad_form(state.spatial.row(i), state.spatial_corr);
    }
    let shape = hp.spatial_shape + (n * j) as f64 / 2.0;
    let scale = hp.spatial_scale + quad / 2.0;
    state.spatial_var = sample_inverse_gamma(shape, scale, rng);
    state.spatial_var
}

/// Random-walk Metropolis step for the spatial correlation, proposing
/// uniformly on the clipped window around the current value. The asymmetric
/// window correction keeps the move valid near the support boundary.
pub fn mh_update_corr<R: Rng + ?Sized>(
    state: &mut BiclusterState,
    car: &CarStructure,
    hp: &Hyperparameters,
    rng: &mut R,
) -> bool {
    let rho = state.spatial_corr;
    let window = |r: f64| {
        (
            (r - hp.step_corr).max(hp.corr_lower),
            (r + hp.step_corr).min(hp.corr_upper),
        )
    };
    let (lo, hi) = window(rho);
    let proposal = rng.gen_range(lo..hi);
    let (plo, phi) = window(proposal);

    let n = state.spatial.rows() as f64;
    let mut quad_w = 0.0;
    for i in 0..state.spatial.rows() {
        quad_w += car.quad_w(state.spatial.row(i));
    }
    let log_accept = 0.5 * n * (car.logdet_g(proposal) - car.logdet_g(rho))
        + (proposal - rho) * quad_w / (2.0 * state.spatial_var)
        + (hi - lo).ln()
        - (phi - plo).ln();

    if log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept {
        state.spatial_corr = proposal;
        true
    } else {
        false
    }
}

/// Prior log-density change when entry j of a spatial row moves by delta:
/// -(1/2σ²)·[B_j(ν'² - ν²) - 2ρ·Δ·Σ_{k~j} ν_k].
#[inline]
fn spatial_prior_delta(
    nu_row: &[f64],
    j: usize,
    delta: f64,
    car: &CarStructure,
    sigma2_sp: f64,
    rho: f64,
) -> f64 {
    let old = nu_row[j];
    let new = old + delta;
    let neighbor_sum: f64 = car.neighbors(j).iter().map(|&k| nu_row[k]).sum();
    -(car.degree(j) * (new * new - old * old) - 2.0 * rho * delta * neighbor_sum)
        / (2.0 * sigma2_sp)
}

/// Entrywise random-walk update of every spatial effect. An accepted entry
/// propagates to the mean cache of its own cell and tooth only. Returns
/// (accepted, proposed).
#[allow(clippy::too_many_arguments)]
pub fn mh_update_spatial(
    state: &mut BiclusterState,
    cache: &mut MeanCache,
    data: &Dataset,
    car: &CarStructure,
    step: f64,
    likelihood: bool,
    seeds: &SeedSource,
    iteration: u64,
) -> (usize, usize) {
    let n = data.n_patients();
    let j_count = data.n_sites();
    let mut accepted = 0;
    for i in 0..n {
        let mut rng = seeds.unit_stream(StreamKind::Spatial, iteration, i as u64);
        for j in 0..j_count {
            let delta: f64 = {
                let z: f64 = rng.sample(StandardNormal);
                z * step
            };
            let mut log_accept =
                spatial_prior_delta(state.spatial.row(i), j, delta, car, state.spatial_var, state.spatial_corr);
            let tooth = data.geometry().tooth_of(j);
            let mut new_miss_ll = 0.0;
            if likelihood {
                if data.is_observed(i, j) {
                    let y = data.y(i, j);
                    let mu = cache.mu[(i, j)];
                    log_accept += log_normal_pdf(y, mu + delta, state.noise_var)
                        - log_normal_pdf(y, mu, state.noise_var);
                }
                let mu_star_new = state.missing_intercept
                    + state.missing_slope
                        * (cache.tooth_mean[(i, tooth)] + delta / crate::data::SITES_PER_TOOTH as f64);
                new_miss_ll = missing_logprob(data.is_tooth_missing(i, tooth), mu_star_new);
                log_accept += new_miss_ll - cache.miss_ll[(i, tooth)];
            }
            if log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept {
                accepted += 1;
                state.spatial[(i, j)] += delta;
                if likelihood {
                    cache.shift_cell(i, j, tooth, delta, state, data, Some(new_miss_ll));
                }
            }
        }
    }
    (accepted, n * j_count)
}

/// Prior-only variant of the entrywise spatial update, for stationarity
/// checks against the CAR prior on arbitrary structures.
pub fn mh_update_spatial_prior_only<R: Rng + ?Sized>(
    spatial: &mut Mat,
    car: &CarStructure,
    sigma2_sp: f64,
    rho: f64,
    step: f64,
    rng: &mut R,
) -> usize {
    let mut accepted = 0;
    for i in 0..spatial.rows() {
        for j in 0..car.n_sites() {
            let z: f64 = rng.sample(StandardNormal);
            let delta = z * step;
            let log_accept = spatial_prior_delta(spatial.row(i), j, delta, car, sigma2_sp, rho);
            if log_accept >= 0.0 || rng.gen::<f64>().ln() < log_accept {
                spatial[(i, j)] += delta;
                accepted += 1;
            }
        }
    }
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_default_adjacency, SiteGeometry};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path_graph(n: usize) -> CarStructure {
        let mut edges = Vec::new();
        for j in 1..n {
            edges.push((j - 1, j));
        }
        let adj = AdjacencyGraph::from_edges(n, &edges).unwrap();
        precompute_car(&adj).unwrap()
    }

    #[test]
    fn two_site_path_closed_form() {
        let car = path_graph(2);
        let mut ev = car.eigenvalues().to_vec();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(ev[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 1.0, epsilon = 1e-12);
        for rho in [0.0, 0.3, 0.9, 0.99] {
            assert_relative_eq!(
                car.logdet_g(rho),
                (1.0 - rho * rho).ln(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn rho_zero_gives_degree_logdet() {
        let g = SiteGeometry::two_jaw(4).unwrap();
        let car = precompute_car(&build_default_adjacency(&g)).unwrap();
        let want: f64 = (0..car.n_sites()).map(|j| car.degree(j).ln()).sum();
        assert_relative_eq!(car.logdet_g(0.0), want, epsilon = 1e-9);
    }

    /// Dense LU log-determinant oracle.
    fn dense_logdet(m: &DMatrix<f64>) -> f64 {
        m.clone().lu().determinant().ln()
    }

    fn dense_g(car: &CarStructure, rho: f64) -> DMatrix<f64> {
        let n = car.n_sites();
        let mut g = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            g[(j, j)] = car.degree(j);
            for &k in car.neighbors(j) {
                g[(j, k)] = -rho;
            }
        }
        g
    }

    #[test]
    fn full_mouth_logdet_matches_dense() {
        let g = SiteGeometry::two_jaw(28).unwrap();
        let car = precompute_car(&build_default_adjacency(&g)).unwrap();
        assert_eq!(car.n_sites(), 168);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let rho: f64 = rng.gen_range(0.0..0.995);
            let want = dense_logdet(&dense_g(&car, rho));
            assert_relative_eq!(car.logdet_g(rho), want, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn quad_form_matches_dense() {
        let g = SiteGeometry::two_jaw(6).unwrap();
        let car = precompute_car(&build_default_adjacency(&g)).unwrap();
        let n = car.n_sites();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let nu: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let rho: f64 = rng.gen_range(0.0..0.99);
            let gm = dense_g(&car, rho);
            let v = DMatrix::from_column_slice(n, 1, &nu);
            let want = (v.transpose() * gm * v)[(0, 0)];
            assert_relative_eq!(car.quad_form(&nu, rho), want, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn logpdf_matches_dense_mvn() {
        // generic dense MVN log-density on a 6-site toy graph
        let g = SiteGeometry::single_jaw(1).unwrap();
        let car = precompute_car(&build_default_adjacency(&g)).unwrap();
        let n = car.n_sites();
        let (s2, rho) = (1.7, 0.85);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let nu: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();

        let gm = dense_g(&car, rho);
        let sigma = gm.try_inverse().unwrap() * s2;
        let v = DMatrix::from_column_slice(n, 1, &nu);
        let quad = (v.transpose() * sigma.clone().try_inverse().unwrap() * v)[(0, 0)];
        let want = -0.5 * (n as f64 * LOG_2PI + dense_logdet(&sigma) + quad);

        assert_relative_eq!(car_logpdf(&nu, s2, rho, &car), want, epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn marginal_inverse_diag_matches_dense() {
        let g = SiteGeometry::two_jaw(4).unwrap();
        let car = precompute_car(&build_default_adjacency(&g)).unwrap();
        let rho = 0.9;
        let inv = dense_g(&car, rho).try_inverse().unwrap();
        for j in 0..car.n_sites() {
            assert_relative_eq!(
                car.marginal_inverse_diag(rho, j),
                inv[(j, j)],
                epsilon = 1e-10,
                max_relative = 1e-9
            );
        }
        // tooth average quadratic form
        let sites: Vec<usize> = (0..6).collect();
        let mut want = 0.0;
        for &a in &sites {
            for &b in &sites {
                want += inv[(a, b)];
            }
        }
        want /= 36.0;
        assert_relative_eq!(
            car.average_inverse_quad(rho, &sites),
            want,
            epsilon = 1e-10,
            max_relative = 1e-9
        );
    }

    #[test]
    fn sampled_rows_match_covariance() {
        let car = path_graph(2);
        let (s2, rho) = (2.0, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 120_000;
        let (mut v0, mut v1, mut cov) = (0.0, 0.0, 0.0);
        for _ in 0..m {
            let r = car.sample_spatial_row(s2, rho, &mut rng);
            v0 += r[0] * r[0];
            v1 += r[1] * r[1];
            cov += r[0] * r[1];
        }
        // Σ = s2 * G^{-1}, G = [[1,-ρ],[-ρ,1]] → Σ = s2/(1-ρ²)·[[1,ρ],[ρ,1]]
        let scale = s2 / (1.0 - rho * rho);
        assert_relative_eq!(v0 / m as f64, scale, max_relative = 0.02);
        assert_relative_eq!(v1 / m as f64, scale, max_relative = 0.02);
        assert_relative_eq!(cov / m as f64, scale * rho, max_relative = 0.03);
    }

    #[test]
    fn from_parts_rejects_zero_degree() {
        assert!(CarStructure::from_parts(vec![vec![]], vec![0.0]).is_err());
    }
}
