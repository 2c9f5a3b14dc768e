//! Repulsive point-configuration prior: squared-exponential Gram matrices,
//! their log-determinants, and the leave-one-out Schur ratios used by the
//! coefficient Metropolis-Hastings moves.
//!
//! Normalizing constants are never evaluated. At fixed configuration size
//! they cancel in every acceptance ratio, and the cluster-count prior is
//! chosen so that they cancel in the trans-dimensional ratio as well, which
//! reduces that ratio to a plain determinant quotient.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Pivots at or below this floor mean a numerically singular Gram matrix.
const PIVOT_FLOOR: f64 = 1e-300;

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn kernel(a: &[f64], b: &[f64], bandwidth: f64) -> f64 {
    (-sq_dist(a, b) / (bandwidth * bandwidth)).exp()
}

/// Squared-exponential Gram matrix over a point configuration. The diagonal
/// is identically 1; the bandwidth enters only squared, so its sign is
/// irrelevant (zero is rejected).
pub fn gram_matrix(points: &[Vec<f64>], bandwidth: f64) -> Result<Mat> {
    if points.is_empty() {
        return Err(Error::validation("gram matrix needs at least one point"));
    }
    if bandwidth == 0.0 {
        return Err(Error::validation("kernel bandwidth must be nonzero"));
    }
    let n = points.len();
    let mut c = Mat::zeros(n, n);
    for a in 0..n {
        c[(a, a)] = 1.0;
        for b in 0..a {
            let v = kernel(&points[a], &points[b], bandwidth);
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    Ok(c)
}

/// Log-determinant of a symmetric positive-definite matrix by Cholesky-style
/// LDLᵀ elimination. A pivot at or below the floor signals a degenerate
/// configuration instead of returning NaN.
pub fn sym_logdet(c: &Mat) -> Result<f64> {
    let n = c.rows();
    let mut a = c.clone();
    let mut logdet = 0.0;
    for k in 0..n {
        let d = a[(k, k)];
        if !(d > PIVOT_FLOOR) {
            return Err(Error::Degenerate(format!(
                "gram pivot {d:.3e} at step {k}; configuration has (near-)replicates"
            )));
        }
        logdet += d.ln();
        for i in k + 1..n {
            let f = a[(i, k)] / d;
            for j in k + 1..=i {
                let v = a[(j, k)];
                a[(i, j)] -= f * v;
            }
        }
    }
    Ok(logdet)
}

/// Unnormalized log prior density of a configuration: log det of its Gram
/// matrix. Errs on replicate-bearing (numerically singular) configurations.
pub fn log_dpp_density(points: &[Vec<f64>], bandwidth: f64) -> Result<f64> {
    sym_logdet(&gram_matrix(points, bandwidth)?)
}

/// Log ratio of configuration densities when the point at `index` moves to
/// `proposal`, with all other points held fixed.
///
/// Each side is the Schur complement 1 - cᵀ(C₋)⁻¹c of the moved point in its
/// own Gram matrix, with the cross-covariance vector c evaluated at that
/// side's point, so the result equals the difference of full
/// log-determinants. Returns -inf for a proposal that collides with a
/// retained point; errs if the current configuration is itself degenerate.
pub fn schur_log_ratio(
    points: &[Vec<f64>],
    index: usize,
    proposal: &[f64],
    bandwidth: f64,
) -> Result<f64> {
    let n = points.len();
    assert!(index < n, "point index out of range");
    if n == 1 {
        // 1x1 Gram is identically 1 on both sides
        return Ok(0.0);
    }
    if bandwidth == 0.0 {
        return Err(Error::validation("kernel bandwidth must be nonzero"));
    }
    let others: Vec<&Vec<f64>> = points
        .iter()
        .enumerate()
        .filter(|(a, _)| *a != index)
        .map(|(_, p)| p)
        .collect();
    let m = others.len();
    let mut cmat = Mat::zeros(m, m);
    for a in 0..m {
        cmat[(a, a)] = 1.0;
        for b in 0..a {
            let v = kernel(others[a], others[b], bandwidth);
            cmat[(a, b)] = v;
            cmat[(b, a)] = v;
        }
    }
    let chol = cholesky(&cmat).ok_or_else(|| {
        Error::Degenerate("leave-one-out gram matrix is singular".to_string())
    })?;

    let schur = |v: &[f64]| -> f64 {
        let cross: Vec<f64> = others.iter().map(|o| kernel(o, v, bandwidth)).collect();
        let w = chol_solve(&chol, &cross);
        1.0 - crate::mat::dot(&cross, &w)
    };

    let cur = schur(&points[index]);
    if !(cur > PIVOT_FLOOR) {
        return Err(Error::Degenerate(
            "current configuration has a vanishing schur complement".to_string(),
        ));
    }
    let new = schur(proposal);
    if !(new > PIVOT_FLOOR) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(new.ln() - cur.ln())
}

/// Dense lower-triangular Cholesky factor; None if not positive definite.
fn cholesky(a: &Mat) -> Option<Mat> {
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > PIVOT_FLOOR) {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solve L Lᵀ x = b.
fn chol_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let v = y[k];
            y[i] -= l[(i, k)] * v;
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let v = y[k];
            y[i] -= l[(k, i)] * v;
        }
        y[i] /= l[(i, i)];
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn gram_single_point_is_one() {
        let c = gram_matrix(&pts(&[&[1.0, 2.0]]), 0.7).unwrap();
        assert_eq!(c.rows(), 1);
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(log_dpp_density(&pts(&[&[1.0, 2.0]]), 0.7).unwrap(), 0.0);
    }

    #[test]
    fn gram_duplicates_are_degenerate() {
        let p = pts(&[&[0.5, -1.0], &[0.5, -1.0]]);
        let c = gram_matrix(&p, 1.3).unwrap();
        assert_eq!(c[(0, 1)], 1.0);
        assert!(matches!(
            log_dpp_density(&p, 1.3),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn gram_offdiag_hand_value() {
        // 1-D points at 0 and theta: off-diagonal e^{-1}
        let theta = 0.83;
        let c = gram_matrix(&pts(&[&[0.0], &[theta]]), theta).unwrap();
        assert_relative_eq!(c[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn zero_bandwidth_rejected() {
        assert!(gram_matrix(&pts(&[&[0.0]]), 0.0).is_err());
    }

    /// Cofactor-expansion determinant for the 3x3 oracle.
    fn det3(c: &Mat) -> f64 {
        c[(0, 0)] * (c[(1, 1)] * c[(2, 2)] - c[(1, 2)] * c[(2, 1)])
            - c[(0, 1)] * (c[(1, 0)] * c[(2, 2)] - c[(1, 2)] * c[(2, 0)])
            + c[(0, 2)] * (c[(1, 0)] * c[(2, 1)] - c[(1, 1)] * c[(2, 0)])
    }

    #[test]
    fn logdet_matches_cofactor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let p: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let c = gram_matrix(&p, 1.1).unwrap();
            let want = det3(&c).ln();
            let got = log_dpp_density(&p, 1.1).unwrap();
            assert_relative_eq!(got, want, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn schur_identity_proposal_is_zero() {
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.5], &[-0.5, 2.0]]);
        let r = schur_log_ratio(&p, 1, &[1.0, 0.5], 0.9).unwrap();
        assert_relative_eq!(r, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn schur_collision_rejects() {
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.5], &[-0.5, 2.0]]);
        let r = schur_log_ratio(&p, 1, &[-0.5, 2.0], 0.9).unwrap();
        assert_eq!(r, f64::NEG_INFINITY);
    }

    #[test]
    fn schur_equals_full_determinant_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let p: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect())
                .collect();
            let idx = rng.gen_range(0..4);
            let proposal: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let bw = rng.gen_range(0.4..2.5);
            let fast = schur_log_ratio(&p, idx, &proposal, bw).unwrap();
            let mut moved = p.clone();
            moved[idx] = proposal.clone();
            let slow = log_dpp_density(&moved, bw).unwrap() - log_dpp_density(&p, bw).unwrap();
            assert_relative_eq!(fast, slow, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn density_is_permutation_invariant() {
        let p = pts(&[&[0.1], &[1.4], &[-0.8], &[2.2]]);
        let base = log_dpp_density(&p, 1.0).unwrap();
        let mut q = p.clone();
        q.swap(0, 3);
        q.swap(1, 2);
        assert_relative_eq!(log_dpp_density(&q, 1.0).unwrap(), base, epsilon = 1e-12);
    }

    #[test]
    fn density_decreases_as_points_approach() {
        // two 1-D points, one sliding toward the other
        let mut last = f64::INFINITY;
        for step in 1..=20 {
            let gap = 2.0 - 0.09 * step as f64;
            let d = log_dpp_density(&pts(&[&[0.0], &[gap]]), 1.0).unwrap();
            assert!(d < last, "gap {gap}: {d} !< {last}");
            last = d;
        }
    }
}
