use crate::error::{Error, Result};
use crate::math::{matmul_nt, sq_dist, Mat};

/// Median of the pairwise distances over all unordered distinct pairs;
/// `squared` selects squared versus plain Euclidean distances. A zero median
/// (duplicate points) falls back to the smallest non-zero distance; if every
/// pair coincides the bandwidth is undefined and the call fails.
pub fn median_heuristic(points: &Mat, squared: bool) -> Result<f64> {
    let n = points.rows();
    if n < 2 {
        return Err(Error::Config(format!("median heuristic needs at least 2 points, got {n}")));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let sq = sq_dist(points.row(i), points.row(j));
            dists.push(if squared { sq } else { sq.sqrt() });
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median > 0.0 {
        return Ok(median);
    }
    match dists.iter().copied().find(|&d| d > 0.0) {
        Some(d) => Ok(d),
        None => Err(Error::Config("degenerate bandwidth: all pairwise distances are zero".into())),
    }
}

/// Dense kernel matrix K[i][j] = exp(-|a_i - b_j|^2 / sigma1)
/// + exp(-|a_i - b_j|^2 / sigma2). Squared distances come from the Gram
/// expansion |a|^2 + |b|^2 - 2 a.b so the inner products run through one
/// matrix product; tiny negative round-off is clamped to zero.
pub fn kernel_matrix(a: &Mat, b: &Mat, sigma1: f64, sigma2: f64) -> Mat {
    assert_eq!(a.cols(), b.cols(), "kernel operand width mismatch");
    assert!(sigma1 > 0.0 && sigma2 > 0.0, "bandwidths must be positive");
    let sqn = |m: &Mat| -> Vec<f64> {
        (0..m.rows()).map(|i| m.row(i).iter().map(|v| v * v).sum()).collect()
    };
    let an = sqn(a);
    let bn = sqn(b);
    let mut k = matmul_nt(a, b);
    for i in 0..k.rows() {
        let row = k.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            let d2 = (an[i] + bn[j] - 2.0 * *v).max(0.0);
            *v = (-d2 / sigma1).exp() + (-d2 / sigma2).exp();
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use rand::Rng as _;

    #[test]
    fn known_squared_median() {
        // 1-D points {0, 1, 3}: squared pairwise distances {1, 9, 4},
        // sorted {1, 4, 9}, median 4.
        let pts = Mat::from_vec(3, 1, vec![0.0, 1.0, 3.0]);
        assert_eq!(median_heuristic(&pts, true).unwrap(), 4.0);
        // Plain distances {1, 3, 2} -> median 2.
        assert_eq!(median_heuristic(&pts, false).unwrap(), 2.0);
    }

    #[test]
    fn even_pair_count_averages_the_middle() {
        // {0, 1, 2, 4}: squared distances {1, 4, 16, 1, 9, 4} sorted
        // {1, 1, 4, 4, 9, 16} -> median (4 + 4) / 2 = 4.
        let pts = Mat::from_vec(4, 1, vec![0.0, 1.0, 2.0, 4.0]);
        assert_eq!(median_heuristic(&pts, true).unwrap(), 4.0);
    }

    #[test]
    fn squared_bandwidth_scales_quadratically() {
        let mut rng = seed_rng(41);
        for _ in 0..20 {
            let data: Vec<f64> = (0..24).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let pts = Mat::from_vec(8, 3, data.clone());
            let scaled = Mat::from_vec(8, 3, data.iter().map(|v| 2.5 * v).collect());
            let b = median_heuristic(&pts, true).unwrap();
            let bs = median_heuristic(&scaled, true).unwrap();
            assert!((bs - 6.25 * b).abs() < 1e-9 * bs.abs().max(1.0));
        }
    }

    #[test]
    fn duplicate_points_fall_back_to_smallest_nonzero() {
        // Pairs of {0, 0, 2}: distances {0, 2, 2} -> median 2 already; use
        // {0, 0, 0, 2} instead: squared distances {0, 0, 0, 4, 4, 4},
        // median (0 + 4)/2 = 2 -- still fine. Force a zero median with
        // {0, 0, 0, 0, 2}: 10 pairs, 6 zeros, median 0 -> fallback 4.
        let pts = Mat::from_vec(5, 1, vec![0.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(median_heuristic(&pts, true).unwrap(), 4.0);
    }

    #[test]
    fn all_identical_points_are_rejected() {
        let pts = Mat::from_vec(3, 2, vec![1.0; 6]);
        assert!(median_heuristic(&pts, true).is_err());
        let one = Mat::from_vec(1, 2, vec![1.0, 2.0]);
        assert!(median_heuristic(&one, true).is_err());
    }

    #[test]
    fn kernel_matrix_matches_direct_evaluation() {
        let mut rng = seed_rng(42);
        let a = Mat::from_vec(5, 3, (0..15).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let b = Mat::from_vec(4, 3, (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let k = kernel_matrix(&a, &b, 1.7, 0.4);
        for i in 0..5 {
            for j in 0..4 {
                let d2 = sq_dist(a.row(i), b.row(j));
                let want = (-d2 / 1.7).exp() + (-d2 / 0.4).exp();
                assert!((k.row(i)[j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_at_zero_distance_is_two() {
        let a = Mat::from_vec(1, 2, vec![0.3, -0.7]);
        let k = kernel_matrix(&a, &a, 2.0, 0.5);
        assert_eq!(k.row(0)[0], 2.0);
    }
}
