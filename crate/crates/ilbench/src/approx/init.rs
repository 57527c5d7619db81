use crate::math::{dot, Mat};
use crate::rng::Rng;
use rand::Rng as _;
use rand_distr::StandardNormal;

/// Orthogonal weight initialisation: fill with Gaussians, orthonormalise the
/// shorter side with modified Gram-Schmidt, scale by `gain`. For rows <= cols
/// the rows come out orthonormal (times gain), otherwise the columns do.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut Rng) -> Mat {
    assert!(rows > 0 && cols > 0, "orthogonal init needs positive dims");
    if rows <= cols {
        let mut m = gaussian_orthonormal_rows(rows, cols, rng);
        m.map_inplace(|v| v * gain);
        m
    } else {
        let t = gaussian_orthonormal_rows(cols, rows, rng);
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.row_mut(r)[c] = t.row(c)[r] * gain;
            }
        }
        m
    }
}

fn gaussian_orthonormal_rows(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    debug_assert!(rows <= cols);
    let mut m = Mat::zeros(rows, cols);
    for r in 0..rows {
        // Draw, project out earlier rows, renormalise. A second projection
        // pass keeps the basis orthogonal to fp accuracy at width 256.
        // Redraw in the (measure-zero) event of near linear dependence.
        loop {
            for v in m.row_mut(r) {
                *v = rng.sample(StandardNormal);
            }
            for _pass in 0..2 {
                for p in 0..r {
                    let coef = dot(m.row(r), m.row(p));
                    let prev = m.row(p).to_vec();
                    for (v, pv) in m.row_mut(r).iter_mut().zip(&prev) {
                        *v -= coef * pv;
                    }
                }
            }
            let norm = dot(m.row(r), m.row(r)).sqrt();
            if norm > 1e-8 {
                for v in m.row_mut(r) {
                    *v /= norm;
                }
                break;
            }
        }
    }
    m
}
