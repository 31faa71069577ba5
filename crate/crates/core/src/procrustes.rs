//! Orthogonal Procrustes alignment and the OPP loss.
//!
//! Both configurations are centered, then the orthonormal `R` minimizing
//! `||R Xhat_c - X_c||_F` is taken as `U V^T` from the SVD of `X_c Xhat_c^T`.
//! Reflections are admissible, so no determinant correction is applied.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{center, centroid, PointSet};

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// `K x K` orthonormal matrix, possibly a reflection.
    pub rotation: DMatrix<f64>,
    /// `residual_fro / N`.
    pub opp_loss: f64,
    pub residual_fro: f64,
}

/// `K x N` matrix whose columns are the points.
fn column_matrix(ps: &PointSet) -> DMatrix<f64> {
    DMatrix::from_column_slice(ps.dim(), ps.n_points(), ps.coords())
}

pub fn frobenius_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn opp_align(estimate: &PointSet, truth: &PointSet) -> Result<AlignmentResult> {
    if estimate.dim() != truth.dim() || estimate.n_points() != truth.n_points() {
        return Err(Error::invalid(format!(
            "cannot align {}x{} estimate with {}x{} truth",
            estimate.n_points(),
            estimate.dim(),
            truth.n_points(),
            truth.dim()
        )));
    }
    let xhat = column_matrix(&center(estimate));
    let x = column_matrix(&center(truth));
    let cross = &x * xhat.transpose();
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateInput("SVD did not converge".into())),
    };
    let rotation = u * v_t;
    let residual_fro = frobenius_norm(&(&rotation * xhat - x));
    Ok(AlignmentResult {
        rotation,
        opp_loss: residual_fro / truth.n_points() as f64,
        residual_fro,
    })
}

/// The OPP loss of `estimate` against `truth`.
pub fn opp_loss(estimate: &PointSet, truth: &PointSet) -> Result<f64> {
    Ok(opp_align(estimate, truth)?.opp_loss)
}

/// `estimate` rotated onto `truth` and moved to the centroid of `truth`.
pub fn aligned_estimate(estimate: &PointSet, truth: &PointSet) -> Result<PointSet> {
    let alignment = opp_align(estimate, truth)?;
    let xhat = column_matrix(&center(estimate));
    let mut rotated = alignment.rotation * xhat;
    let c = centroid(truth);
    for mut col in rotated.column_iter_mut() {
        for (v, m) in col.iter_mut().zip(&c) {
            *v += m;
        }
    }
    estimate.with_coords(rotated.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> PointSet {
        PointSet::from_points("t", &[[0.0, 0.0], [2.0, 0.3], [0.4, 1.5]]).unwrap()
    }

    fn transform(ps: &PointSet, f: impl Fn(f64, f64) -> (f64, f64)) -> PointSet {
        let coords = ps.points().flat_map(|p| {
            let (a, b) = f(p[0], p[1]);
            [a, b]
        });
        ps.with_coords(coords.collect()).unwrap()
    }

    #[test]
    fn frobenius_examples() {
        assert!((frobenius_norm(&DMatrix::identity(2, 2)) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(frobenius_norm(&DMatrix::zeros(2, 3)), 0.0);
        assert_eq!(frobenius_norm(&DMatrix::from_column_slice(2, 1, &[3.0, 4.0])), 5.0);
    }

    #[test]
    fn identity_alignment() {
        let r = opp_align(&tri(), &tri()).unwrap();
        assert!(r.opp_loss < 1e-12);
        assert_eq!(r.opp_loss, r.residual_fro / 3.0);
    }

    #[test]
    fn rigid_motion_and_mirror() {
        let moved = transform(&tri(), |x, y| (-y + 7.0, x - 3.0));
        assert!(opp_loss(&moved, &tri()).unwrap() < 1e-10);
        let mirror = transform(&tri(), |x, y| (-x, y));
        assert!(opp_loss(&mirror, &tri()).unwrap() < 1e-10);
    }

    #[test]
    fn rotation_is_orthonormal() {
        let noisy = transform(&tri(), |x, y| (0.9 * x + 0.1, 1.1 * y - x * 0.05));
        let r = opp_align(&noisy, &tri()).unwrap().rotation;
        let rtr = r.transpose() * &r;
        let eye = DMatrix::<f64>::identity(2, 2);
        assert!((rtr - eye).amax() < 1e-10);
    }

    #[test]
    fn aligned_estimate_reaches_the_loss() {
        let noisy = transform(&tri(), |x, y| (-0.8 * y + 5.0, 1.2 * x - 0.1));
        let a = aligned_estimate(&noisy, &tri()).unwrap();
        let r = opp_align(&noisy, &tri()).unwrap();
        let diff: f64 = a
            .coords()
            .iter()
            .zip(tri().coords())
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        assert!((diff - r.residual_fro).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_are_accepted() {
        let line = PointSet::from_points("l", &[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]).unwrap();
        let other = PointSet::from_points("l", &[[0.0, 0.0], [0.0, 1.0], [0.0, 3.0]]).unwrap();
        assert!(opp_loss(&other, &line).unwrap() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let two = PointSet::from_points("a", &[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(opp_align(&two, &tri()), Err(Error::InvalidArgument(_))));
    }
}
