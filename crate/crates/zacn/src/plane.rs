//! Local plane estimation: least-squares normal through an anchor point and
//! the in-plane orthonormal basis derived from that normal.

use nalgebra::{Matrix3, Vector3};

use crate::camera::Point3;
use crate::error::{Error, Result};

/// Threshold on `1 - n2^2` below which the analytic basis is ill-conditioned
/// (normal nearly parallel to the image Y axis).
pub const EPS_BASIS: f64 = 1e-6;

/// Unit normal of a fitted plane, sign-normalized so `n3 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneNormal {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

impl PlaneNormal {
    pub fn as_array(&self) -> [f64; 3] {
        [self.n1, self.n2, self.n3]
    }

    /// Signed distance of `p` from the plane through `anchor` with this normal.
    pub fn signed_distance(&self, p: Point3, anchor: Point3) -> f64 {
        self.n1 * (p.x - anchor.x) + self.n2 * (p.y - anchor.y) + self.n3 * (p.z - anchor.z)
    }
}

/// Orthonormal in-plane axes; `x_axis` is horizontal (zero Y component).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneBasis {
    pub x_axis: [f64; 3],
    pub y_axis: [f64; 3],
}

impl PlaneBasis {
    /// Basis used when the analytic construction degenerates: horizontal
    /// X and the optical axis, orthogonal to normals with `|n2| ~ 1`.
    pub fn axis_aligned_fallback() -> Self {
        Self {
            x_axis: [1.0, 0.0, 0.0],
            y_axis: [0.0, 0.0, 1.0],
        }
    }
}

/// Sum of squared plane distances of `points` from the plane `(normal, anchor)`.
pub fn fit_residual(normal: [f64; 3], points: &[Point3], anchor: Point3) -> f64 {
    points
        .iter()
        .map(|p| {
            let d = normal[0] * (p.x - anchor.x)
                + normal[1] * (p.y - anchor.y)
                + normal[2] * (p.z - anchor.z);
            d * d
        })
        .sum()
}

/// Least-squares plane normal through `anchor`.
///
/// Minimizes the summed squared distances of `neighbors` to the plane,
/// which is the smallest-eigenvalue eigenvector of the 3x3 scatter matrix
/// of the differences `P_i - anchor` (equivalently the left singular vector
/// of the difference matrix with the smallest singular value). The sign is
/// normalized so `n3 >= 0`; if `n3` is exactly zero the first nonzero
/// component is made positive.
pub fn fit_plane_normal(neighbors: &[Point3], anchor: Point3) -> Result<PlaneNormal> {
    if neighbors.len() < 3 {
        return Err(Error::degenerate(format!(
            "plane fit needs at least 3 points, got {}",
            neighbors.len()
        )));
    }
    let mut scatter = Matrix3::<f64>::zeros();
    let mut spread = 0.0;
    for p in neighbors {
        let d = Vector3::new(p.x - anchor.x, p.y - anchor.y, p.z - anchor.z);
        scatter += d * d.transpose();
        spread += d.norm_squared();
    }
    if spread == 0.0 {
        return Err(Error::degenerate(
            "plane fit points all coincide with the anchor",
        ));
    }
    let eigen = scatter.symmetric_eigen();
    let mut min_idx = 0;
    for i in 1..3 {
        if eigen.eigenvalues[i] < eigen.eigenvalues[min_idx] {
            min_idx = i;
        }
    }
    let mut n = eigen.eigenvectors.column(min_idx).normalize();
    let flip = if n.z != 0.0 {
        n.z < 0.0
    } else if n.x != 0.0 {
        n.x < 0.0
    } else {
        n.y < 0.0
    };
    if flip {
        n = -n;
    }
    Ok(PlaneNormal {
        n1: n.x,
        n2: n.y,
        n3: n.z,
    })
}

/// Analytic in-plane basis for `n`: horizontal `x'` and `y' = n x x'`.
///
/// Returns `None` when `1 - n2^2 < EPS_BASIS`; callers fall back to
/// [`PlaneBasis::axis_aligned_fallback`].
pub fn plane_basis(n: &PlaneNormal) -> Option<PlaneBasis> {
    let s2 = 1.0 - n.n2 * n.n2;
    if s2 < EPS_BASIS {
        return None;
    }
    let s = s2.sqrt();
    Some(PlaneBasis {
        x_axis: [n.n3 / s, 0.0, -n.n1 / s],
        y_axis: [-n.n1 * n.n2 / s, s, -n.n2 * n.n3 / s],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    fn norm(a: [f64; 3]) -> f64 {
        dot(a, a).sqrt()
    }

    /// Brute-force reference: scan unit normals on a `step_deg`-spaced
    /// spherical grid and return the one with the smallest residual.
    fn spherical_grid_argmin(
        points: &[Point3],
        anchor: Point3,
        step_deg: f64,
    ) -> ([f64; 3], f64) {
        let step = step_deg.to_radians();
        let mut best = ([0.0, 0.0, 1.0], f64::INFINITY);
        let n_theta = (std::f64::consts::PI / step).ceil() as usize;
        let n_phi = (2.0 * std::f64::consts::PI / step).ceil() as usize;
        for ti in 0..=n_theta {
            let theta = ti as f64 * step;
            for pi in 0..n_phi {
                let phi = pi as f64 * step;
                let n = [
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                ];
                let r = fit_residual(n, points, anchor);
                if r < best.1 {
                    best = (n, r);
                }
            }
        }
        best
    }

    fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
        let c = (dot(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0);
        c.abs().acos() // sign-insensitive
    }

    #[test]
    fn fronto_parallel_patch_gives_vertical_normal() {
        let anchor = Point3::new(0.0, 0.0, 2.0);
        let mut pts = Vec::new();
        for dx in [-1.0, 0.0, 1.0] {
            for dy in [-1.0, 0.0, 1.0] {
                if dx != 0.0 || dy != 0.0 {
                    pts.push(Point3::new(dx * 0.1, dy * 0.1, 2.0));
                }
            }
        }
        assert_eq!(pts.len(), 8);
        let n = fit_plane_normal(&pts, anchor).unwrap();
        assert!((n.n1).abs() < 1e-12);
        assert!((n.n2).abs() < 1e-12);
        assert!((n.n3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_tilted_plane_matches_analytic_and_brute_force() {
        // Plane z = x + 1 through the anchor: normal (-1, 0, 1)/sqrt(2).
        let anchor = Point3::new(0.5, 0.0, 1.5);
        let mut pts = Vec::new();
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                let x = 0.5 + i as f64 * 0.07;
                let y = j as f64 * 0.07;
                pts.push(Point3::new(x, y, x + 1.0));
            }
        }
        let n = fit_plane_normal(&pts, anchor).unwrap();
        let expected = [-1.0 / 2f64.sqrt(), 0.0, 1.0 / 2f64.sqrt()];
        assert!((n.n1 - expected[0]).abs() < 1e-9, "n1={}", n.n1);
        assert!((n.n2 - expected[1]).abs() < 1e-9, "n2={}", n.n2);
        assert!((n.n3 - expected[2]).abs() < 1e-9, "n3={}", n.n3);

        // Independent check: dense spherical scan agrees within 1e-3 rad.
        let (brute, _) = spherical_grid_argmin(&pts, anchor, 0.05);
        assert!(
            angle_between(n.as_array(), brute) < 1e-3,
            "brute-force disagrees: {:?} vs {:?}",
            n,
            brute
        );
    }

    #[test]
    fn noisy_fit_beats_one_degree_spherical_grid() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let anchor = Point3::new(0.0, 0.0, 2.0);
        let mut pts = Vec::new();
        for _ in 0..24 {
            let a = rng.random_range(-0.2..0.2);
            let b = rng.random_range(-0.2..0.2);
            let noise = rng.random_range(-1e-3..1e-3);
            // Plane z = 2 + 0.4x - 0.3y, perturbed.
            pts.push(Point3::new(a, b, 2.0 + 0.4 * a - 0.3 * b + noise));
        }
        let n = fit_plane_normal(&pts, anchor).unwrap();
        let fitted = fit_residual(n.as_array(), &pts, anchor);
        let (_, brute_best) = spherical_grid_argmin(&pts, anchor, 1.0);
        assert!(
            fitted <= brute_best + 1e-15,
            "fit residual {fitted} worse than grid best {brute_best}"
        );
    }

    #[test]
    fn degenerate_inputs_error() {
        let anchor = Point3::new(0.0, 0.0, 1.0);
        assert!(fit_plane_normal(&[anchor, anchor], anchor).is_err());
        assert!(fit_plane_normal(&[anchor, anchor, anchor], anchor).is_err());
    }

    #[test]
    fn basis_for_vertical_normal_is_image_axes() {
        let n = PlaneNormal {
            n1: 0.0,
            n2: 0.0,
            n3: 1.0,
        };
        let b = plane_basis(&n).unwrap();
        assert_eq!(b.x_axis, [1.0, 0.0, 0.0]);
        assert_eq!(b.y_axis, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn basis_for_diagonal_normal() {
        let s = 1.0 / 2f64.sqrt();
        let n = PlaneNormal {
            n1: s,
            n2: 0.0,
            n3: s,
        };
        let b = plane_basis(&n).unwrap();
        assert!((b.x_axis[0] - s).abs() < 1e-12);
        assert!(b.x_axis[1] == 0.0);
        assert!((b.x_axis[2] + s).abs() < 1e-12);
        assert!((b.y_axis[0]).abs() < 1e-12);
        assert!((b.y_axis[1] - 1.0).abs() < 1e-12);
        assert!((b.y_axis[2]).abs() < 1e-12);
    }

    #[test]
    fn near_vertical_y_normal_signals_degenerate_basis() {
        let n = PlaneNormal {
            n1: 0.0,
            n2: 0.9999999,
            n3: (1.0f64 - 0.9999999f64 * 0.9999999f64).sqrt(),
        };
        assert!(plane_basis(&n).is_none());
        let fb = PlaneBasis::axis_aligned_fallback();
        assert!(dot(fb.x_axis, fb.y_axis).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn basis_is_orthonormal_and_in_plane(
            nx in -1.0..1.0f64,
            ny in -0.9..0.9f64,
            nz in -1.0..1.0f64,
        ) {
            let scale = (nx * nx + ny * ny + nz * nz).sqrt();
            prop_assume!(scale > 1e-3);
            let mut n = [nx / scale, ny / scale, nz / scale];
            prop_assume!(n[1].abs() <= 0.9);
            if n[2] < 0.0 {
                n = [-n[0], -n[1], -n[2]];
            }
            let normal = PlaneNormal { n1: n[0], n2: n[1], n3: n[2] };
            let b = plane_basis(&normal).unwrap();
            prop_assert!((norm(b.x_axis) - 1.0).abs() < 1e-9);
            prop_assert!((norm(b.y_axis) - 1.0).abs() < 1e-9);
            prop_assert!(dot(b.x_axis, n).abs() < 1e-9);
            prop_assert!(dot(b.y_axis, n).abs() < 1e-9);
            prop_assert!(dot(b.x_axis, b.y_axis).abs() < 1e-9);
            prop_assert!(b.x_axis[1] == 0.0);
        }

        #[test]
        fn fitted_normal_is_unit_with_nonnegative_n3(
            seed in 0u64..1000,
        ) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let anchor = Point3::new(0.0, 0.0, 1.0);
            let pts: Vec<Point3> = (0..9)
                .map(|_| Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.5..1.5),
                ))
                .collect();
            let n = fit_plane_normal(&pts, anchor).unwrap();
            prop_assert!((norm(n.as_array()) - 1.0).abs() < 1e-9);
            prop_assert!(n.n3 >= 0.0);
        }
    }
}
