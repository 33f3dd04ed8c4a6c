//! Pinhole camera model: back-projection of pixels with depth into the
//! camera frame and projection of camera-frame points onto the image plane.
//!
//! Conventions: `u` is the column axis, `v` the row axis (both in pixels,
//! fractional values allowed); `z` is metric depth along the optical axis,
//! positive in front of the camera. All geometry runs in `f64`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Pinhole intrinsics: focal lengths and principal point, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    /// Focal length along the column (u) axis.
    pub f_u: f64,
    /// Focal length along the row (v) axis.
    pub f_v: f64,
    /// Principal point column.
    pub c_u: f64,
    /// Principal point row.
    pub c_v: f64,
}

impl CameraIntrinsics {
    /// Validates that focal lengths are positive and everything is finite.
    pub fn new(f_u: f64, f_v: f64, c_u: f64, c_v: f64) -> Result<Self> {
        if !(f_u.is_finite() && f_v.is_finite() && f_u > 0.0 && f_v > 0.0) {
            return Err(Error::domain(format!(
                "focal lengths must be positive and finite, got fu={f_u} fv={f_v}"
            )));
        }
        if !(c_u.is_finite() && c_v.is_finite()) {
            return Err(Error::domain(format!(
                "principal point must be finite, got cu={c_u} cv={c_v}"
            )));
        }
        Ok(Self { f_u, f_v, c_u, c_v })
    }

    /// Loads intrinsics from a plain-text file of `key=value` lines.
    ///
    /// Recognized keys are `fu`, `fv`, `cu`, `cv`; lines starting with `#`
    /// and blank lines are ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut fu = None;
        let mut fv = None;
        let mut cu = None;
        let mut cv = None;
        let mut offset = 0u64;
        for line in text.lines() {
            let line_start = offset;
            offset += line.len() as u64 + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                Error::format(path, line_start, format!("expected key=value, got {trimmed:?}"))
            })?;
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::format(path, line_start, format!("invalid number {:?}", value.trim()))
            })?;
            match key.trim() {
                "fu" => fu = Some(value),
                "fv" => fv = Some(value),
                "cu" => cu = Some(value),
                "cv" => cv = Some(value),
                other => {
                    return Err(Error::format(
                        path,
                        line_start,
                        format!("unknown key {other:?}"),
                    ))
                }
            }
        }
        match (fu, fv, cu, cv) {
            (Some(fu), Some(fv), Some(cu), Some(cv)) => Self::new(fu, fv, cu, cv),
            _ => Err(Error::format(
                path,
                offset,
                "missing one of fu, fv, cu, cv",
            )),
        }
    }
}

/// A point in the camera frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// An image location in pixels; fractional coordinates are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    /// Column coordinate.
    pub u: f64,
    /// Row coordinate.
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Back-projects pixel `p` at depth `z` (meters) into the camera frame.
///
/// Depth is measured along the optical axis, so the result has `z` as its
/// third coordinate exactly.
pub fn back_project(p: Pixel, z: f64, k: &CameraIntrinsics) -> Result<Point3> {
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::domain(format!(
            "back-projection needs positive finite depth, got {z}"
        )));
    }
    Ok(Point3::new(
        (p.u - k.c_u) * z / k.f_u,
        (p.v - k.c_v) * z / k.f_v,
        z,
    ))
}

/// Projects a camera-frame point onto the image plane.
pub fn project(point: Point3, k: &CameraIntrinsics) -> Result<Pixel> {
    if point.z <= 0.0 {
        return Err(Error::domain(format!(
            "cannot project point at or behind the camera plane (z = {})",
            point.z
        )));
    }
    Ok(Pixel::new(
        k.f_u * point.x / point.z + k.c_u,
        k.f_v * point.y / point.z + k.c_v,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(f_u: f64, f_v: f64, c_u: f64, c_v: f64) -> CameraIntrinsics {
        CameraIntrinsics::new(f_u, f_v, c_u, c_v).unwrap()
    }

    #[test]
    fn optical_axis_pixel_maps_to_axis_point() {
        let cam = k(100.0, 100.0, 50.0, 50.0);
        let p = back_project(Pixel::new(50.0, 50.0), 2.0, &cam).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn direct_pinhole_substitution() {
        let cam = k(100.0, 100.0, 50.0, 50.0);
        let p = back_project(Pixel::new(60.0, 50.0), 1.0, &cam).unwrap();
        assert!((p.x - 0.1).abs() < 1e-15);
        assert_eq!(p.y, 0.0);
        assert_eq!(p.z, 1.0);
    }

    #[test]
    fn axis_point_hits_principal_point() {
        let cam = k(100.0, 100.0, 50.0, 50.0);
        let px = project(Point3::new(0.0, 0.0, 5.0), &cam).unwrap();
        assert_eq!(px, Pixel::new(50.0, 50.0));
    }

    #[test]
    fn project_inverts_back_project_example() {
        let cam = k(100.0, 100.0, 50.0, 50.0);
        let px = project(Point3::new(0.1, 0.0, 1.0), &cam).unwrap();
        assert!((px.u - 60.0).abs() < 1e-12);
        assert!((px.v - 50.0).abs() < 1e-12);
    }

    #[test]
    fn project_with_asymmetric_focals() {
        let cam = k(200.0, 100.0, 0.0, 0.0);
        let px = project(Point3::new(1.0, 1.0, 2.0), &cam).unwrap();
        assert_eq!(px, Pixel::new(100.0, 50.0));
    }

    #[test]
    fn non_positive_depth_is_rejected() {
        let cam = k(100.0, 100.0, 50.0, 50.0);
        assert!(back_project(Pixel::new(0.0, 0.0), 0.0, &cam).is_err());
        assert!(back_project(Pixel::new(0.0, 0.0), -1.0, &cam).is_err());
        assert!(back_project(Pixel::new(0.0, 0.0), f64::NAN, &cam).is_err());
        assert!(project(Point3::new(0.0, 0.0, 0.0), &cam).is_err());
        assert!(project(Point3::new(0.0, 0.0, -3.0), &cam).is_err());
    }

    #[test]
    fn invalid_intrinsics_are_rejected() {
        assert!(CameraIntrinsics::new(0.0, 100.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(100.0, -5.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(100.0, 100.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn intrinsics_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cam.txt");
        std::fs::write(&path, "# toy camera\nfu=525.5\nfv = 520.25\ncu=319.5\ncv=239.5\n")
            .unwrap();
        let cam = CameraIntrinsics::load(&path).unwrap();
        assert_eq!(cam, k(525.5, 520.25, 319.5, 239.5));
    }

    #[test]
    fn intrinsics_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing_key = dir.path().join("partial.txt");
        std::fs::write(&missing_key, "fu=100\nfv=100\ncu=50\n").unwrap();
        assert!(matches!(
            CameraIntrinsics::load(&missing_key),
            Err(Error::Format { .. })
        ));

        let bad_line = dir.path().join("bad.txt");
        std::fs::write(&bad_line, "fu=100\nnonsense\n").unwrap();
        assert!(matches!(
            CameraIntrinsics::load(&bad_line),
            Err(Error::Format { offset: 7, .. })
        ));
    }

    proptest! {
        #[test]
        fn roundtrip_within_1e9(
            u in -500.0..1500.0f64,
            v in -500.0..1500.0f64,
            z in 0.05..50.0f64,
            f_u in 50.0..2000.0f64,
            f_v in 50.0..2000.0f64,
            c_u in 0.0..1000.0f64,
            c_v in 0.0..1000.0f64,
        ) {
            let cam = k(f_u, f_v, c_u, c_v);
            let p = back_project(Pixel::new(u, v), z, &cam).unwrap();
            let q = project(p, &cam).unwrap();
            prop_assert!((q.u - u).abs() < 1e-9, "u: {} vs {}", q.u, u);
            prop_assert!((q.v - v).abs() < 1e-9, "v: {} vs {}", q.v, v);
        }

        #[test]
        fn back_projection_is_linear_in_depth(
            u in -100.0..400.0f64,
            v in -100.0..400.0f64,
            z in 0.1..20.0f64,
            s in 0.25..8.0f64,
        ) {
            let cam = k(320.0, 300.0, 160.0, 120.0);
            let p = back_project(Pixel::new(u, v), z, &cam).unwrap();
            let ps = back_project(Pixel::new(u, v), s * z, &cam).unwrap();
            prop_assert!((ps.x - s * p.x).abs() < 1e-9 * p.x.abs().max(1.0));
            prop_assert!((ps.y - s * p.y).abs() < 1e-9 * p.y.abs().max(1.0));
            prop_assert!((ps.z - s * p.z).abs() < 1e-12 * p.z.abs());
        }
    }
}
