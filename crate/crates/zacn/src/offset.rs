//! Depth-adapted offset fields.
//!
//! For every output location of a convolution, a local plane is fitted to
//! the back-projected depth footprint, a metric grid is laid out on that
//! plane, and the grid is projected back to pixels. The differences between
//! the projected taps and the regular dilated grid form the offset field
//! consumed by the deformable convolution.

use crate::camera::{back_project, project, CameraIntrinsics, Pixel, Point3};
use crate::error::{Error, Result};
use crate::grid::ConvSpec;
use crate::io::DepthMap;
use crate::plane::{fit_plane_normal, plane_basis, PlaneBasis, PlaneNormal};

/// Metric tap spacings of the 3D planar grid, tied to the reference depth
/// at which the adapted and regular receptive fields coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFactors {
    /// Spacing along the in-plane horizontal axis, meters.
    pub k_u: f64,
    /// Spacing along the in-plane vertical axis, meters.
    pub k_v: f64,
    /// Depth at which the projected grid matches the regular grid, meters.
    pub reference_depth: f64,
}

/// Computes the grid spacings for a reference depth: `k = dilation * Z_p / f`.
pub fn scale_factors(
    spec: &ConvSpec,
    reference_depth: f64,
    k: &CameraIntrinsics,
) -> Result<ScaleFactors> {
    if !reference_depth.is_finite() || reference_depth <= 0.0 {
        return Err(Error::domain(format!(
            "reference depth must be positive and finite, got {reference_depth}"
        )));
    }
    let d = spec.dilation as f64;
    Ok(ScaleFactors {
        k_u: d * reference_depth / k.f_u,
        k_v: d * reference_depth / k.f_v,
        reference_depth,
    })
}

/// The metric grid on the fitted plane: `P0 + a*x' + b*y'` with
/// `a` in `k_u * {-(N-1)/2, ..., (N-1)/2}` over columns and `b` in
/// `k_v * {...}` over rows, in the raster order of the regular grid.
pub fn planar_grid(
    p0: Point3,
    basis: &PlaneBasis,
    sf: &ScaleFactors,
    spec: &ConvSpec,
) -> Vec<Point3> {
    let half = (spec.kernel_size as i64 - 1) / 2;
    let mut points = Vec::with_capacity(spec.tap_count());
    for ri in -half..=half {
        let b = ri as f64 * sf.k_v;
        for ci in -half..=half {
            let a = ci as f64 * sf.k_u;
            points.push(Point3::new(
                p0.x + a * basis.x_axis[0] + b * basis.y_axis[0],
                p0.y + a * basis.x_axis[1] + b * basis.y_axis[1],
                p0.z + a * basis.x_axis[2] + b * basis.y_axis[2],
            ));
        }
    }
    points
}

/// Per-output-location fractional sampling displacements.
///
/// Channel-major layout of shape `(2*N*N) x height x width`: channel
/// `2n` holds the row offset and `2n + 1` the column offset of tap `n`,
/// taps in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField {
    taps: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl OffsetField {
    pub fn zeros(taps: usize, height: usize, width: usize) -> Self {
        assert!(taps >= 1, "offset field needs at least one tap");
        Self {
            taps,
            height,
            width,
            values: vec![0.0; 2 * taps * height * width],
        }
    }

    /// Rebuilds a field from its serialized layout.
    pub fn from_values(
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if channels == 0 || channels % 2 != 0 {
            return Err(Error::shape(format!(
                "offset channel count must be even and positive, got {channels}"
            )));
        }
        if values.len() != channels * height * width {
            return Err(Error::shape(format!(
                "offset field {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite offset value {bad}")));
        }
        Ok(Self {
            taps: channels / 2,
            height,
            width,
            values,
        })
    }

    pub fn tap_count(&self) -> usize {
        self.taps
    }

    pub fn channels(&self) -> usize {
        2 * self.taps
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn index(&self, channel: usize, i: usize, j: usize) -> usize {
        (channel * self.height + i) * self.width + j
    }

    /// Row displacement of tap `n` at output location `(i, j)`.
    #[inline]
    pub fn row_offset(&self, n: usize, i: usize, j: usize) -> f64 {
        self.values[self.index(2 * n, i, j)]
    }

    /// Column displacement of tap `n` at output location `(i, j)`.
    #[inline]
    pub fn col_offset(&self, n: usize, i: usize, j: usize) -> f64 {
        self.values[self.index(2 * n + 1, i, j)]
    }

    pub fn set(&mut self, n: usize, i: usize, j: usize, row: f64, col: f64) {
        let ri = self.index(2 * n, i, j);
        self.values[ri] = row;
        let ci = self.index(2 * n + 1, i, j);
        self.values[ci] = col;
    }

    /// Largest absolute displacement in the field.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Checks the channel count against a convolution spec.
    pub fn check_spec(&self, spec: &ConvSpec) -> Result<()> {
        if self.channels() != spec.offset_channels() {
            return Err(Error::shape(format!(
                "offset field has {} channels but a {0}x{0} kernel needs {1}",
                spec.kernel_size,
                spec.offset_channels(),
            )));
        }
        Ok(())
    }
}

/// Fitted-plane diagnostics for one output location.
#[derive(Debug, Clone)]
pub struct PlaneFit {
    pub normal: PlaneNormal,
    pub anchor: Point3,
    pub basis: PlaneBasis,
    /// The metric grid on the plane, one point per tap in raster order.
    pub grid: Vec<Point3>,
}

/// Adapted sampling pattern of one output location.
#[derive(Debug, Clone)]
pub struct LocationAdaptation {
    /// Unclamped (row, col) of the window center in input pixels.
    pub center: (i64, i64),
    /// Absolute sampling positions, one per tap in raster order.
    pub taps: Vec<Pixel>,
    /// (row, col) displacements from the regular taps.
    pub offsets: Vec<(f64, f64)>,
    /// `None` when the location fell back to the regular grid.
    pub fit: Option<PlaneFit>,
}

fn regular_fallback(center: (i64, i64), grid: &[(i64, i64)]) -> LocationAdaptation {
    let taps = grid
        .iter()
        .map(|&(dr, dc)| Pixel::new((center.1 + dc) as f64, (center.0 + dr) as f64))
        .collect();
    LocationAdaptation {
        center,
        taps,
        offsets: vec![(0.0, 0.0); grid.len()],
        fit: None,
    }
}

/// Adapts one window. Footprint depths are read with border clamping while
/// back-projection keeps the unclamped pixel coordinates, so a constant map
/// degenerates to the regular grid everywhere, borders included. Falls back
/// to zero offsets when the anchor depth is invalid, fewer than 3 footprint
/// samples are valid, the fit degenerates, or a grid point leaves the
/// visible half-space.
fn adapt_window(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    sf: &ScaleFactors,
    spec: &ConvSpec,
    grid: &[(i64, i64)],
    center: (i64, i64),
) -> LocationAdaptation {
    let (cr, cc) = center;
    let anchor_depth = depth.at_clamped(cr, cc);
    if !DepthMap::is_valid(anchor_depth) {
        return regular_fallback(center, grid);
    }
    let anchor = back_project(Pixel::new(cc as f64, cr as f64), anchor_depth, k)
        .expect("anchor depth validated");

    let mut samples = Vec::with_capacity(grid.len());
    for &(dr, dc) in grid {
        let z = depth.at_clamped(cr + dr, cc + dc);
        if DepthMap::is_valid(z) {
            let p = back_project(Pixel::new((cc + dc) as f64, (cr + dr) as f64), z, k)
                .expect("footprint depth validated");
            samples.push(p);
        }
    }
    if samples.len() < 3 {
        return regular_fallback(center, grid);
    }
    let normal = match fit_plane_normal(&samples, anchor) {
        Ok(n) => n,
        Err(_) => return regular_fallback(center, grid),
    };
    let basis = plane_basis(&normal).unwrap_or_else(PlaneBasis::axis_aligned_fallback);
    let grid3d = planar_grid(anchor, &basis, sf, spec);
    if grid3d.iter().any(|p| p.z <= 0.0) {
        return regular_fallback(center, grid);
    }

    let mut taps = Vec::with_capacity(grid.len());
    let mut offsets = Vec::with_capacity(grid.len());
    for (point, &(dr, dc)) in grid3d.iter().zip(grid) {
        let px = project(*point, k).expect("grid depth checked positive");
        offsets.push((px.v - (cr + dr) as f64, px.u - (cc + dc) as f64));
        taps.push(px);
    }
    LocationAdaptation {
        center,
        taps,
        offsets,
        fit: Some(PlaneFit {
            normal,
            anchor,
            basis,
            grid: grid3d,
        }),
    }
}

fn resolve_reference_depth(depth: &DepthMap, reference: Option<f64>) -> Result<f64> {
    let mean = depth
        .mean_valid()
        .ok_or_else(|| Error::domain("depth map has no valid entries"))?;
    match reference {
        None => Ok(mean),
        Some(z) if z.is_finite() && z > 0.0 => Ok(z),
        Some(z) => Err(Error::domain(format!(
            "reference depth must be positive and finite, got {z}"
        ))),
    }
}

/// Computes the full offset field for `depth` under `spec`.
///
/// `reference_depth` overrides the default reference (the mean of the
/// valid depth entries), which is the depth where offsets vanish on
/// fronto-parallel surfaces.
pub fn compute_offset_field(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    spec: &ConvSpec,
    reference_depth: Option<f64>,
) -> Result<OffsetField> {
    let (h1, w1) = spec.output_dims(depth.height(), depth.width())?;
    let zp = resolve_reference_depth(depth, reference_depth)?;
    let sf = scale_factors(spec, zp, k)?;
    let grid = spec.regular_grid();

    let mut field = OffsetField::zeros(spec.tap_count(), h1, w1);
    for i in 0..h1 {
        for j in 0..w1 {
            let adapted = adapt_window(depth, k, &sf, spec, &grid, spec.window_center(i, j));
            for (n, &(dr, dc)) in adapted.offsets.iter().enumerate() {
                field.set(n, i, j, dr, dc);
            }
        }
    }
    Ok(field)
}

/// Diagnostics for a single output location: the adapted taps together with
/// the fitted plane, computed exactly as [`compute_offset_field`] does.
pub fn adapt_location(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    spec: &ConvSpec,
    reference_depth: Option<f64>,
    i: usize,
    j: usize,
) -> Result<LocationAdaptation> {
    let (h1, w1) = spec.output_dims(depth.height(), depth.width())?;
    if i >= h1 || j >= w1 {
        return Err(Error::domain(format!(
            "output location ({i}, {j}) outside {h1}x{w1} output"
        )));
    }
    let zp = resolve_reference_depth(depth, reference_depth)?;
    let sf = scale_factors(spec, zp, k)?;
    let grid = spec.regular_grid();
    Ok(adapt_window(depth, k, &sf, spec, &grid, spec.window_center(i, j)))
}
