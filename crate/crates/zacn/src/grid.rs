//! Convolution window geometry: kernel size, dilation, stride, padding, and
//! the regular tap grid they induce on the input.

use crate::error::{Error, Result};

/// Geometry of a square convolution window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    /// Kernel side length `N`; must be odd.
    pub kernel_size: usize,
    /// Spacing between taps, in pixels.
    pub dilation: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn new(kernel_size: usize, dilation: usize, stride: usize, padding: usize) -> Result<Self> {
        if kernel_size == 0 || kernel_size % 2 == 0 {
            return Err(Error::domain(format!(
                "kernel size must be odd and positive, got {kernel_size}"
            )));
        }
        if dilation == 0 {
            return Err(Error::domain("dilation must be at least 1"));
        }
        if stride == 0 {
            return Err(Error::domain("stride must be at least 1"));
        }
        Ok(Self {
            kernel_size,
            dilation,
            stride,
            padding,
        })
    }

    /// Number of taps in the window (`N*N`).
    pub fn tap_count(&self) -> usize {
        self.kernel_size * self.kernel_size
    }

    /// Offset-field channel count: one (row, col) pair per tap.
    pub fn offset_channels(&self) -> usize {
        2 * self.tap_count()
    }

    /// Pixel span of the dilated window.
    pub fn kernel_extent(&self) -> usize {
        self.dilation * (self.kernel_size - 1) + 1
    }

    /// Displacement from the window's first tap to its center tap.
    pub fn center_offset(&self) -> i64 {
        (self.dilation * (self.kernel_size - 1) / 2) as i64
    }

    /// Integer (row, col) tap displacements around the window center, in
    /// raster order; the middle entry is always `(0, 0)`.
    pub fn regular_grid(&self) -> Vec<(i64, i64)> {
        let half = (self.kernel_size as i64 - 1) / 2;
        let d = self.dilation as i64;
        let mut taps = Vec::with_capacity(self.tap_count());
        for dr in -half..=half {
            for dc in -half..=half {
                taps.push((d * dr, d * dc));
            }
        }
        taps
    }

    /// Spatial size of the output for an `height x width` input.
    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let extent = self.kernel_extent();
        let h_padded = height + 2 * self.padding;
        let w_padded = width + 2 * self.padding;
        if h_padded < extent || w_padded < extent {
            return Err(Error::domain(format!(
                "input {height}x{width} with padding {} is smaller than the {extent}x{extent} kernel footprint",
                self.padding
            )));
        }
        Ok((
            (h_padded - extent) / self.stride + 1,
            (w_padded - extent) / self.stride + 1,
        ))
    }

    /// Input-pixel (row, col) of the window center for output location `(i, j)`.
    pub fn window_center(&self, i: usize, j: usize) -> (i64, i64) {
        let c = self.center_offset() - self.padding as i64;
        (i as i64 * self.stride as i64 + c, j as i64 * self.stride as i64 + c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_by_three_unit_dilation() {
        let spec = ConvSpec::new(3, 1, 1, 0).unwrap();
        let taps = spec.regular_grid();
        assert_eq!(taps.len(), 9);
        assert_eq!(
            taps,
            vec![
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 0),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1)
            ]
        );
    }

    #[test]
    fn degenerate_one_by_one() {
        let spec = ConvSpec::new(1, 1, 1, 0).unwrap();
        assert_eq!(spec.regular_grid(), vec![(0, 0)]);
    }

    #[test]
    fn dilation_scales_corner_tap() {
        let spec = ConvSpec::new(3, 2, 1, 0).unwrap();
        assert_eq!(spec.regular_grid()[0], (-2, -2));
        assert_eq!(spec.regular_grid()[8], (2, 2));
    }

    #[test]
    fn center_tap_is_origin() {
        for n in [1usize, 3, 5, 7] {
            for d in [1usize, 2, 3] {
                let spec = ConvSpec::new(n, d, 1, 0).unwrap();
                let taps = spec.regular_grid();
                assert_eq!(taps[taps.len() / 2], (0, 0));
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ConvSpec::new(2, 1, 1, 0).is_err());
        assert!(ConvSpec::new(0, 1, 1, 0).is_err());
        assert!(ConvSpec::new(3, 0, 1, 0).is_err());
        assert!(ConvSpec::new(3, 1, 0, 0).is_err());
    }

    #[test]
    fn output_dims_match_standard_formula() {
        let spec = ConvSpec::new(3, 1, 1, 1).unwrap();
        assert_eq!(spec.output_dims(8, 10).unwrap(), (8, 10));

        let spec = ConvSpec::new(3, 2, 2, 0).unwrap();
        // extent 5: floor((8 - 5)/2) + 1 = 2, floor((11 - 5)/2) + 1 = 4
        assert_eq!(spec.output_dims(8, 11).unwrap(), (2, 4));

        let spec = ConvSpec::new(5, 2, 1, 0).unwrap();
        assert!(spec.output_dims(8, 8).is_err());
    }

    #[test]
    fn window_center_tracks_stride_and_padding() {
        let spec = ConvSpec::new(3, 1, 2, 1).unwrap();
        assert_eq!(spec.window_center(0, 0), (0, 0));
        assert_eq!(spec.window_center(1, 2), (2, 4));

        let spec = ConvSpec::new(3, 2, 1, 0).unwrap();
        assert_eq!(spec.window_center(0, 0), (2, 2));
    }
}
