//! Depth-adapted convolution toolkit.
//!
//! A depth map and pinhole intrinsics turn the regular sampling grid of a
//! 2D convolution into a geometry-aware one: each output location gets a
//! local least-squares plane fitted to its back-projected footprint, a
//! metric grid laid out on that plane, and the grid's image projection as
//! fractional sampling offsets. The offsets feed a deformable convolution
//! with bilinear sampling and exact gradients for weights and input (the
//! offsets themselves are not learned). On constant depth the offsets
//! vanish and everything reduces to a standard dilated convolution.
//!
//! The crate also ships a synthetic RGB-D segmentation benchmark: scene
//! generator, a small trainable network, and the usual segmentation
//! metrics (accuracy, mean accuracy, mIoU, frequency-weighted IoU).

pub mod camera;
pub mod conv;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod net;
pub mod offset;
pub mod plane;
pub mod scene;
pub mod tensor;

pub use camera::{back_project, project, CameraIntrinsics, Pixel, Point3};
pub use error::{Error, Result};
pub use grid::ConvSpec;
pub use io::DepthMap;
pub use metrics::{evaluate, ConfusionMatrix, LabelMap, MetricsReport};
pub use offset::{
    adapt_location, compute_offset_field, planar_grid, scale_factors, LocationAdaptation,
    OffsetField, ScaleFactors,
};
pub use plane::{fit_plane_normal, plane_basis, PlaneBasis, PlaneNormal};
pub use tensor::Tensor;
