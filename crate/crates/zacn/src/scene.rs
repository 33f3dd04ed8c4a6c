//! Synthetic RGB-D scenes for the toy segmentation benchmark: a tilted
//! ground plane, a fronto-parallel back wall, and a box resting on the
//! ground. Depth is rendered analytically from the surface geometry.
//!
//! The wall and the box share the same base color, so color alone cannot
//! separate them; the box sits much nearer than the mean scene depth, which
//! makes its depth-adapted receptive fields reach past its silhouette.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::camera::{CameraIntrinsics, Point3};
use crate::io::DepthMap;
use crate::metrics::LabelMap;
use crate::tensor::Tensor;

pub const CLASS_GROUND: u8 = 0;
pub const CLASS_WALL: u8 = 1;
pub const CLASS_BOX: u8 = 2;
pub const NUM_CLASSES: usize = 3;

const GROUND_COLOR: [f64; 3] = [0.2, 0.5, 0.25];
const WALL_COLOR: [f64; 3] = [0.55, 0.55, 0.6];
// Deliberately identical to the wall: geometry is the only cue.
const BOX_COLOR: [f64; 3] = WALL_COLOR;
const NOISE_AMPLITUDE: f64 = 0.08;

/// One synthetic RGB-D sample with per-pixel class labels.
#[derive(Debug, Clone)]
pub struct Scene {
    /// `3 x H x W` color image in `[0, 1]`.
    pub rgb: Tensor,
    /// `H x W` metric depth, positive everywhere.
    pub depth: DepthMap,
    /// `H x W` class indices.
    pub labels: LabelMap,
}

/// Analytic surface parameters behind a generated scene.
#[derive(Debug, Clone, Copy)]
pub struct SceneGeometry {
    /// Ground-plane tilt (radians away from fronto-parallel around X).
    pub ground_alpha: f64,
    /// Ground-plane Y intercept at Z = 0 (camera height, meters).
    pub ground_y0: f64,
    /// Back-wall depth, meters.
    pub wall_z: f64,
    /// Box front-face depth, meters.
    pub box_z: f64,
    /// Box horizontal extent `[x0, x1]`, meters.
    pub box_x: (f64, f64),
    /// Box vertical extent `[y_top, y_bottom]`, meters.
    pub box_y: (f64, f64),
}

impl SceneGeometry {
    /// Signed metric distance of a point from the ground plane
    /// `cos(a)*(Y - y0) - sin(a)*Z = 0`.
    pub fn ground_plane_distance(&self, p: Point3) -> f64 {
        self.ground_alpha.cos() * (p.y - self.ground_y0) - self.ground_alpha.sin() * p.z
    }
}

/// Camera used for all toy scenes: focal length equal to the image width,
/// principal point at the image center.
pub fn toy_camera(height: usize, width: usize) -> CameraIntrinsics {
    CameraIntrinsics::new(
        width as f64,
        width as f64,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
    )
    .expect("static toy intrinsics are valid")
}

/// Deterministically generates a scene for `seed`.
pub fn generate_scene(seed: u64, k: &CameraIntrinsics, height: usize, width: usize) -> Scene {
    generate_scene_with_geometry(seed, k, height, width).0
}

/// Scene plus the analytic geometry it was rendered from.
pub fn generate_scene_with_geometry(
    seed: u64,
    k: &CameraIntrinsics,
    height: usize,
    width: usize,
) -> (Scene, SceneGeometry) {
    assert!(height >= 16 && width >= 16, "scenes need at least 16x16 pixels");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let ground_alpha = rng.random_range(5.0f64..9.0).to_radians();
    let ground_y0 = rng.random_range(0.4..0.6);
    let wall_z = rng.random_range(3.2..4.4);
    let box_z = rng.random_range(1.2..1.7);
    let box_w = rng.random_range(0.35..0.55);
    let box_h = rng.random_range(0.3..0.45);
    let box_cx = rng.random_range(-0.3..0.3);

    let tan_alpha = ground_alpha.tan();
    let y_bottom = ground_y0 + tan_alpha * box_z;
    let geometry = SceneGeometry {
        ground_alpha,
        ground_y0,
        wall_z,
        box_z,
        box_x: (box_cx - box_w / 2.0, box_cx + box_w / 2.0),
        box_y: (y_bottom - box_h, y_bottom),
    };

    let mut depth_values = Vec::with_capacity(height * width);
    let mut label_values = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let rx = (c as f64 - k.c_u) / k.f_u;
            let ry = (r as f64 - k.c_v) / k.f_v;

            let in_box = {
                let x = rx * geometry.box_z;
                let y = ry * geometry.box_z;
                x >= geometry.box_x.0
                    && x <= geometry.box_x.1
                    && y >= geometry.box_y.0
                    && y <= geometry.box_y.1
            };
            let ground_z = {
                let denom = ry - tan_alpha;
                (denom > 1e-9).then(|| ground_y0 / denom)
            };

            let (z, label) = if in_box {
                (geometry.box_z, CLASS_BOX)
            } else {
                match ground_z {
                    Some(zg) if zg <= wall_z => (zg, CLASS_GROUND),
                    _ => (wall_z, CLASS_WALL),
                }
            };
            depth_values.push(z);
            label_values.push(label);
        }
    }

    let mut rgb_data = vec![0.0f64; 3 * height * width];
    for p in 0..height * width {
        let base = match label_values[p] {
            CLASS_GROUND => GROUND_COLOR,
            CLASS_WALL => WALL_COLOR,
            _ => BOX_COLOR,
        };
        for ch in 0..3 {
            let noise = rng.random_range(-NOISE_AMPLITUDE..NOISE_AMPLITUDE);
            rgb_data[ch * height * width + p] = (base[ch] + noise).clamp(0.0, 1.0);
        }
    }

    let scene = Scene {
        rgb: Tensor::new(vec![3, height, width], rgb_data).expect("finite rgb"),
        depth: DepthMap::new(height, width, depth_values).expect("sized depth"),
        labels: LabelMap::new(height, width, label_values).expect("sized labels"),
    };
    (scene, geometry)
}

/// Train/held-out scene sets for the standard benchmark. Scene seeds are
/// derived from `base_seed`; the held-out block never overlaps the
/// training block.
pub fn benchmark_scenes(
    base_seed: u64,
    n_train: usize,
    n_test: usize,
    height: usize,
    width: usize,
) -> (Vec<Scene>, Vec<Scene>) {
    let k = toy_camera(height, width);
    let train = (0..n_train)
        .map(|i| generate_scene(base_seed.wrapping_add(i as u64), &k, height, width))
        .collect();
    let test = (0..n_test)
        .map(|j| {
            generate_scene(
                base_seed.wrapping_add(1_000_000 + j as u64),
                &k,
                height,
                width,
            )
        })
        .collect();
    (train, test)
}
