use crate::splat::{GaussianSplat, Mat3, TransformTRS, SH_C0};

use super::camera::Camera;
use super::surfaces::SurfaceBuffer;
use super::{LinearImage, RenderSettings, RenderTarget};

/// Screen-space Gaussian produced by projecting one splat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatFootprint {
    /// Pixel coordinates; pixel `(x, y)` has its center at `(x + 0.5, y + 0.5)`.
    pub mean2d: [f64; 2],
    /// Symmetric 2×2 covariance in px², stored as `[xx, xy, yy]`.
    pub cov2d: [f64; 3],
    /// View-space depth in meters.
    pub depth: f64,
    pub color: [f64; 3],
    pub alpha_max: f64,
}

impl SplatFootprint {
    fn inverse_cov(&self) -> Option<[f64; 3]> {
        let [a, b, c] = self.cov2d;
        let det = a * c - b * b;
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        Some([c / det, -b / det, a / det])
    }

    /// Alpha at a pixel center before the skip threshold.
    pub fn alpha_at(&self, px: f64, py: f64) -> f64 {
        let Some([ia, ib, ic]) = self.inverse_cov() else {
            return 0.0;
        };
        let dx = px - self.mean2d[0];
        let dy = py - self.mean2d[1];
        let q = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy;
        self.alpha_max * (-0.5 * q).exp()
    }
}

pub fn project_splat(cam: &Camera, splat: &GaussianSplat, object_transform: &TransformTRS) -> Option<SplatFootprint> {
    project_splat_with(cam, splat, object_transform, RenderSettings::default().low_pass)
}

/// Perspective projection with the affine (EWA) approximation of the
/// covariance at the mean. Returns `None` outside `[near, far]`.
pub fn project_splat_with(
    cam: &Camera,
    splat: &GaussianSplat,
    object_transform: &TransformTRS,
    low_pass: f64,
) -> Option<SplatFootprint> {
    let frame = cam.frame();
    let world = object_transform.apply_point_f64(splat.position.to_f64());
    let [x, y, z] = frame.to_camera(world);
    let depth = -z;
    if !(depth >= cam.near as f64 && depth <= cam.far as f64) {
        return None;
    }

    let s = object_transform.scale as f64;
    let rot = object_transform.rotation.to_mat3() * splat.rotation.to_mat3();
    let ls = splat.log_scale.to_f64();
    let var = Mat3::diag([(2.0 * ls[0]).exp(), (2.0 * ls[1]).exp(), (2.0 * ls[2]).exp()]);
    let sigma_world = (rot * var * rot.transpose()).scale(s * s);
    let w = Mat3(frame.world_to_cam);
    let sigma_cam = w * sigma_world * w.transpose();

    let f = frame.focal;
    let j = [[f / depth, 0.0, f * x / (depth * depth)], [0.0, -f / depth, -f * y / (depth * depth)]];
    let m = &sigma_cam.0;
    // cov2d = J Σ Jᵀ
    let mut js = [[0.0; 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            js[r][c] = j[r][0] * m[0][c] + j[r][1] * m[1][c] + j[r][2] * m[2][c];
        }
    }
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let xx = dot(&js[0], &j[0]) + low_pass;
    let xy = dot(&js[0], &j[1]);
    let yy = dot(&js[1], &j[1]) + low_pass;

    let color = splat.color_dc.map(|c| (0.5 + SH_C0 * c as f64).clamp(0.0, 1.0));
    Some(SplatFootprint {
        mean2d: [frame.cx + f * x / depth, frame.cy - f * y / depth],
        cov2d: [xx, xy, yy],
        depth,
        color,
        alpha_max: splat.opacity(),
    })
}

pub fn render_splats(cam: &Camera, footprints: &[SplatFootprint]) -> RenderTarget {
    render_splats_linear(cam, footprints, &RenderSettings::default()).quantize()
}

pub fn render_splats_linear(cam: &Camera, footprints: &[SplatFootprint], settings: &RenderSettings) -> LinearImage {
    composite(cam.width, cam.height, footprints, settings, None)
}

/// Front-to-back compositing of depth-sorted footprints (ties keep input
/// order). With `surface`, splats at or behind the surface depth of a pixel
/// are dropped and the surface is the layer behind the remaining ones.
pub fn composite(
    width: u32,
    height: u32,
    footprints: &[SplatFootprint],
    settings: &RenderSettings,
    surface: Option<&SurfaceBuffer>,
) -> LinearImage {
    let n = width as usize * height as usize;
    let mut color = vec![[0.0f64; 3]; n];
    let mut trans = vec![1.0f64; n];
    let mut depth_acc = vec![0.0f64; n];
    let mut weight = vec![0.0f64; n];
    let mut done = vec![false; n];

    let mut order: Vec<usize> = (0..footprints.len()).collect();
    order.sort_by(|&a, &b| footprints[a].depth.total_cmp(&footprints[b].depth));

    for &k in &order {
        let fp = &footprints[k];
        let Some([ia, ib, ic]) = fp.inverse_cov() else {
            continue;
        };
        if !(fp.alpha_max >= settings.alpha_skip) {
            continue;
        }
        // Outside the level set q = q_max the alpha is below the skip threshold.
        let q_max = 2.0 * (fp.alpha_max / settings.alpha_skip).ln();
        let ex = (q_max * fp.cov2d[0]).sqrt() + 1.0;
        let ey = (q_max * fp.cov2d[2]).sqrt() + 1.0;
        let x0 = ((fp.mean2d[0] - ex - 0.5).floor().max(0.0)) as i64;
        let x1 = ((fp.mean2d[0] + ex - 0.5).ceil()).min(width as f64 - 1.0) as i64;
        let y0 = ((fp.mean2d[1] - ey - 0.5).floor().max(0.0)) as i64;
        let y1 = ((fp.mean2d[1] + ey - 0.5).ceil()).min(height as f64 - 1.0) as i64;
        for py in y0..=y1 {
            for px in x0..=x1 {
                let i = py as usize * width as usize + px as usize;
                if done[i] {
                    continue;
                }
                if let Some(s) = surface {
                    if fp.depth >= s.depth[i] {
                        continue;
                    }
                }
                let dx = px as f64 + 0.5 - fp.mean2d[0];
                let dy = py as f64 + 0.5 - fp.mean2d[1];
                let q = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy;
                let alpha = fp.alpha_max * (-0.5 * q).exp();
                if alpha < settings.alpha_skip {
                    continue;
                }
                let w = alpha * trans[i];
                for c in 0..3 {
                    color[i][c] += fp.color[c] * w;
                }
                depth_acc[i] += fp.depth * w;
                weight[i] += w;
                trans[i] *= 1.0 - alpha;
                if trans[i] < settings.transmittance_cutoff {
                    done[i] = true;
                }
            }
        }
    }

    let mut depth = vec![f64::INFINITY; n];
    for i in 0..n {
        let t = trans[i];
        match surface.filter(|s| s.depth[i].is_finite()) {
            Some(s) => {
                for c in 0..3 {
                    color[i][c] += t * s.color[i][c];
                }
                depth[i] = (depth_acc[i] + t * s.depth[i]) / (weight[i] + t);
            }
            None => {
                for c in 0..3 {
                    color[i][c] += t * settings.background[c];
                }
                if weight[i] >= settings.depth_weight_floor {
                    depth[i] = depth_acc[i] / weight[i];
                }
            }
        }
    }
    LinearImage {
        width,
        height,
        color,
        depth,
    }
}
