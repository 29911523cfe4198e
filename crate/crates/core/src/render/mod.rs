//! Deterministic CPU renderer: splat compositing, analytic primitives,
//! triangle meshes and billboards, merged per pixel by depth.

mod camera;
mod snapshot;
mod splats;
mod surfaces;

use thiserror::Error;

use crate::assets::{AssetError, AssetId};
use crate::image::{DepthMap, RgbImage};

pub use camera::{Camera, DEFAULT_FOV_Y, DEFAULT_SNAPSHOT_SIZE};
pub use snapshot::{compose_snapshot, compose_snapshot_with};
pub use splats::{composite, project_splat, project_splat_with, render_splats, render_splats_linear, SplatFootprint};
pub use surfaces::{
    intersect_primitive, render_primitives, render_surfaces, Billboard, SurfaceBuffer, SurfaceSet, ALBEDO,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("camera parameters are invalid")]
    InvalidCamera,
    #[error("asset {0} is missing")]
    MissingAsset(AssetId),
    #[error(transparent)]
    Asset(#[from] AssetError),
}

/// Compositing constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    /// Added to both diagonal entries of every 2D covariance, in px².
    pub low_pass: f64,
    /// Per-footprint alphas below this are skipped.
    pub alpha_skip: f64,
    /// A pixel stops accumulating once its transmittance drops below this.
    pub transmittance_cutoff: f64,
    /// Accumulated weight below which the depth output is "empty".
    pub depth_weight_floor: f64,
    pub background: [f64; 3],
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            low_pass: 0.3,
            alpha_skip: 1.0 / 255.0,
            transmittance_cutoff: 1e-4,
            depth_weight_floor: 1e-6,
            background: [0.0; 3],
        }
    }
}

/// Unquantized render output. Depth is `f64::INFINITY` where empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    pub width: u32,
    pub height: u32,
    pub color: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
}

impl LinearImage {
    pub fn at(&self, x: u32, y: u32) -> ([f64; 3], f64) {
        let i = y as usize * self.width as usize + x as usize;
        (self.color[i], self.depth[i])
    }

    pub fn quantize(&self) -> RenderTarget {
        let mut color = RgbImage::new(self.width, self.height);
        for (px, c) in color.data.chunks_exact_mut(3).zip(&self.color) {
            for k in 0..3 {
                px[k] = quantize_channel(c[k]);
            }
        }
        RenderTarget {
            color,
            depth: DepthMap {
                width: self.width,
                height: self.height,
                data: self.depth.iter().map(|&d| d as f32).collect(),
            },
        }
    }
}

pub fn quantize_channel(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Color plus view-space depth.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderTarget {
    pub color: RgbImage,
    pub depth: DepthMap,
}

impl RenderTarget {
    pub fn width(&self) -> u32 {
        self.color.width
    }

    pub fn height(&self) -> u32 {
        self.color.height
    }
}
