use serde::{Deserialize, Serialize};

use crate::render::RenderError;
use crate::splat::{Quat, Vec3};

/// Pinhole camera looking down its local -z axis with +y up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraSpec", into = "CameraSpec")]
pub struct Camera {
    pub position: Vec3,
    /// Camera-to-world rotation.
    pub rotation: Quat,
    /// Vertical field of view in radians.
    pub fov_y: f32,
    pub width: u32,
    pub height: u32,
    pub near: f32,
    pub far: f32,
}

pub const DEFAULT_SNAPSHOT_SIZE: u32 = 512;
pub const DEFAULT_FOV_Y: f32 = std::f32::consts::FRAC_PI_3;

impl Default for Camera {
    fn default() -> Self {
        Camera {
            position: Vec3::ZERO,
            rotation: Quat::IDENTITY,
            fov_y: DEFAULT_FOV_Y,
            width: DEFAULT_SNAPSHOT_SIZE,
            height: DEFAULT_SNAPSHOT_SIZE,
            near: 0.05,
            far: 100.0,
        }
    }
}

impl Camera {
    pub fn look_at(position: Vec3, target: Vec3, width: u32, height: u32) -> Camera {
        Camera {
            position,
            rotation: Quat::look_at(position, target, Vec3::new(0.0, 1.0, 0.0)),
            width,
            height,
            ..Camera::default()
        }
    }

    pub fn with_size(mut self, width: u32, height: u32) -> Camera {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let fov_ok = self.fov_y > 0.0 && (self.fov_y as f64) < std::f64::consts::PI;
        let ok = fov_ok
            && self.near > 0.0
            && self.far > self.near
            && self.far.is_finite()
            && self.width > 0
            && self.height > 0
            && self.position.is_finite()
            && self.rotation.is_unit();
        if ok {
            Ok(())
        } else {
            Err(RenderError::InvalidCamera)
        }
    }

    /// Focal length in pixels (square pixels).
    pub fn focal_px(&self) -> f64 {
        (self.height as f64 * 0.5) / (self.fov_y as f64 * 0.5).tan()
    }

    pub(crate) fn frame(&self) -> CameraFrame {
        let r = self.rotation.to_mat3();
        CameraFrame {
            origin: self.position.to_f64(),
            world_to_cam: r.transpose().0,
            cam_to_world: r.0,
            focal: self.focal_px(),
            cx: self.width as f64 * 0.5,
            cy: self.height as f64 * 0.5,
        }
    }
}

/// Precomputed camera basis in `f64`.
pub(crate) struct CameraFrame {
    pub origin: [f64; 3],
    pub world_to_cam: [[f64; 3]; 3],
    pub cam_to_world: [[f64; 3]; 3],
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraFrame {
    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1], p[2] - self.origin[2]];
        let m = &self.world_to_cam;
        [
            m[0][0] * d[0] + m[0][1] * d[1] + m[0][2] * d[2],
            m[1][0] * d[0] + m[1][1] * d[1] + m[1][2] * d[2],
            m[2][0] * d[0] + m[2][1] * d[1] + m[2][2] * d[2],
        ]
    }

    /// Unit world-space ray direction through the pixel position `(u, v)`
    /// and the cosine between it and the view axis.
    pub fn ray(&self, u: f64, v: f64) -> ([f64; 3], f64) {
        let local = [(u - self.cx) / self.focal, -(v - self.cy) / self.focal, -1.0];
        let n = (local[0] * local[0] + local[1] * local[1] + 1.0).sqrt();
        let l = [local[0] / n, local[1] / n, local[2] / n];
        let m = &self.cam_to_world;
        let d = [
            m[0][0] * l[0] + m[0][1] * l[1] + m[0][2] * l[2],
            m[1][0] * l[0] + m[1][1] * l[1] + m[1][2] * l[2],
            m[2][0] * l[0] + m[2][1] * l[1] + m[2][2] * l[2],
        ];
        (d, 1.0 / n)
    }

    pub fn forward(&self) -> [f64; 3] {
        let m = &self.cam_to_world;
        [-m[0][2], -m[1][2], -m[2][2]]
    }
}

#[derive(Serialize, Deserialize)]
struct CameraSpec {
    position: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<Quat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<Vec3>,
    #[serde(default = "default_fov")]
    fov_y: f32,
    #[serde(default = "default_size")]
    width: u32,
    #[serde(default = "default_size")]
    height: u32,
    #[serde(default = "default_near")]
    near: f32,
    #[serde(default = "default_far")]
    far: f32,
}

fn default_fov() -> f32 {
    DEFAULT_FOV_Y
}
fn default_size() -> u32 {
    DEFAULT_SNAPSHOT_SIZE
}
fn default_near() -> f32 {
    0.05
}
fn default_far() -> f32 {
    100.0
}

impl TryFrom<CameraSpec> for Camera {
    type Error = String;

    fn try_from(s: CameraSpec) -> Result<Self, Self::Error> {
        let rotation = match (s.rotation, s.target) {
            (Some(r), None) => r,
            (None, Some(t)) => Quat::look_at(s.position, t, Vec3::new(0.0, 1.0, 0.0)),
            (None, None) => Quat::IDENTITY,
            (Some(_), Some(_)) => return Err("camera takes either rotation or target, not both".into()),
        };
        let cam = Camera {
            position: s.position,
            rotation,
            fov_y: s.fov_y,
            width: s.width,
            height: s.height,
            near: s.near,
            far: s.far,
        };
        cam.validate().map_err(|e| e.to_string())?;
        Ok(cam)
    }
}

impl From<Camera> for CameraSpec {
    fn from(c: Camera) -> Self {
        CameraSpec {
            position: c.position,
            rotation: Some(c.rotation),
            target: None,
            fov_y: c.fov_y,
            width: c.width,
            height: c.height,
            near: c.near,
            far: c.far,
        }
    }
}
