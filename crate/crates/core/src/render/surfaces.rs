use crate::image::RgbImage;
use crate::mesh::{Primitive, Shape, TriMesh};
use crate::splat::math::{cross3, dot3, normalize3, sub3};
use crate::splat::{TransformTRS, Vec3};

use super::camera::{Camera, CameraFrame};
use super::{composite, LinearImage, RenderSettings, RenderTarget};

/// Light-gray albedo of primitives and meshes.
pub const ALBEDO: f64 = 0.8;
/// Color of billboards that have no image yet.
const PLACEHOLDER: [f64; 3] = [0.6, 0.6, 0.6];

/// Nearest opaque hit per pixel; depth is `f64::INFINITY` where nothing was hit.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceBuffer {
    pub width: u32,
    pub height: u32,
    pub color: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
}

impl SurfaceBuffer {
    pub fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            color: vec![[0.0; 3]; n],
            depth: vec![f64::INFINITY; n],
        }
    }

    fn offer(&mut self, i: usize, depth: f64, color: [f64; 3]) {
        if depth < self.depth[i] {
            self.depth[i] = depth;
            self.color[i] = color;
        }
    }
}

/// Camera-facing textured quad, centered at `center` with half-size `half`.
#[derive(Debug, Clone)]
pub struct Billboard {
    pub center: Vec3,
    pub half: f32,
    pub image: Option<RgbImage>,
}

/// Everything that renders as an opaque surface.
#[derive(Debug, Clone, Default)]
pub struct SurfaceSet {
    /// Primitives with their fully composed world transforms.
    pub primitives: Vec<Primitive>,
    /// World-space triangle meshes.
    pub meshes: Vec<TriMesh>,
    pub billboards: Vec<Billboard>,
}

impl SurfaceSet {
    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty() && self.meshes.is_empty() && self.billboards.is_empty()
    }
}

/// Ray hit against a primitive placed by `world`: distance along the unit
/// ray and the unit world normal.
pub fn intersect_primitive(shape: Shape, world: &TransformTRS, origin: [f64; 3], dir: [f64; 3]) -> Vec<(f64, [f64; 3])> {
    let r = world.rotation.to_mat3();
    let rt = r.transpose();
    let s = world.scale as f64;
    let rel = sub3(origin, world.translation.to_f64());
    let o = rt.mul_vec(rel).map(|v| v / s);
    let d = rt.mul_vec(dir).map(|v| v / s);
    let to_world = |n: [f64; 3]| normalize3(r.mul_vec(n));
    let mut hits = Vec::with_capacity(2);
    match shape {
        Shape::Sphere => {
            let a = dot3(d, d);
            let b = dot3(o, d);
            let c = dot3(o, o) - 1.0;
            let disc = b * b - a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                for t in [(-b - sq) / a, (-b + sq) / a] {
                    let p = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
                    hits.push((t, to_world(p)));
                }
            }
        }
        Shape::Cube => {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut n_near = [0.0; 3];
            let mut n_far = [0.0; 3];
            for axis in 0..3 {
                if d[axis] == 0.0 {
                    if o[axis].abs() > 1.0 {
                        return hits;
                    }
                    continue;
                }
                let mut t0 = (-1.0 - o[axis]) / d[axis];
                let mut t1 = (1.0 - o[axis]) / d[axis];
                let mut n0 = [0.0; 3];
                n0[axis] = -1.0;
                let mut n1 = [0.0; 3];
                n1[axis] = 1.0;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                    std::mem::swap(&mut n0, &mut n1);
                }
                if t0 > t_near {
                    t_near = t0;
                    n_near = n0;
                }
                if t1 < t_far {
                    t_far = t1;
                    n_far = n1;
                }
            }
            if t_near <= t_far {
                hits.push((t_near, to_world(n_near)));
                hits.push((t_far, to_world(n_far)));
            }
        }
        Shape::Cylinder => {
            let a = d[0] * d[0] + d[2] * d[2];
            if a > 0.0 {
                let b = o[0] * d[0] + o[2] * d[2];
                let c = o[0] * o[0] + o[2] * o[2] - 1.0;
                let disc = b * b - a * c;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    for t in [(-b - sq) / a, (-b + sq) / a] {
                        let y = o[1] + t * d[1];
                        if y.abs() <= 1.0 {
                            hits.push((t, to_world([o[0] + t * d[0], 0.0, o[2] + t * d[2]])));
                        }
                    }
                }
            }
            if d[1] != 0.0 {
                for cap in [-1.0f64, 1.0] {
                    let t = (cap - o[1]) / d[1];
                    let x = o[0] + t * d[0];
                    let z = o[2] + t * d[2];
                    if x * x + z * z <= 1.0 {
                        hits.push((t, to_world([0.0, cap, 0.0])));
                    }
                }
            }
        }
    }
    hits
}

fn shade(normal: [f64; 3], dir: [f64; 3]) -> [f64; 3] {
    let lambert = dot3(normal, dir).abs();
    [ALBEDO * lambert; 3]
}

/// Nearest hit of an arrangement whose primitives already carry world
/// transforms.
fn primitive_hit(prims: &[Primitive], origin: [f64; 3], dir: [f64; 3], cos: f64, near: f64, far: f64) -> Option<(f64, [f64; 3])> {
    let mut best: Option<(f64, [f64; 3])> = None;
    for p in prims {
        for (t, n) in intersect_primitive(p.shape, &p.transform, origin, dir) {
            let depth = t * cos;
            if depth >= near && depth <= far && best.is_none_or(|(d, _)| depth < d) {
                best = Some((depth, shade(n, dir)));
            }
        }
    }
    best
}

/// Rasterizes opaque surfaces for `cam`.
pub fn render_surfaces(cam: &Camera, set: &SurfaceSet) -> SurfaceBuffer {
    let frame = cam.frame();
    let (w, h) = (cam.width, cam.height);
    let (near, far) = (cam.near as f64, cam.far as f64);
    let mut buf = SurfaceBuffer::empty(w, h);

    if !set.primitives.is_empty() || !set.billboards.is_empty() {
        let right = {
            let m = &frame.cam_to_world;
            [m[0][0], m[1][0], m[2][0]]
        };
        let up = {
            let m = &frame.cam_to_world;
            [m[0][1], m[1][1], m[2][1]]
        };
        let fwd = frame.forward();
        for py in 0..h {
            for px in 0..w {
                let (dir, cos) = frame.ray(px as f64 + 0.5, py as f64 + 0.5);
                let i = py as usize * w as usize + px as usize;
                if let Some((depth, color)) = primitive_hit(&set.primitives, frame.origin, dir, cos, near, far) {
                    buf.offer(i, depth, color);
                }
                for bb in &set.billboards {
                    if let Some((depth, color)) = billboard_hit(bb, &frame, dir, cos, right, up, fwd) {
                        if depth >= near && depth <= far {
                            buf.offer(i, depth, color);
                        }
                    }
                }
            }
        }
    }

    for mesh in &set.meshes {
        rasterize_mesh(mesh, &frame, cam, &mut buf);
    }
    buf
}

fn billboard_hit(
    bb: &Billboard,
    frame: &CameraFrame,
    dir: [f64; 3],
    cos: f64,
    right: [f64; 3],
    up: [f64; 3],
    fwd: [f64; 3],
) -> Option<(f64, [f64; 3])> {
    let c = bb.center.to_f64();
    let denom = dot3(dir, fwd);
    if denom <= 0.0 {
        return None;
    }
    let t = dot3(sub3(c, frame.origin), fwd) / denom;
    if t <= 0.0 {
        return None;
    }
    let p = [frame.origin[0] + t * dir[0], frame.origin[1] + t * dir[1], frame.origin[2] + t * dir[2]];
    let rel = sub3(p, c);
    let half = bb.half as f64;
    let u = dot3(rel, right) / half;
    let v = dot3(rel, up) / half;
    if u.abs() > 1.0 || v.abs() > 1.0 {
        return None;
    }
    let color = match &bb.image {
        Some(img) if img.width > 0 && img.height > 0 => {
            let x = (((u + 1.0) * 0.5 * img.width as f64) as u32).min(img.width - 1);
            let y = (((1.0 - v) * 0.5 * img.height as f64) as u32).min(img.height - 1);
            img.get(x, y).map(|b| b as f64 / 255.0)
        }
        _ => PLACEHOLDER,
    };
    Some((t * cos, color))
}

/// Ray-triangle tests restricted to each triangle's screen bounding box.
fn rasterize_mesh(mesh: &TriMesh, frame: &CameraFrame, cam: &Camera, buf: &mut SurfaceBuffer) {
    let (w, h) = (cam.width as i64, cam.height as i64);
    let (near, far) = (cam.near as f64, cam.far as f64);
    let verts: Vec<[f64; 3]> = mesh.positions.iter().map(|p| p.to_f64()).collect();
    for face in &mesh.faces {
        let tri = face.map(|i| verts[i as usize]);
        let cams = tri.map(|p| frame.to_camera(p));
        if cams.iter().all(|c| -c[2] < near) || cams.iter().all(|c| -c[2] > far) {
            continue;
        }
        let (x0, x1, y0, y1) = if cams.iter().all(|c| -c[2] >= near) {
            let pts = cams.map(|c| {
                let d = -c[2];
                (frame.cx + frame.focal * c[0] / d, frame.cy - frame.focal * c[1] / d)
            });
            let min_x = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let max_x = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let min_y = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let max_y = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            (
                ((min_x - 1.5).floor() as i64).max(0),
                ((max_x + 0.5).ceil() as i64).min(w - 1),
                ((min_y - 1.5).floor() as i64).max(0),
                ((max_y + 0.5).ceil() as i64).min(h - 1),
            )
        } else {
            (0, w - 1, 0, h - 1)
        };
        let e1 = sub3(tri[1], tri[0]);
        let e2 = sub3(tri[2], tri[0]);
        let normal = normalize3(cross3(e1, e2));
        for py in y0..=y1 {
            for px in x0..=x1 {
                let (dir, cos) = frame.ray(px as f64 + 0.5, py as f64 + 0.5);
                if let Some(t) = ray_triangle(frame.origin, dir, tri[0], e1, e2) {
                    let depth = t * cos;
                    if depth >= near && depth <= far {
                        buf.offer((py * w + px) as usize, depth, shade(normal, dir));
                    }
                }
            }
        }
    }
}

/// Möller–Trumbore; returns the ray parameter of the hit.
fn ray_triangle(origin: [f64; 3], dir: [f64; 3], v0: [f64; 3], e1: [f64; 3], e2: [f64; 3]) -> Option<f64> {
    let p = cross3(dir, e2);
    let det = dot3(e1, p);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv = 1.0 / det;
    let s = sub3(origin, v0);
    let u = dot3(s, p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = cross3(s, e1);
    let v = dot3(dir, q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(dot3(e2, q) * inv)
}

/// Renders an arrangement of primitives placed by `arrangement_transform`.
pub fn render_primitives(cam: &Camera, arrangement: &[Primitive], arrangement_transform: &TransformTRS) -> RenderTarget {
    render_primitives_linear(cam, arrangement, arrangement_transform, &RenderSettings::default()).quantize()
}

pub(crate) fn render_primitives_linear(
    cam: &Camera,
    arrangement: &[Primitive],
    arrangement_transform: &TransformTRS,
    settings: &RenderSettings,
) -> LinearImage {
    let set = SurfaceSet {
        primitives: arrangement
            .iter()
            .map(|p| Primitive::new(p.shape, arrangement_transform.compose(&p.transform)))
            .collect(),
        ..SurfaceSet::default()
    };
    let surf = render_surfaces(cam, &set);
    composite(cam.width, cam.height, &[], settings, Some(&surf))
}
