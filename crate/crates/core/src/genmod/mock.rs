use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assets::AssetStore;
use crate::image::{DepthMap, RgbImage};
use crate::mesh::{arrangement_mesh, Primitive, Shape, TriMesh};
use crate::render::{render_primitives, Camera};
use crate::splat::{Quat, SplatCloud, TransformTRS, Vec3, SH_C0};

use super::{AssetRole, Backend, GenError, GenerationRequest, GenerationResult, ModuleKind};

pub const MIN_PREVIEW_SHAPES: usize = 3;
pub const MAX_PREVIEW_SHAPES: usize = 6;
/// Side of one value-noise lattice cell in pixels.
const NOISE_CELL: u32 = 8;
const DEFAULT_PREVIEW_SIZE: u32 = 128;

pub const ENRICH_VOCABULARY: [&str; 16] = [
    "brass", "oak", "marble", "velvet", "copper", "linen", "ceramic", "walnut", "crimson", "teal", "ivory", "amber",
    "slate", "emerald", "matte", "glossy",
];

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hue in degrees derived from the prompt.
pub fn prompt_hue(prompt: &str) -> u32 {
    (fnv1a64(prompt.as_bytes()) % 360) as u32
}

/// `h` in degrees, `s` and `v` in [0, 1].
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

pub fn rgb_to_hsv(rgb: [f64; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h, s, max)
}

fn prompt_tint(prompt: &str) -> [f64; 3] {
    hsv_to_rgb(prompt_hue(prompt) as f64, 0.6, 1.0)
}

/// Bilinear value noise in [0, 1] on an `NOISE_CELL`-pixel lattice.
struct ValueNoise {
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(width: u32, height: u32, seed: u64) -> Self {
        let cols = (width / NOISE_CELL) as usize + 2;
        let rows = (height / NOISE_CELL) as usize + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            cols,
            lattice: (0..cols * rows).map(|_| rng.gen::<f64>()).collect(),
        }
    }

    fn at(&self, x: u32, y: u32) -> f64 {
        let fx = (x as f64 + 0.5) / NOISE_CELL as f64;
        let fy = (y as f64 + 0.5) / NOISE_CELL as f64;
        let (ix, iy) = (fx as usize, fy as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(fx.fract()), smooth(fy.fract()));
        let v = |cx: usize, cy: usize| self.lattice[cy * self.cols + cx];
        let top = v(ix, iy) * (1.0 - tx) + v(ix + 1, iy) * tx;
        let bottom = v(ix, iy + 1) * (1.0 - tx) + v(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// Depth-conditioned stylization stand-in. Background pixels (infinite
/// depth) receive the flat prompt tint; nearer pixels receive more noise.
pub fn mock_stylize(image: &RgbImage, depth: &DepthMap, prompt: &str, seed: u64) -> Result<RgbImage, GenError> {
    if (image.width, image.height) != (depth.width, depth.height) {
        return Err(GenError::DimensionMismatch {
            image: (image.width, image.height),
            depth: (depth.width, depth.height),
        });
    }
    let tint = prompt_tint(prompt);
    let noise = ValueNoise::new(image.width, image.height, seed ^ fnv1a64(prompt.as_bytes()));
    let finite = depth.data.iter().copied().filter(|d| d.is_finite());
    let (lo, hi) = finite.fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let span = (hi - lo) as f64;
    let mut out = RgbImage::new(image.width, image.height);
    for y in 0..image.height {
        for x in 0..image.width {
            let d = depth.get(x, y);
            let w = if d.is_finite() {
                let normalized = if span > 0.0 { (d - lo) as f64 / span } else { 0.0 };
                1.0 - 0.5 * normalized
            } else {
                0.0
            };
            let m = 1.0 - w + w * noise.at(x, y);
            let src = image.get(x, y);
            let px = std::array::from_fn(|c| {
                let v = 0.5 * src[c] as f64 / 255.0 + 0.5 * tint[c] * m;
                (v.clamp(0.0, 1.0) * 255.0).round() as u8
            });
            out.put(x, y, px);
        }
    }
    Ok(out)
}

/// Output of the text-to-3D preview mock.
#[derive(Debug, Clone, PartialEq)]
pub struct TextTo3DPreview {
    pub primitives: Vec<Primitive>,
    pub mesh: TriMesh,
    pub render: RgbImage,
}

pub fn preview_camera(size: u32) -> Camera {
    Camera::look_at(Vec3::new(0.0, 1.2, 3.0), Vec3::new(0.0, 0.3, 0.0), size, size)
}

/// Seeded union of primitive shapes, tessellated and rendered.
pub fn mock_text_to_3d_preview(prompt: &str, seed: u64, size: u32) -> Result<TextTo3DPreview, GenError> {
    if prompt.trim().is_empty() {
        return Err(GenError::EmptyPrompt);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(prompt.as_bytes()) ^ seed);
    let count = rng.gen_range(MIN_PREVIEW_SHAPES..=MAX_PREVIEW_SHAPES);
    let primitives: Vec<Primitive> = (0..count)
        .map(|_| {
            let shape = [Shape::Sphere, Shape::Cube, Shape::Cylinder][rng.gen_range(0..3)];
            let scale: f32 = rng.gen_range(0.15..0.4);
            let t = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(0.0..0.8), rng.gen_range(-0.5..0.5));
            let r = Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), rng.gen_range(0.0..std::f64::consts::TAU));
            Primitive::new(shape, TransformTRS::new(t, r, scale).expect("positive scale"))
        })
        .collect();
    let mesh = arrangement_mesh(&primitives, &TransformTRS::IDENTITY);
    let render = render_primitives(&preview_camera(size), &primitives, &TransformTRS::IDENTITY).color;
    Ok(TextTo3DPreview {
        primitives,
        mesh,
        render,
    })
}

/// Luminance heightfield over `[-0.5, 0.5]²` in x/z; one vertex per
/// `8×8` block (at least 2×2). The seed does not affect the result.
pub fn mock_image_to_3d(image: &RgbImage, _seed: u64) -> TriMesh {
    let cols = (image.width / 8).max(2);
    let rows = (image.height / 8).max(2);
    let mut mesh = TriMesh::default();
    for j in 0..rows {
        for i in 0..cols {
            let (x0, x1) = (i * image.width / cols, ((i + 1) * image.width / cols).max(i * image.width / cols + 1));
            let (y0, y1) = (j * image.height / rows, ((j + 1) * image.height / rows).max(j * image.height / rows + 1));
            let mut sum = 0.0;
            let mut n = 0usize;
            for y in y0..y1.min(image.height) {
                for x in x0..x1.min(image.width) {
                    sum += image.luminance(x, y);
                    n += 1;
                }
            }
            let height = if n > 0 { sum / n as f64 } else { 0.0 };
            mesh.positions.push(Vec3::new(
                -0.5 + i as f32 / (cols - 1) as f32,
                height as f32,
                -0.5 + j as f32 / (rows - 1) as f32,
            ));
        }
    }
    for j in 0..rows - 1 {
        for i in 0..cols - 1 {
            let a = j * cols + i;
            let (b, c, d) = (a + 1, a + cols, a + cols + 1);
            mesh.faces.push([a, c, b]);
            mesh.faces.push([b, c, d]);
        }
    }
    mesh
}

/// Rotates the hue of every splat's base color by the prompt hue.
pub fn mock_splat_edit(cloud: &SplatCloud, prompt: &str, _seed: u64) -> SplatCloud {
    let shift = prompt_hue(prompt) as f64;
    let mut out = cloud.clone();
    for s in &mut out.splats {
        let rgb = s.color_dc.map(|c| (0.5 + SH_C0 * c as f64).clamp(0.0, 1.0));
        let (h, sat, v) = rgb_to_hsv(rgb);
        let rotated = hsv_to_rgb(h + shift, sat, v);
        s.color_dc = rotated.map(|c| ((c - 0.5) / SH_C0) as f32);
    }
    out
}

/// Two vocabulary indices chosen by the image hash.
pub fn enrich_descriptors(image_bytes: &[u8]) -> (usize, usize) {
    let h = fnv1a64(image_bytes);
    let a = (h % 16) as usize;
    let mut b = ((h >> 4) % 16) as usize;
    if b == a {
        b = (b + 1) % 16;
    }
    (a, b)
}

pub fn mock_enrich_prompt(prompt: &str, image_bytes: &[u8]) -> Result<String, GenError> {
    if prompt.trim().is_empty() {
        return Err(GenError::EmptyPrompt);
    }
    let (a, b) = enrich_descriptors(image_bytes);
    Ok(format!("{prompt}, {}, {}", ENRICH_VOCABULARY[a], ENRICH_VOCABULARY[b]))
}

/// Deterministic in-process backend for every module kind.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    online_latency: Duration,
    offline_latency: Duration,
    kinds: Option<Vec<ModuleKind>>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sleeps before answering: `online` for preview kinds, `offline` for
    /// full-fidelity kinds.
    pub fn with_latency(mut self, online: Duration, offline: Duration) -> Self {
        self.online_latency = online;
        self.offline_latency = offline;
        self
    }

    /// Restricts the supported kinds.
    pub fn only(mut self, kinds: &[ModuleKind]) -> Self {
        self.kinds = Some(kinds.to_vec());
        self
    }

    fn image_and_depth(req: &GenerationRequest, store: &AssetStore) -> Result<(RgbImage, DepthMap), GenError> {
        let image = store.load_image(req.input_image.as_ref().expect("validated"))?;
        let depth = match &req.input_depth {
            // Normalization in the stylizer makes the mapping range irrelevant.
            Some(id) => store.load_depth(id, 0.0, 1.0)?,
            None => DepthMap::empty(image.width, image.height),
        };
        Ok((image, depth))
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn supports(&self, kind: ModuleKind) -> bool {
        self.kinds.as_ref().is_none_or(|k| k.contains(&kind))
    }

    fn run(&self, req: &GenerationRequest, store: &AssetStore) -> Result<GenerationResult, GenError> {
        let delay = if req.kind.is_offline() {
            self.offline_latency
        } else {
            self.online_latency
        };
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
        let assets = match req.kind {
            ModuleKind::InstructImageEdit | ModuleKind::ImageStylize => {
                let (image, depth) = Self::image_and_depth(req, store)?;
                let out = mock_stylize(&image, &depth, &req.prompt, req.seed)?;
                vec![(AssetRole::PreviewImage, store.put_image(&out)?)]
            }
            ModuleKind::TextTo3DPreview => {
                let size = req
                    .params
                    .get("size")
                    .and_then(|v| v.as_u64())
                    .map_or(DEFAULT_PREVIEW_SIZE, |s| s.clamp(1, 4096) as u32);
                let preview = mock_text_to_3d_preview(&req.prompt, req.seed, size)?;
                vec![
                    (AssetRole::PreviewImage, store.put_image(&preview.render)?),
                    (AssetRole::LowFiMesh, store.put_mesh(&preview.mesh)?),
                ]
            }
            ModuleKind::ImageTo3D => {
                let image = store.load_image(req.input_image.as_ref().expect("validated"))?;
                vec![(AssetRole::FullMesh, store.put_mesh(&mock_image_to_3d(&image, req.seed))?)]
            }
            ModuleKind::SplatEdit => {
                let cloud = store.load_cloud(req.input_cloud.as_ref().expect("validated"))?;
                let edited = mock_splat_edit(&cloud, &req.prompt, req.seed);
                vec![(AssetRole::EditedCloud, store.put_cloud(&edited)?)]
            }
            ModuleKind::PromptEnrich => {
                let bytes = match &req.input_image {
                    Some(id) => store.get(id)?.bytes.to_vec(),
                    None => Vec::new(),
                };
                let text = mock_enrich_prompt(&req.prompt, &bytes)?;
                vec![(AssetRole::EnrichedPrompt, store.put_text(&text)?)]
            }
        };
        Ok(GenerationResult {
            kind: req.kind,
            assets,
            seed: req.seed,
        })
    }
}
