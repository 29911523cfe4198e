use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatwright::assets::AssetStore;
use splatwright::genmod::{
    dispatch, enrich_descriptors, enrich_prompt, generate_variants, mock_image_to_3d, mock_splat_edit, mock_stylize,
    mock_text_to_3d_preview, prompt_hue, AssetRole, GenerationRequest, MockBackend, ModuleKind,
};
use splatwright::image::{DepthMap, RgbImage};
use splatwright::mesh::{tessellated_vertex_count, Shape, TriMesh};
use splatwright::splat::{GaussianSplat, SplatCloud, Vec3, SH_C0};

fn fnv_oracle(s: &str) -> u64 {
    s.bytes().fold(14695981039346656037u64, |h, b| (h ^ b as u64).wrapping_mul(1099511628211))
}

/// HSV to RGB through the `k = (n + h/60) mod 6` form.
fn hsv_oracle(h: f64, s: f64, v: f64) -> [f64; 3] {
    let f = |n: f64| {
        let k = (n + h / 60.0).rem_euclid(6.0);
        v - v * s * k.min(4.0 - k).clamp(0.0, 1.0)
    };
    [f(5.0), f(3.0), f(1.0)]
}

fn scene_inputs(store: &AssetStore) -> GenerationRequest {
    let mut img = RgbImage::new(32, 24);
    let mut depth = DepthMap::empty(32, 24);
    for y in 0..24 {
        for x in 0..32 {
            img.put(x, y, [(x * 8) as u8, (y * 10) as u8, 90]);
            if (x as i32 - 16).abs() < 10 {
                depth.data[(y * 32 + x) as usize] = 2.0 + x as f32 * 0.1;
            }
        }
    }
    let image = store.put_image(&img).unwrap();
    let depth = store.put_depth(&depth, 0.05, 100.0).unwrap();
    GenerationRequest::new(ModuleKind::ImageStylize, "realistic apartment living room", 0)
        .with_image(image)
        .with_depth(depth)
}

fn sample_cloud() -> SplatCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let splats = (0..50)
        .map(|_| {
            let (h, s, v) = (rng.gen_range(0.0..360.0), rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0));
            let rgb = hsv_oracle(h, s, v);
            GaussianSplat {
                log_scale: Vec3::new(rng.gen_range(-3.0..0.0), -1.0, -2.0),
                opacity_logit: rng.gen_range(-2.0..2.0),
                color_dc: rgb.map(|c| ((c - 0.5) / SH_C0) as f32),
                ..GaussianSplat::at(Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            }
        })
        .collect();
    SplatCloud::new(splats, 0).unwrap()
}

#[test]
fn every_kind_is_deterministic() {
    let store = AssetStore::in_memory();
    let stylize = scene_inputs(&store);
    let cloud = store.put_cloud(&sample_cloud()).unwrap();
    let reqs = [
        stylize.clone(),
        GenerationRequest { kind: ModuleKind::InstructImageEdit, ..stylize.clone() },
        GenerationRequest::new(ModuleKind::TextTo3DPreview, "Make an ornate brass lamp", 3),
        GenerationRequest::new(ModuleKind::ImageTo3D, "", 3).with_image(stylize.input_image.clone().unwrap()),
        GenerationRequest::new(ModuleKind::SplatEdit, "make the sofa blue", 3).with_cloud(cloud),
        GenerationRequest::new(ModuleKind::PromptEnrich, "lamp", 0).with_image(stylize.input_image.clone().unwrap()),
    ];
    let mock = MockBackend::new();
    for req in &reqs {
        let a = dispatch(&mock, req, &store).unwrap();
        // A fresh store shares no state with the first one.
        let other = AssetStore::in_memory();
        for id in store.ids() {
            let asset = store.get(&id).unwrap();
            other.put(asset.media, asset.bytes.to_vec()).unwrap();
        }
        let b = dispatch(&mock, req, &other).unwrap();
        assert_eq!(a, b, "{:?}", req.kind);
        for (_, id) in &a.assets {
            assert_eq!(store.get(id).unwrap().bytes, other.get(id).unwrap().bytes);
        }
    }
}

#[test]
fn concurrent_dispatch_is_safe() {
    let store = AssetStore::in_memory();
    let req = scene_inputs(&store);
    let mock = Arc::new(MockBackend::new());
    let expected = dispatch(mock.as_ref(), &req, &store).unwrap();
    std::thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| assert_eq!(dispatch(mock.as_ref(), &req, &store).unwrap(), expected));
        }
    });
}

#[test]
fn prompt_hues_follow_the_hash() {
    for p in ["gingerbread house", "snowy tree", "make the sofa blue"] {
        assert_eq!(prompt_hue(p) as u64, fnv_oracle(p) % 360);
    }
    assert_ne!(fnv_oracle("gingerbread house"), fnv_oracle("snowy tree"));
    assert_ne!(prompt_hue("gingerbread house"), prompt_hue("snowy tree"));
    let img = RgbImage::filled(8, 8, [128, 128, 128]);
    let empty = DepthMap::empty(8, 8);
    let a = mock_stylize(&img, &empty, "gingerbread house", 0).unwrap();
    let b = mock_stylize(&img, &empty, "snowy tree", 0).unwrap();
    assert_ne!(a.get(0, 0), b.get(0, 0));
}

#[test]
fn stylize_follows_depth_structure() {
    let store = AssetStore::in_memory();
    let req = scene_inputs(&store);
    let img = store.load_image(req.input_image.as_ref().unwrap()).unwrap();
    let depth = store.load_depth(req.input_depth.as_ref().unwrap(), 0.05, 100.0).unwrap();
    let a = mock_stylize(&img, &depth, "x", 1).unwrap();
    let b = mock_stylize(&img, &depth, "x", 2).unwrap();
    // Seeds change only pixels with finite depth.
    for y in 0..24 {
        for x in 0..32 {
            if depth.get(x, y).is_infinite() {
                assert_eq!(a.get(x, y), b.get(x, y));
            }
        }
    }
    assert_ne!(a, b);
}

#[test]
fn lamp_preview_is_a_small_union() {
    let seed = 17;
    let prompt = "Make an ornate brass lamp";
    let preview = mock_text_to_3d_preview(prompt, seed, 64).unwrap();
    assert!((3..=6).contains(&preview.primitives.len()));
    let obj = preview.mesh.to_obj();
    let parsed = TriMesh::from_obj(&obj).unwrap();
    assert_eq!(parsed.faces.len(), preview.mesh.faces.len());
    assert_eq!(mock_text_to_3d_preview(prompt, seed, 64).unwrap().mesh.to_obj(), obj);

    // Re-run the seeded draw sequence: count, then per shape the kind,
    // scale, three translation components and an angle.
    let mut rng = ChaCha8Rng::seed_from_u64(fnv_oracle(prompt) ^ seed);
    let count = rng.gen_range(3..=6usize);
    let mut vertices = 0;
    for _ in 0..count {
        let shape = [Shape::Sphere, Shape::Cube, Shape::Cylinder][rng.gen_range(0..3)];
        let _: f32 = rng.gen_range(0.15..0.4);
        let _: (f32, f32, f32) = (rng.gen_range(-0.5..0.5), rng.gen_range(0.0..0.8), rng.gen_range(-0.5..0.5));
        let _: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        vertices += tessellated_vertex_count(shape);
    }
    assert_eq!(count, preview.primitives.len());
    assert_eq!(preview.mesh.vertex_count(), vertices);
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), vertices);
    assert!(mock_text_to_3d_preview(" ", 0, 8).is_err());
}

fn luminance_oracle(p: [u8; 3]) -> f64 {
    (0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64) / 255.0
}

#[test]
fn heightfield_heights_are_block_means() {
    let flat = mock_image_to_3d(&RgbImage::filled(40, 24, [30, 200, 90]), 0);
    let h0 = flat.positions[0].y;
    assert!(flat.positions.iter().all(|p| p.y == h0));
    assert_eq!(flat.vertex_count(), 5 * 3);

    let mut ramp = RgbImage::new(16, 16);
    for y in 0..16 {
        for x in 0..16 {
            let v = (x * 16 + y * 2) as u8;
            ramp.put(x, y, [v, v / 2, 255 - v]);
        }
    }
    let mesh = mock_image_to_3d(&ramp, 0);
    assert_eq!(mesh.vertex_count(), 4);
    for (k, p) in mesh.positions.iter().enumerate() {
        let (bx, by) = ((k % 2) as u32, (k / 2) as u32);
        let mut sum = 0.0;
        for y in by * 8..by * 8 + 8 {
            for x in bx * 8..bx * 8 + 8 {
                sum += luminance_oracle(ramp.get(x, y));
            }
        }
        assert!((p.y as f64 - sum / 64.0).abs() < 1e-6, "vertex {k}");
        assert_eq!(p.x, if bx == 0 { -0.5 } else { 0.5 });
        assert_eq!(p.z, if by == 0 { -0.5 } else { 0.5 });
    }
    assert_eq!(mock_image_to_3d(&ramp, 0).to_obj(), mock_image_to_3d(&ramp, 99).to_obj());
}

fn decoded(s: &GaussianSplat) -> [f64; 3] {
    s.color_dc.map(|c| 0.5 + SH_C0 * c as f64)
}

#[test]
fn splat_edit_rotates_hue_only() {
    let prompt = "make the sofa blue";
    let shift = (fnv_oracle(prompt) % 360) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cloud = sample_cloud();
    let once = mock_splat_edit(&cloud, prompt, 0);
    let twice = mock_splat_edit(&once, prompt, 0);
    assert_eq!(once.len(), cloud.len());
    for ((a, b), c) in cloud.splats.iter().zip(&once.splats).zip(&twice.splats) {
        // Regenerate the HSV triple the sample was built from.
        let (h, s, v) = (rng.gen_range(0.0..360.0), rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0));
        let _: f32 = rng.gen_range(-3.0..0.0);
        let _: f32 = rng.gen_range(-2.0..2.0);
        let _: (f32, f32, f32) = (rng.gen(), rng.gen(), rng.gen());
        assert_eq!(a.position, b.position);
        assert_eq!(a.rotation, b.rotation);
        assert_eq!(a.log_scale, b.log_scale);
        assert_eq!(a.opacity_logit.to_bits(), b.opacity_logit.to_bits());
        let want1 = hsv_oracle(h + shift, s, v);
        let want2 = hsv_oracle(h + 2.0 * shift, s, v);
        for k in 0..3 {
            assert!((decoded(b)[k] - want1[k]).abs() < 1e-5, "{:?} vs {want1:?}", decoded(b));
            assert!((decoded(c)[k] - want2[k]).abs() < 1e-5);
        }
    }
    assert!(mock_splat_edit(&SplatCloud::empty(0), prompt, 0).splats.is_empty());
}

#[test]
fn variants_differ_pairwise() {
    let store = AssetStore::in_memory();
    let backend: Arc<MockBackend> = Arc::new(MockBackend::new());
    let stylize = scene_inputs(&store);
    for base in 0..100u64 {
        for req in [
            GenerationRequest::new(ModuleKind::TextTo3DPreview, "Make an ornate brass lamp", base),
            stylize.with_seed(base),
        ] {
            let set = generate_variants(backend.clone(), &req, &store, Duration::from_secs(30)).unwrap();
            assert_eq!(set.seeds(), vec![base, base + 1, base + 2]);
            let bytes: Vec<_> = set
                .variants
                .iter()
                .map(|v| store.get(v.asset(AssetRole::PreviewImage).unwrap()).unwrap().bytes)
                .collect();
            for i in 0..3 {
                for j in i + 1..3 {
                    assert_ne!(bytes[i], bytes[j], "{:?} base {base}: {i} vs {j}", req.kind);
                }
            }
        }
    }
}

#[test]
fn enrichment_depends_on_the_image() {
    let store = AssetStore::in_memory();
    let a = store.put_image(&RgbImage::filled(4, 4, [1, 2, 3])).unwrap();
    let b = store.put_image(&RgbImage::filled(4, 4, [9, 8, 7])).unwrap();
    let mock = MockBackend::new();
    let ea = enrich_prompt("lamp", Some(&a), &mock, &store).unwrap();
    assert_eq!(ea, enrich_prompt("lamp", Some(&a), &mock, &store).unwrap());
    let eb = enrich_prompt("lamp", Some(&b), &mock, &store).unwrap();
    let ia = enrich_descriptors(&store.get(&a).unwrap().bytes);
    let ib = enrich_descriptors(&store.get(&b).unwrap().bytes);
    let (ha, hb) = (
        fnv_oracle_bytes(&store.get(&a).unwrap().bytes),
        fnv_oracle_bytes(&store.get(&b).unwrap().bytes),
    );
    assert_eq!(ia.0 as u64, ha % 16);
    if ha % 256 != hb % 256 {
        assert_ne!(ia, ib);
        assert_ne!(ea, eb);
    }
    assert!(enrich_prompt("", Some(&a), &mock, &store).is_err());
}

fn fnv_oracle_bytes(bytes: &[u8]) -> u64 {
    bytes.iter().fold(14695981039346656037u64, |h, &b| (h ^ b as u64).wrapping_mul(1099511628211))
}
