//! Synthetic content: a small living-room scene and a scripted editing session.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::assets::{AssetError, AssetStore};
use crate::mesh::{Primitive, Shape};
use crate::render::Camera;
use crate::scene::{primitives_param, EditInstruction, InstructionType, NoResults, ObjectKindTag, Scene};
use crate::splat::{GaussianSplat, Quat, SplatCloud, TransformTRS, Vec3, SH_C0};

/// `n` splats scattered in a ball of `radius` around the origin, all near
/// the linear color `rgb`.
pub fn ball_cloud(n: usize, radius: f32, rgb: [f32; 3], seed: u64) -> SplatCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let splats = (0..n)
        .map(|_| {
            let p = loop {
                let p = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if p.length() <= 1.0 {
                    break p.scale(radius);
                }
            };
            let jitter: f32 = rng.gen_range(-0.05..0.05);
            GaussianSplat {
                position: p,
                rotation: Quat::IDENTITY,
                log_scale: Vec3::splat((radius * 0.25).ln()),
                opacity_logit: 2.0,
                color_dc: rgb.map(|c| ((c + jitter).clamp(0.0, 1.0) - 0.5) / SH_C0 as f32),
                sh_rest: Vec::new(),
            }
        })
        .collect();
    SplatCloud::new(splats, 0).expect("degree 0 cloud")
}

/// Three-object living room: a sofa and a chair as splat clouds, and a
/// table made of primitives. Object ids are `sofa`, `chair` and `table`;
/// seqs start at `first_seq`.
pub fn living_room(store: &AssetStore, first_seq: u64) -> Result<Vec<EditInstruction>, AssetError> {
    let sofa = store.put_cloud(&ball_cloud(400, 0.45, [0.55, 0.3, 0.2], 1))?;
    let chair = store.put_cloud(&ball_cloud(250, 0.3, [0.3, 0.45, 0.25], 2))?;
    let table = vec![
        Primitive::new(
            Shape::Cube,
            TransformTRS::new(Vec3::new(0.0, 0.5, 0.0), Quat::IDENTITY, 0.35).expect("valid"),
        ),
        Primitive::new(Shape::Cylinder, TransformTRS::new(Vec3::ZERO, Quat::IDENTITY, 0.1).expect("valid")),
    ];
    let add = |seq: u64, id: &str, tag: ObjectKindTag, t: Vec3| {
        EditInstruction::new(format!("demo-{id}"), seq, InstructionType::AddAsset)
            .with_object(id)
            .with_object_type(tag)
            .with_transform(TransformTRS::from_translation(t))
    };
    Ok(vec![
        add(first_seq, "sofa", ObjectKindTag::Splat, Vec3::new(-1.0, 0.45, -0.5)).with_param("asset", json!(sofa)),
        add(first_seq + 1, "chair", ObjectKindTag::Splat, Vec3::new(1.0, 0.3, -0.3)).with_param("asset", json!(chair)),
        add(first_seq + 2, "table", ObjectKindTag::PrimitiveArrangement, Vec3::new(0.0, 0.1, 0.2))
            .with_param("primitives", primitives_param(&table)),
    ])
}

/// Scripted 50-instruction editing session over [`living_room`]: adds,
/// moves (including moves of proxies whose jobs are still pending), edits,
/// prompt generations, sculpt stylization, a duplicate, a delete, a
/// regeneration with a new seed and two Magic Camera captures.
pub fn scripted_session(store: &AssetStore) -> Result<Vec<EditInstruction>, AssetError> {
    let mut script = Script {
        scene: Scene::new(),
        out: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(50),
    };
    for instr in living_room(store, 0)? {
        script.push(instr);
    }
    let shelf = vec![
        Primitive::new(Shape::Cube, TransformTRS::new(Vec3::new(0.0, 0.6, 0.0), Quat::IDENTITY, 0.3).expect("valid")),
        Primitive::new(Shape::Cube, TransformTRS::new(Vec3::new(0.0, 1.2, 0.0), Quat::IDENTITY, 0.3).expect("valid")),
    ];
    script.add(
        InstructionType::AddAsset,
        |i| {
            i.with_object("shelf")
                .with_object_type(ObjectKindTag::PrimitiveArrangement)
                .with_param("primitives", primitives_param(&shelf))
                .with_transform(TransformTRS::from_translation(Vec3::new(2.0, 0.0, -1.5)))
        },
    );
    script.add(InstructionType::EditObject, |i| i.with_object("sofa").with_prompt("make the sofa blue"));
    let lamp = script.add(InstructionType::GeneratePrompt, |i| i.with_prompt("a floor lamp")).expect("creates");
    let plant = script.add(InstructionType::GeneratePrompt, |i| i.with_prompt("a potted plant")).expect("creates");
    script.add(InstructionType::GenerateSculpt, |i| i.with_object("table").with_prompt("a carved oak coffee table"));
    script.random_move(&lamp);
    script.random_move(&plant);
    script.random_move("chair");
    script.magic_camera("realistic apartment living room", Vec3::new(0.0, 1.6, 4.5));
    script.add(InstructionType::EditObject, |i| i.with_object("chair").with_prompt("make the chair leather"));
    let copy = script.add(InstructionType::Duplicate, |i| i.with_object("chair")).expect("creates");
    script.random_move(&copy);
    let shelf_books = script
        .add(InstructionType::GeneratePrompt, |i| {
            i.with_prompt("a stack of books")
                .with_transform(TransformTRS::from_translation(Vec3::new(2.0, 1.5, -1.5)))
        })
        .expect("creates");
    script.add(InstructionType::GenerateSculpt, |i| i.with_object("shelf").with_prompt("a modern bookcase"));
    script.add(InstructionType::Delete, |i| i.with_object(plant.as_str()));
    script.add(InstructionType::EditObject, |i| i.with_object("sofa").with_prompt("make the sofa velvet"));
    let lamp2 = script
        .add(InstructionType::GeneratePrompt, |i| i.with_prompt("a floor lamp").with_param("seed", json!(1000)))
        .expect("creates");

    let movable = ["sofa".to_string(), "chair".into(), "table".into(), "shelf".into(), lamp, copy, shelf_books, lamp2];
    while script.out.len() < 49 {
        let k = script.rng.gen_range(0..movable.len());
        script.random_move(&movable[k]);
    }
    script.magic_camera("realistic apartment living room", Vec3::new(-3.0, 2.0, 3.0));
    Ok(script.out)
}

struct Script {
    scene: Scene,
    out: Vec<EditInstruction>,
    rng: ChaCha8Rng,
}

impl Script {
    fn push(&mut self, instr: EditInstruction) -> Option<String> {
        let touched = self.scene.apply(&instr, &NoResults).expect("scripted instruction applies");
        self.out.push(instr);
        touched.map(|id| id.0)
    }

    fn add(&mut self, kind: InstructionType, build: impl FnOnce(EditInstruction) -> EditInstruction) -> Option<String> {
        let seq = self.scene.next_seq;
        let instr = build(EditInstruction::new(format!("step-{seq:02}"), seq, kind));
        self.push(instr)
    }

    fn random_move(&mut self, id: &str) {
        let t = Vec3::new(self.rng.gen_range(-2.5..2.5), self.rng.gen_range(0.0..0.8), self.rng.gen_range(-2.5..1.0));
        let yaw = self.rng.gen_range(-3.0..3.0);
        let transform = TransformTRS::new(t, Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), yaw), 1.0).expect("valid");
        self.add(InstructionType::Move, |i| i.with_object(id).with_transform(transform));
    }

    fn magic_camera(&mut self, prompt: &str, from: Vec3) {
        let cam = Camera::look_at(from, Vec3::new(0.0, 0.4, -0.5), 96, 72);
        self.add(InstructionType::MagicCamera, |i| i.with_prompt(prompt).with_param("camera", json!(cam)));
    }
}
