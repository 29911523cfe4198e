use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use splatwright::mesh::{Primitive, Shape};
use splatwright::render::Camera;
use splatwright::scene::{
    primitives_param, replay_log, EditInstruction, EditLog, InstructionType, NoResults, ObjectKindTag, Scene,
};
use splatwright::splat::{Quat, TransformTRS, Vec3};

fn random_transform(rng: &mut ChaCha8Rng) -> TransformTRS {
    let t = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0), rng.gen_range(-3.0..3.0));
    let r = Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), rng.gen_range(0.0..std::f64::consts::TAU));
    TransformTRS::new(t, r, rng.gen_range(0.5..2.0)).unwrap()
}

const PROMPTS: [&str; 5] = [
    "make the sofa blue",
    "Make an ornate brass lamp",
    "wooden chair",
    "realistic apartment living room",
    "färgglad lampa ✨",
];

/// Random but always-valid instruction sequence against a scene that
/// starts empty.
fn random_log(seed: u64, len: usize) -> EditLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = Scene::new();
    let mut instructions = Vec::new();
    let mut seq = 0;
    while instructions.len() < len {
        let ids: Vec<String> = scene.objects.iter().map(|o| o.id.0.clone()).collect();
        let splats: Vec<String> = scene
            .objects
            .iter()
            .filter(|o| o.kind.tag() == ObjectKindTag::Splat)
            .map(|o| o.id.0.clone())
            .collect();
        let arrangements: Vec<String> = scene
            .objects
            .iter()
            .filter(|o| o.kind.tag() == ObjectKindTag::PrimitiveArrangement)
            .map(|o| o.id.0.clone())
            .collect();
        let id = format!("i{seq}");
        let prompt = PROMPTS[rng.gen_range(0..PROMPTS.len())];
        let pick = |rng: &mut ChaCha8Rng, v: &[String]| v[rng.gen_range(0..v.len())].clone();
        let instr = match rng.gen_range(0..8) {
            0 => EditInstruction::new(id, seq, InstructionType::AddAsset)
                .with_object_type(ObjectKindTag::Splat)
                .with_param("asset", json!(format!("cloud{}", rng.gen_range(0..3)))),
            1 => {
                let n = rng.gen_range(1..4);
                let prims: Vec<Primitive> = (0..n)
                    .map(|i| Primitive::new([Shape::Sphere, Shape::Cube, Shape::Cylinder][i % 3], random_transform(&mut rng)))
                    .collect();
                EditInstruction::new(id, seq, InstructionType::AddAsset)
                    .with_object_type(ObjectKindTag::PrimitiveArrangement)
                    .with_param("primitives", primitives_param(&prims))
            }
            2 if !ids.is_empty() => EditInstruction::new(id, seq, InstructionType::Move)
                .with_object(pick(&mut rng, &ids))
                .with_transform(random_transform(&mut rng)),
            3 if !ids.is_empty() => EditInstruction::new(id, seq, InstructionType::Duplicate).with_object(pick(&mut rng, &ids)),
            4 if !ids.is_empty() && rng.gen_bool(0.5) => {
                EditInstruction::new(id, seq, InstructionType::Delete).with_object(pick(&mut rng, &ids))
            }
            5 if !splats.is_empty() => EditInstruction::new(id, seq, InstructionType::EditObject)
                .with_object(pick(&mut rng, &splats))
                .with_prompt(prompt),
            6 if !arrangements.is_empty() => EditInstruction::new(id, seq, InstructionType::GenerateSculpt)
                .with_object(pick(&mut rng, &arrangements))
                .with_prompt(prompt),
            7 => {
                let cam = Camera::look_at(
                    Vec3::new(rng.gen_range(-4.0..4.0), 1.5, 5.0),
                    Vec3::ZERO,
                    64,
                    48,
                );
                EditInstruction::new(id, seq, InstructionType::MagicCamera)
                    .with_prompt(prompt)
                    .with_param("camera", serde_json::to_value(cam).unwrap())
            }
            _ => EditInstruction::new(id, seq, InstructionType::GeneratePrompt).with_prompt(prompt),
        };
        scene.apply(&instr, &NoResults).expect("generator emits valid instructions");
        instructions.push(instr);
        seq += 1 + rng.gen_range(0..2);
    }
    EditLog::new(instructions)
}

#[test]
fn replay_is_deterministic() {
    for seed in 0..20 {
        let log = random_log(seed, 50);
        let text = log.to_jsonl();
        let a = replay_log(&Scene::new(), &log, &NoResults).unwrap().serialize();
        let b = replay_log(&Scene::new(), &EditLog::from_jsonl(&text).unwrap(), &NoResults)
            .unwrap()
            .serialize();
        assert_eq!(a, b, "seed {seed}");
    }
}

#[test]
fn empty_log_keeps_initial_scene() {
    let initial = replay_log(&Scene::new(), &random_log(3, 10), &NoResults).unwrap();
    let out = replay_log(&initial, &EditLog::default(), &NoResults).unwrap();
    assert_eq!(out, initial);
}

#[test]
fn last_move_wins() {
    let t1 = TransformTRS::from_translation(Vec3::new(1.0, 0.0, 0.0));
    let t2 = TransformTRS::from_translation(Vec3::new(0.0, 0.0, 2.5));
    let log = EditLog::new(vec![
        EditInstruction::new("a", 0, InstructionType::AddAsset)
            .with_object_type(ObjectKindTag::Splat)
            .with_param("asset", json!("c")),
        EditInstruction::new("b", 1, InstructionType::Move).with_object("obj-0000").with_transform(t1),
        EditInstruction::new("c", 2, InstructionType::Move).with_object("obj-0000").with_transform(t2),
    ]);
    let scene = replay_log(&Scene::new(), &log, &NoResults).unwrap();
    assert_eq!(scene.objects[0].transform, t2);
}

#[test]
fn replay_error_reports_seq_and_partial_scene() {
    let log = EditLog::new(vec![
        EditInstruction::new("a", 0, InstructionType::AddAsset)
            .with_object_type(ObjectKindTag::Splat)
            .with_param("asset", json!("c")),
        EditInstruction::new("b", 4, InstructionType::Delete).with_object("missing"),
    ]);
    let err = replay_log(&Scene::new(), &log, &NoResults).unwrap_err();
    assert_eq!(err.seq, 4);
    assert_eq!(err.partial.objects.len(), 1);
}

#[test]
fn log_rejects_non_increasing_seq() {
    let text = "{\"id\":\"a\",\"seq\":2,\"timestamp_ms\":0,\"type\":\"Delete\",\"object_id\":\"x\"}\n\
                {\"id\":\"b\",\"seq\":2,\"timestamp_ms\":0,\"type\":\"Delete\",\"object_id\":\"x\"}\n";
    let err = EditLog::from_jsonl(text).unwrap_err();
    assert_eq!(err.line, 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn replay_is_a_fold(seed in any::<u64>(), len in 1usize..40, cut in 0usize..40) {
        let log = random_log(seed, len);
        let cut = cut.min(len);
        let prefix = EditLog::new(log.instructions[..cut].to_vec());
        let suffix = EditLog::new(log.instructions[cut..].to_vec());
        let whole = replay_log(&Scene::new(), &log, &NoResults).unwrap();
        let mid = replay_log(&Scene::new(), &prefix, &NoResults).unwrap();
        let folded = replay_log(&mid, &suffix, &NoResults).unwrap();
        prop_assert_eq!(whole.serialize(), folded.serialize());
    }

    #[test]
    fn object_ids_stay_unique(seed in any::<u64>()) {
        let scene = replay_log(&Scene::new(), &random_log(seed, 50), &NoResults).unwrap();
        let ids: BTreeSet<_> = scene.objects.iter().map(|o| o.id.clone()).collect();
        prop_assert_eq!(ids.len(), scene.objects.len());
    }

    #[test]
    fn delete_undoes_duplicate(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut scene = replay_log(&Scene::new(), &random_log(seed, 20), &NoResults).unwrap();
        prop_assume!(!scene.objects.is_empty());
        let before = scene.objects.clone();
        let target = before[pick.index(before.len())].id.clone();
        let seq = scene.next_seq;
        let copy = scene
            .apply(&EditInstruction::new("dup", seq, InstructionType::Duplicate).with_object(target.0), &NoResults)
            .unwrap()
            .unwrap();
        scene
            .apply(&EditInstruction::new("del", seq + 1, InstructionType::Delete).with_object(copy.0), &NoResults)
            .unwrap();
        prop_assert_eq!(scene.objects, before);
    }

    #[test]
    fn serialization_is_canonical(seed in any::<u64>()) {
        let scene = replay_log(&Scene::new(), &random_log(seed, 30), &NoResults).unwrap();
        let bytes = scene.serialize();
        let back = Scene::deserialize(&bytes).unwrap();
        prop_assert_eq!(back.serialize(), bytes);
        let other = replay_log(&Scene::new(), &random_log(seed.wrapping_add(1), 30), &NoResults).unwrap();
        prop_assert_eq!(other == scene, other.serialize() == scene.serialize());
    }

    #[test]
    fn prompts_round_trip_exactly(prompt in "\\PC{1,40}") {
        prop_assume!(!prompt.trim().is_empty());
        let instr = EditInstruction::new("g", 0, InstructionType::GeneratePrompt).with_prompt(prompt.clone());
        let scene = replay_log(&Scene::new(), &EditLog::new(vec![instr]), &NoResults).unwrap();
        let back = Scene::deserialize(&scene.serialize()).unwrap();
        prop_assert_eq!(&back.objects[0].annotation.as_ref().unwrap().prompt, &prompt);
        prop_assert_eq!(back.serialize(), scene.serialize());
    }
}
