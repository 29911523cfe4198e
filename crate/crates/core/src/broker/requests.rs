use serde_json::json;

use crate::assets::{AssetId, AssetStore};
use crate::genmod::{AssetRole, GenerationRequest, GenerationResult, ModuleKind};
use crate::render::{compose_snapshot, render_primitives, Camera, RenderError, RenderTarget};
use crate::scene::{EditInstruction, InstructionType, ObjectKind, Scene, SceneObject};
use crate::splat::{Aabb, TransformTRS, Vec3};

use super::BrokerError;

/// Module kinds used by each generative instruction: online, then offline.
/// Magic Camera has no offline module; its selected preview is final.
pub fn module_kinds(kind: InstructionType) -> Option<(ModuleKind, Option<ModuleKind>)> {
    match kind {
        InstructionType::EditObject => Some((ModuleKind::InstructImageEdit, Some(ModuleKind::SplatEdit))),
        InstructionType::GeneratePrompt => Some((ModuleKind::TextTo3DPreview, Some(ModuleKind::ImageTo3D))),
        InstructionType::GenerateSculpt => Some((ModuleKind::ImageStylize, Some(ModuleKind::ImageTo3D))),
        InstructionType::MagicCamera => Some((ModuleKind::ImageStylize, None)),
        _ => None,
    }
}

/// Camera looking at `bounds` from the front and slightly above.
pub fn framing_camera(bounds: &Aabb, size: u32) -> Camera {
    let center = bounds.center();
    let e = bounds.extent();
    let radius = (0.5 * e.length()).max(1e-3);
    let base = Camera::default();
    let dist = radius / (base.fov_y * 0.5).sin() * 1.1;
    let dir = Vec3::new(0.0, 0.35, 1.0);
    let dir = dir.scale(1.0 / dir.length());
    let mut cam = Camera::look_at(center + dir.scale(dist), center, size, size);
    cam.near = (dist - 2.0 * radius).max(0.01);
    cam.far = dist + 4.0 * radius + 1.0;
    cam
}

fn store_target(target: &RenderTarget, cam: &Camera, store: &AssetStore) -> Result<(AssetId, AssetId), BrokerError> {
    let image = store.put_image(&target.color)?;
    let depth = store.put_depth(&target.depth, cam.near, cam.far)?;
    Ok((image, depth))
}

fn target_object<'a>(scene: &'a Scene, instr: &EditInstruction) -> Result<&'a SceneObject, BrokerError> {
    let id = instr.object_id.as_ref().ok_or_else(|| BrokerError::Malformed("object_id is required".into()))?;
    scene.object(id).ok_or_else(|| BrokerError::ObjectNotFound(id.clone()))
}

/// Builds the online request, rendering from the scene as it was when the
/// instruction was submitted.
pub fn online_request(
    instr: &EditInstruction,
    scene: &Scene,
    store: &AssetStore,
    seed: u64,
    preview_size: u32,
) -> Result<GenerationRequest, BrokerError> {
    let (kind, _) = module_kinds(instr.kind).expect("generative instruction");
    let prompt = instr.prompt.clone().unwrap_or_default();
    let mut req = GenerationRequest::new(kind, prompt, seed);
    match instr.kind {
        InstructionType::EditObject => {
            let obj = target_object(scene, instr)?;
            let alone = Scene {
                objects: vec![SceneObject {
                    transform: TransformTRS::IDENTITY,
                    annotation: None,
                    ..obj.clone()
                }],
                ..Scene::default()
            };
            let cam = framing_camera(&obj.anchor_bounds, preview_size);
            let target = compose_snapshot(&alone, &cam, store)?;
            let (image, depth) = store_target(&target, &cam, store)?;
            req = req.with_image(image).with_depth(depth);
        }
        InstructionType::GenerateSculpt => {
            let obj = target_object(scene, instr)?;
            let ObjectKind::PrimitiveArrangement { primitives } = &obj.kind else {
                return Err(BrokerError::Malformed(format!("{} is not a primitive arrangement", obj.id)));
            };
            let cam = framing_camera(&obj.anchor_bounds, preview_size);
            let target = render_primitives(&cam, primitives, &TransformTRS::IDENTITY);
            let (image, depth) = store_target(&target, &cam, store)?;
            req = req.with_image(image).with_depth(depth);
        }
        InstructionType::MagicCamera => {
            let cam = magic_camera(instr)?;
            let target = compose_snapshot(scene, &cam, store)?;
            let (image, depth) = store_target(&target, &cam, store)?;
            req = req.with_image(image).with_depth(depth);
        }
        InstructionType::GeneratePrompt => {
            req.params.insert("size".into(), json!(preview_size));
        }
        _ => unreachable!("non-generative instruction"),
    }
    Ok(req)
}

pub fn magic_camera(instr: &EditInstruction) -> Result<Camera, BrokerError> {
    let value = instr
        .params
        .get("camera")
        .ok_or_else(|| BrokerError::Malformed("params.camera is required".into()))?;
    let cam: Camera = serde_json::from_value(value.clone()).map_err(|e| BrokerError::Malformed(format!("params.camera: {e}")))?;
    cam.validate().map_err(BrokerError::Render)?;
    Ok(cam)
}

/// Checks that everything `compose_snapshot` would read is present.
pub fn check_scene_assets(scene: &Scene, store: &AssetStore) -> Result<(), BrokerError> {
    for obj in &scene.objects {
        if let Some(asset) = obj.kind.asset() {
            if !store.contains(asset) {
                return Err(BrokerError::Render(RenderError::MissingAsset(asset.clone())));
            }
        }
    }
    Ok(())
}

/// The offline request for a selected variant, or `None` when the variant
/// itself is the final result.
pub fn offline_request(
    instr: &EditInstruction,
    scene: &Scene,
    offline_kind: Option<ModuleKind>,
    chosen: &GenerationResult,
) -> Result<Option<GenerationRequest>, BrokerError> {
    let Some(kind) = offline_kind else {
        return Ok(None);
    };
    let prompt = instr.prompt.clone().unwrap_or_default();
    let mut req = GenerationRequest::new(kind, prompt, chosen.seed);
    match kind {
        ModuleKind::SplatEdit => {
            let obj = target_object(scene, instr)?;
            let ObjectKind::Splat { asset } = &obj.kind else {
                return Err(BrokerError::Malformed(format!("{} is not a splat object", obj.id)));
            };
            req = req.with_cloud(asset.clone());
        }
        _ => {
            let preview = chosen
                .asset(AssetRole::PreviewImage)
                .ok_or_else(|| BrokerError::Malformed("selected variant has no preview image".into()))?;
            req = req.with_image(preview.clone());
        }
    }
    Ok(Some(req))
}

/// The asset that becomes the object's (or snapshot's) final content.
pub fn final_asset(result: &GenerationResult) -> Option<&AssetId> {
    [AssetRole::FullMesh, AssetRole::EditedCloud, AssetRole::PreviewImage]
        .into_iter()
        .find_map(|role| result.asset(role))
}
