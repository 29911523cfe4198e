use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assets::{AssetId, AssetStore};
use crate::mesh::Primitive;
use crate::render::Camera;
use crate::splat::{Aabb, TransformTRS, Vec3};

use super::canonical;
use super::instruction::{EditInstruction, InstructionType, ObjectId, ObjectKindTag};
use super::{EditError, SceneParseError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ObjectKind {
    Splat { asset: AssetId },
    Mesh { asset: AssetId },
    PrimitiveArrangement { primitives: Vec<Primitive> },
    /// Image billboard; the image is absent while only the label exists.
    Proxy2D { image: Option<AssetId> },
    /// Low-fidelity mesh stand-in.
    Proxy3D { mesh: AssetId },
}

impl ObjectKind {
    pub fn tag(&self) -> ObjectKindTag {
        match self {
            Self::Splat { .. } => ObjectKindTag::Splat,
            Self::Mesh { .. } => ObjectKindTag::Mesh,
            Self::PrimitiveArrangement { .. } => ObjectKindTag::PrimitiveArrangement,
            Self::Proxy2D { .. } => ObjectKindTag::Proxy2D,
            Self::Proxy3D { .. } => ObjectKindTag::Proxy3D,
        }
    }

    pub fn is_proxy(&self) -> bool {
        matches!(self, Self::Proxy2D { .. } | Self::Proxy3D { .. })
    }

    pub fn asset(&self) -> Option<&AssetId> {
        match self {
            Self::Splat { asset } | Self::Mesh { asset } => Some(asset),
            Self::Proxy2D { image } => image.as_ref(),
            Self::Proxy3D { mesh } => Some(mesh),
            Self::PrimitiveArrangement { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialAnnotation {
    /// Instruction that produced this annotation.
    #[serde(default)]
    pub instruction_id: String,
    pub prompt: String,
    pub instruction_type: InstructionType,
    #[serde(default)]
    pub preview_asset: Option<AssetId>,
    #[serde(default)]
    pub variant_index: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub transform: TransformTRS,
    #[serde(default)]
    pub annotation: Option<SpatialAnnotation>,
    /// Local-space selection volume.
    pub anchor_bounds: Aabb,
}

impl SceneObject {
    pub fn world_bounds(&self) -> Aabb {
        self.anchor_bounds.transformed(&self.transform)
    }
}

/// A Magic Camera capture recorded in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSnapshot {
    pub instruction_id: String,
    pub camera: Camera,
    pub annotation: SpatialAnnotation,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub snapshots: Vec<CameraSnapshot>,
    pub next_seq: u64,
    #[serde(default)]
    pub next_object_id: u64,
}

/// Preview data of one variant as seen by the scene.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VariantPreview {
    pub preview: Option<AssetId>,
    pub mesh: Option<AssetId>,
}

/// What is known about the job an instruction started.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JobOutcome {
    /// `None` when the job ended without producing variants.
    pub variants: Option<Vec<VariantPreview>>,
    pub selected: Option<u8>,
    /// Full-fidelity asset once the offline phase completed.
    pub final_asset: Option<AssetId>,
}

pub trait ResultResolver {
    /// Outcome of the job started by `instruction_id`, if one is known.
    fn outcome(&self, instruction_id: &str) -> Option<JobOutcome>;

    /// Local-space bounds of a cloud or mesh asset.
    fn asset_bounds(&self, _asset: &AssetId) -> Option<Aabb> {
        None
    }
}

/// Resolver that knows no jobs and no assets.
pub struct NoResults;

impl ResultResolver for NoResults {
    fn outcome(&self, _: &str) -> Option<JobOutcome> {
        None
    }
}

impl ResultResolver for AssetStore {
    fn outcome(&self, _: &str) -> Option<JobOutcome> {
        None
    }

    fn asset_bounds(&self, asset: &AssetId) -> Option<Aabb> {
        self.bounds(asset)
    }
}

impl<R: ResultResolver + ?Sized> ResultResolver for &R {
    fn outcome(&self, instruction_id: &str) -> Option<JobOutcome> {
        (**self).outcome(instruction_id)
    }

    fn asset_bounds(&self, asset: &AssetId) -> Option<Aabb> {
        (**self).asset_bounds(asset)
    }
}

/// Local bounds used for a freshly placed object of `kind`.
pub fn kind_bounds(kind: &ObjectKind, resolver: &dyn ResultResolver) -> Aabb {
    match kind {
        ObjectKind::PrimitiveArrangement { primitives } => primitives
            .iter()
            .map(|p| p.bounds(&TransformTRS::IDENTITY))
            .reduce(|a, b| a.union(&b))
            .unwrap_or_else(Aabb::unit),
        ObjectKind::Proxy2D { .. } => Aabb::unit(),
        other => other
            .asset()
            .and_then(|a| resolver.asset_bounds(a))
            .unwrap_or_else(Aabb::unit),
    }
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn object(&self, id: &ObjectId) -> Option<&SceneObject> {
        self.objects.iter().find(|o| &o.id == id)
    }

    pub fn object_mut(&mut self, id: &ObjectId) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| &o.id == id)
    }

    fn index_of(&self, id: &ObjectId) -> Result<usize, EditError> {
        self.objects
            .iter()
            .position(|o| &o.id == id)
            .ok_or_else(|| EditError::ObjectNotFound(id.clone()))
    }

    /// Next unused object id.
    pub fn peek_object_id(&self) -> ObjectId {
        let mut n = self.next_object_id;
        loop {
            let id = ObjectId(format!("obj-{n:04}"));
            if self.object(&id).is_none() {
                return id;
            }
            n += 1;
        }
    }

    fn fresh_object_id(&mut self) -> ObjectId {
        let id = self.peek_object_id();
        let n: u64 = id.0[4..].parse().unwrap_or(self.next_object_id);
        self.next_object_id = n + 1;
        id
    }

    fn claim_object_id(&mut self, requested: Option<&ObjectId>) -> Result<ObjectId, EditError> {
        match requested {
            Some(id) if self.object(id).is_some() => Err(EditError::DuplicateObjectId(id.clone())),
            Some(id) => Ok(id.clone()),
            None => Ok(self.fresh_object_id()),
        }
    }

    /// Applies one instruction in place. Returns the created or targeted
    /// object, if any. The scene is left untouched on error.
    pub fn apply(&mut self, instr: &EditInstruction, results: &dyn ResultResolver) -> Result<Option<ObjectId>, EditError> {
        instr.validate()?;
        if instr.seq < self.next_seq {
            return Err(EditError::MalformedInstruction(format!(
                "instruction {} has seq {} but the scene expects at least {}",
                instr.id, instr.seq, self.next_seq
            )));
        }
        let outcome = results.outcome(&instr.id);
        if instr.selected_variant.is_some() && outcome.as_ref().is_some_and(|o| o.variants.is_none()) {
            return Err(EditError::StaleVariant(instr.id.clone()));
        }
        let mut next = self.clone();
        let touched = next.apply_validated(instr, outcome, results)?;
        next.next_seq = instr.seq + 1;
        *self = next;
        Ok(touched)
    }

    fn apply_validated(
        &mut self,
        instr: &EditInstruction,
        outcome: Option<JobOutcome>,
        results: &dyn ResultResolver,
    ) -> Result<Option<ObjectId>, EditError> {
        use InstructionType::*;
        let target = instr.object_id.as_ref();
        match instr.kind {
            AddAsset => {
                let kind = added_kind(instr)?;
                let anchor_bounds = kind_bounds(&kind, results);
                let transform = instr
                    .transform
                    .unwrap_or_else(|| TransformTRS::from_translation(Vec3::new(0.0, -anchor_bounds.min.y, 0.0)));
                let id = self.claim_object_id(target)?;
                self.objects.push(SceneObject {
                    id: id.clone(),
                    kind,
                    transform,
                    annotation: None,
                    anchor_bounds,
                });
                Ok(Some(id))
            }
            Move => {
                let i = self.index_of(target.expect("validated"))?;
                self.objects[i].transform = instr.transform.expect("validated");
                Ok(Some(self.objects[i].id.clone()))
            }
            Duplicate => {
                let i = self.index_of(target.expect("validated"))?;
                let mut copy = self.objects[i].clone();
                copy.id = self.fresh_object_id();
                if let Some(t) = instr.transform {
                    copy.transform = t;
                }
                let id = copy.id.clone();
                self.objects.push(copy);
                Ok(Some(id))
            }
            Delete => {
                let i = self.index_of(target.expect("validated"))?;
                Ok(Some(self.objects.remove(i).id))
            }
            EditObject => {
                let i = self.index_of(target.expect("validated"))?;
                if !matches!(self.objects[i].kind, ObjectKind::Splat { .. }) {
                    return Err(EditError::MalformedInstruction(format!(
                        "EditObject {} targets {}, which is not a splat object",
                        instr.id, self.objects[i].id
                    )));
                }
                let view = OutcomeView::new(instr, outcome.as_ref());
                let obj = &mut self.objects[i];
                obj.annotation = Some(view.annotation(instr));
                if let Some(asset) = view.final_asset {
                    obj.kind = ObjectKind::Splat { asset: asset.clone() };
                    obj.anchor_bounds = results.asset_bounds(asset).unwrap_or(obj.anchor_bounds);
                }
                Ok(Some(obj.id.clone()))
            }
            GenerateSculpt => {
                let i = self.index_of(target.expect("validated"))?;
                if !matches!(self.objects[i].kind, ObjectKind::PrimitiveArrangement { .. }) {
                    return Err(EditError::MalformedInstruction(format!(
                        "GenerateSculpt {} targets {}, which is not a primitive arrangement",
                        instr.id, self.objects[i].id
                    )));
                }
                let view = OutcomeView::new(instr, outcome.as_ref());
                let obj = &mut self.objects[i];
                obj.annotation = Some(view.annotation(instr));
                if let Some(asset) = view.final_asset {
                    obj.kind = ObjectKind::Mesh { asset: asset.clone() };
                    obj.anchor_bounds = results.asset_bounds(asset).unwrap_or(obj.anchor_bounds);
                }
                Ok(Some(obj.id.clone()))
            }
            GeneratePrompt => {
                let view = OutcomeView::new(instr, outcome.as_ref());
                let kind = view.generated_kind();
                let anchor_bounds = kind_bounds(&kind, results);
                // Snap against the placeholder volume so the placement does not
                // depend on which stage of the job is known.
                let transform = instr
                    .transform
                    .unwrap_or_else(|| TransformTRS::from_translation(Vec3::new(0.0, -Aabb::unit().min.y, 0.0)));
                let id = self.claim_object_id(target)?;
                self.objects.push(SceneObject {
                    id: id.clone(),
                    kind,
                    transform,
                    annotation: Some(view.annotation(instr)),
                    anchor_bounds,
                });
                Ok(Some(id))
            }
            MagicCamera => {
                let camera: Camera = serde_json::from_value(instr.params["camera"].clone())
                    .map_err(|e| EditError::MalformedInstruction(format!("params.camera: {e}")))?;
                let view = OutcomeView::new(instr, outcome.as_ref());
                let mut annotation = view.annotation(instr);
                if let Some(asset) = view.final_asset {
                    annotation.preview_asset = Some(asset.clone());
                }
                self.snapshots.push(CameraSnapshot {
                    instruction_id: instr.id.clone(),
                    camera,
                    annotation,
                });
                Ok(None)
            }
        }
    }

    /// Re-derives everything a generative instruction contributed from a
    /// newer job outcome: annotations, proxy kinds and final assets. Only
    /// objects and snapshots still annotated by `instr` are touched;
    /// transforms are kept. Returns whether anything carried the annotation.
    pub fn refresh_outcome(&mut self, instr: &EditInstruction, outcome: &JobOutcome, results: &dyn ResultResolver) -> bool {
        let view = OutcomeView::new(instr, Some(outcome));
        let mut found = false;
        for obj in &mut self.objects {
            if obj.annotation.as_ref().is_none_or(|a| a.instruction_id != instr.id) {
                continue;
            }
            found = true;
            obj.annotation = Some(view.annotation(instr));
            match instr.kind {
                InstructionType::GeneratePrompt => {
                    obj.kind = view.generated_kind();
                    obj.anchor_bounds = kind_bounds(&obj.kind, results);
                }
                InstructionType::EditObject | InstructionType::GenerateSculpt => {
                    if let Some(asset) = view.final_asset {
                        obj.kind = if instr.kind == InstructionType::EditObject {
                            ObjectKind::Splat { asset: asset.clone() }
                        } else {
                            ObjectKind::Mesh { asset: asset.clone() }
                        };
                        obj.anchor_bounds = results.asset_bounds(asset).unwrap_or(obj.anchor_bounds);
                    }
                }
                _ => {}
            }
        }
        for snap in &mut self.snapshots {
            if snap.instruction_id != instr.id {
                continue;
            }
            found = true;
            snap.annotation = view.annotation(instr);
            if let Some(asset) = view.final_asset {
                snap.annotation.preview_asset = Some(asset.clone());
            }
        }
        found
    }

    pub fn to_canonical_json(&self) -> String {
        canonical::to_canonical_string(self).expect("scene serializes")
    }

    pub fn serialize(&self) -> Vec<u8> {
        self.to_canonical_json().into_bytes()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Scene, SceneParseError> {
        serde_json::from_slice(bytes).map_err(|e| SceneParseError {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// Pure form of [`Scene::apply`].
pub fn apply_edit(scene: &Scene, instr: &EditInstruction, results: &dyn ResultResolver) -> Result<Scene, EditError> {
    let mut next = scene.clone();
    next.apply(instr, results)?;
    Ok(next)
}

pub fn serialize_scene(scene: &Scene) -> Vec<u8> {
    scene.serialize()
}

pub fn deserialize_scene(bytes: &[u8]) -> Result<Scene, SceneParseError> {
    Scene::deserialize(bytes)
}

fn added_kind(instr: &EditInstruction) -> Result<ObjectKind, EditError> {
    let asset = || AssetId(instr.param_str("asset").unwrap_or_default().to_string());
    Ok(match instr.object_type.expect("validated") {
        ObjectKindTag::Splat => ObjectKind::Splat { asset: asset() },
        ObjectKindTag::Mesh => ObjectKind::Mesh { asset: asset() },
        ObjectKindTag::Proxy2D => ObjectKind::Proxy2D { image: Some(asset()) },
        ObjectKindTag::Proxy3D => ObjectKind::Proxy3D { mesh: asset() },
        ObjectKindTag::PrimitiveArrangement => {
            let primitives: Vec<Primitive> = serde_json::from_value(instr.params["primitives"].clone())
                .map_err(|e| EditError::MalformedInstruction(format!("params.primitives: {e}")))?;
            for p in &primitives {
                p.transform
                    .validate()
                    .map_err(|e| EditError::MalformedInstruction(format!("primitive transform: {e}")))?;
            }
            ObjectKind::PrimitiveArrangement { primitives }
        }
    })
}

/// The proxy/final state implied by an instruction plus its job outcome.
struct OutcomeView<'a> {
    chosen: Option<u8>,
    shown: Option<&'a VariantPreview>,
    final_asset: Option<&'a AssetId>,
}

impl<'a> OutcomeView<'a> {
    fn new(instr: &EditInstruction, outcome: Option<&'a JobOutcome>) -> Self {
        let chosen = instr.selected_variant.or(outcome.and_then(|o| o.selected));
        let shown = outcome
            .and_then(|o| o.variants.as_ref())
            .and_then(|v| v.get(chosen.unwrap_or(0) as usize));
        Self {
            chosen,
            shown,
            final_asset: outcome.and_then(|o| o.final_asset.as_ref()),
        }
    }

    fn annotation(&self, instr: &EditInstruction) -> SpatialAnnotation {
        SpatialAnnotation {
            instruction_id: instr.id.clone(),
            prompt: instr.prompt.clone().unwrap_or_default(),
            instruction_type: instr.kind,
            preview_asset: self.shown.and_then(|v| v.preview.clone()).or_else(|| instr.preview_asset.clone()),
            variant_index: self.chosen,
        }
    }

    fn generated_kind(&self) -> ObjectKind {
        if let Some(asset) = self.final_asset {
            return ObjectKind::Mesh { asset: asset.clone() };
        }
        match self.shown {
            Some(VariantPreview { mesh: Some(mesh), .. }) => ObjectKind::Proxy3D { mesh: mesh.clone() },
            Some(v) => ObjectKind::Proxy2D { image: v.preview.clone() },
            None => ObjectKind::Proxy2D { image: None },
        }
    }
}

/// Convenience for building `params.primitives`.
pub fn primitives_param(primitives: &[Primitive]) -> Value {
    serde_json::to_value(primitives).expect("primitives serialize")
}
