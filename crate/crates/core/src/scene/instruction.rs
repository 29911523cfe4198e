use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assets::AssetId;
use crate::splat::TransformTRS;

use super::EditError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstructionType {
    AddAsset,
    Move,
    Duplicate,
    Delete,
    EditObject,
    GeneratePrompt,
    GenerateSculpt,
    MagicCamera,
}

impl InstructionType {
    /// Instructions that start a generative job instead of applying at once.
    pub fn is_generative(self) -> bool {
        matches!(
            self,
            Self::EditObject | Self::GeneratePrompt | Self::GenerateSculpt | Self::MagicCamera
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectKindTag {
    Splat,
    Mesh,
    PrimitiveArrangement,
    Proxy2D,
    Proxy3D,
}

/// One logged user action; one JSON object per line of `edits.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditInstruction {
    pub id: String,
    pub seq: u64,
    pub timestamp_ms: u64,
    #[serde(rename = "type")]
    pub kind: InstructionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformTRS>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_type: Option<ObjectKindTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preview_asset: Option<AssetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_variant: Option<u8>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
}

impl EditInstruction {
    /// Bare instruction with the given identity and type; optional fields empty.
    pub fn new(id: impl Into<String>, seq: u64, kind: InstructionType) -> Self {
        Self {
            id: id.into(),
            seq,
            timestamp_ms: 0,
            kind,
            object_id: None,
            prompt: None,
            transform: None,
            object_type: None,
            preview_asset: None,
            selected_variant: None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_object(mut self, id: impl Into<String>) -> Self {
        self.object_id = Some(ObjectId(id.into()));
        self
    }

    pub fn with_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.prompt = Some(prompt.into());
        self
    }

    pub fn with_transform(mut self, t: TransformTRS) -> Self {
        self.transform = Some(t);
        self
    }

    pub fn with_object_type(mut self, tag: ObjectKindTag) -> Self {
        self.object_type = Some(tag);
        self
    }

    pub fn with_param(mut self, key: &str, value: Value) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_selected_variant(mut self, index: u8) -> Self {
        self.selected_variant = Some(index);
        self
    }

    pub fn param_str(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(Value::as_str)
    }

    pub fn param_u64(&self, key: &str) -> Option<u64> {
        self.params.get(key).and_then(Value::as_u64)
    }

    fn malformed(&self, what: &str) -> EditError {
        EditError::MalformedInstruction(format!("{:?} {}: {what}", self.kind, self.id))
    }

    fn require_object(&self) -> Result<&ObjectId, EditError> {
        self.object_id.as_ref().ok_or_else(|| self.malformed("object_id is required"))
    }

    fn require_prompt(&self) -> Result<&str, EditError> {
        match self.prompt.as_deref() {
            Some(p) if !p.trim().is_empty() => Ok(p),
            Some(_) => Err(self.malformed("prompt must not be empty")),
            None => Err(self.malformed("prompt is required")),
        }
    }

    fn require_transform(&self) -> Result<&TransformTRS, EditError> {
        self.transform.as_ref().ok_or_else(|| self.malformed("transform is required"))
    }

    /// Checks the per-type required fields.
    pub fn validate(&self) -> Result<(), EditError> {
        use InstructionType::*;
        if self.id.is_empty() {
            return Err(self.malformed("id is required"));
        }
        if let Some(t) = &self.transform {
            t.validate().map_err(|e| self.malformed(&e.to_string()))?;
        }
        match self.selected_variant {
            Some(_) if !self.kind.is_generative() => {
                return Err(self.malformed("selected_variant only applies to generative instructions"))
            }
            Some(i) if i > 2 => return Err(self.malformed("selected_variant must be 0, 1 or 2")),
            _ => {}
        }
        match self.kind {
            Move => {
                self.require_object()?;
                self.require_transform()?;
            }
            Delete | Duplicate => {
                self.require_object()?;
            }
            AddAsset => {
                let tag = self.object_type.ok_or_else(|| self.malformed("object_type is required"))?;
                if tag == ObjectKindTag::PrimitiveArrangement {
                    if !self.params.get("primitives").is_some_and(Value::is_array) {
                        return Err(self.malformed("params.primitives is required for arrangements"));
                    }
                } else if self.param_str("asset").is_none() {
                    return Err(self.malformed("params.asset is required"));
                }
            }
            EditObject | GenerateSculpt => {
                self.require_object()?;
                self.require_prompt()?;
            }
            GeneratePrompt => {
                self.require_prompt()?;
            }
            MagicCamera => {
                self.require_prompt()?;
                if !self.params.contains_key("camera") {
                    return Err(self.malformed("params.camera is required"));
                }
            }
        }
        Ok(())
    }
}
