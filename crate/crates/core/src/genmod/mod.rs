//! Generative module contract: request/result types, dispatch with
//! timeouts, the three-variant schedule, deterministic mocks and an HTTP
//! adapter for real model servers.

mod http;
mod mock;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::assets::{AssetError, AssetId, AssetStore};

pub use http::HttpBackend;
pub use mock::{
    enrich_descriptors, fnv1a64, hsv_to_rgb, mock_enrich_prompt, mock_image_to_3d, mock_splat_edit, mock_stylize,
    mock_text_to_3d_preview, preview_camera, prompt_hue, rgb_to_hsv, MockBackend, TextTo3DPreview, ENRICH_VOCABULARY,
    MAX_PREVIEW_SHAPES, MIN_PREVIEW_SHAPES,
};

/// Number of variants every generative job produces.
pub const VARIANT_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModuleKind {
    InstructImageEdit,
    TextTo3DPreview,
    ImageStylize,
    ImageTo3D,
    SplatEdit,
    PromptEnrich,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 6] = [
        Self::InstructImageEdit,
        Self::TextTo3DPreview,
        Self::ImageStylize,
        Self::ImageTo3D,
        Self::SplatEdit,
        Self::PromptEnrich,
    ];

    /// Path segment used by the HTTP wire protocol.
    pub fn kebab(self) -> &'static str {
        match self {
            Self::InstructImageEdit => "instruct-image-edit",
            Self::TextTo3DPreview => "text-to-3d-preview",
            Self::ImageStylize => "image-stylize",
            Self::ImageTo3D => "image-to-3d",
            Self::SplatEdit => "splat-edit",
            Self::PromptEnrich => "prompt-enrich",
        }
    }

    /// Full-fidelity kinds run in the offline phase.
    pub fn is_offline(self) -> bool {
        matches!(self, Self::ImageTo3D | Self::SplatEdit)
    }

    pub fn default_timeout(self) -> Duration {
        if self.is_offline() {
            Duration::from_secs(1800)
        } else {
            Duration::from_secs(30)
        }
    }

    /// Roles a result of this kind must carry.
    pub fn required_roles(self) -> &'static [AssetRole] {
        match self {
            Self::InstructImageEdit | Self::ImageStylize => &[AssetRole::PreviewImage],
            Self::TextTo3DPreview => &[AssetRole::PreviewImage, AssetRole::LowFiMesh],
            Self::ImageTo3D => &[AssetRole::FullMesh],
            Self::SplatEdit => &[AssetRole::EditedCloud],
            Self::PromptEnrich => &[AssetRole::EnrichedPrompt],
        }
    }

    fn needs_prompt(self) -> bool {
        !matches!(self, Self::ImageTo3D)
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kebab())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssetRole {
    PreviewImage,
    LowFiMesh,
    FullMesh,
    EditedCloud,
    EnrichedPrompt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub kind: ModuleKind,
    pub prompt: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_image: Option<AssetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_depth: Option<AssetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_cloud: Option<AssetId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
}

impl GenerationRequest {
    pub fn new(kind: ModuleKind, prompt: impl Into<String>, seed: u64) -> Self {
        Self {
            kind,
            prompt: prompt.into(),
            seed,
            input_image: None,
            input_depth: None,
            input_cloud: None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_image(mut self, id: AssetId) -> Self {
        self.input_image = Some(id);
        self
    }

    pub fn with_depth(mut self, id: AssetId) -> Self {
        self.input_depth = Some(id);
        self
    }

    pub fn with_cloud(mut self, id: AssetId) -> Self {
        self.input_cloud = Some(id);
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Checks the inputs each kind requires.
    pub fn validate(&self) -> Result<(), GenError> {
        if self.kind.needs_prompt() && self.prompt.trim().is_empty() {
            return Err(GenError::EmptyPrompt);
        }
        let missing = |what: &str| Err(GenError::MalformedRequest(format!("{} requires {what}", self.kind)));
        match self.kind {
            ModuleKind::ImageStylize if self.input_image.is_none() || self.input_depth.is_none() => {
                missing("input_image and input_depth")
            }
            ModuleKind::InstructImageEdit | ModuleKind::ImageTo3D if self.input_image.is_none() => missing("input_image"),
            ModuleKind::SplatEdit if self.input_cloud.is_none() => missing("input_cloud"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub kind: ModuleKind,
    pub assets: Vec<(AssetRole, AssetId)>,
    pub seed: u64,
}

impl GenerationResult {
    pub fn asset(&self, role: AssetRole) -> Option<&AssetId> {
        self.assets.iter().find(|(r, _)| *r == role).map(|(_, id)| id)
    }

    /// At least one asset, every required role present, no foreign roles.
    pub fn validate(&self) -> Result<(), GenError> {
        let required = self.kind.required_roles();
        let bad = |msg: String| Err(GenError::BadResponse(msg));
        if self.assets.is_empty() {
            return bad(format!("{} result has no assets", self.kind));
        }
        if let Some((role, _)) = self.assets.iter().find(|(r, _)| !required.contains(r)) {
            return bad(format!("{} result carries unexpected role {role:?}", self.kind));
        }
        if let Some(role) = required.iter().find(|r| self.asset(**r).is_none()) {
            return bad(format!("{} result lacks role {role:?}", self.kind));
        }
        Ok(())
    }
}

/// Three results with consumed seeds `base_seed + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSet {
    pub variants: Vec<GenerationResult>,
    pub base_seed: u64,
}

impl VariantSet {
    pub fn seeds(&self) -> Vec<u64> {
        self.variants.iter().map(|v| v.seed).collect()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GenError {
    #[error("backend does not support {0}")]
    UnsupportedKind(ModuleKind),
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("image is {image:?} but depth is {depth:?}")]
    DimensionMismatch { image: (u32, u32), depth: (u32, u32) },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend returned status {status}: {body}")]
    BackendError { status: u16, body: String },
    #[error("{kind} timed out after {elapsed:?}")]
    Timeout { kind: ModuleKind, elapsed: Duration },
    #[error("bad backend response: {0}")]
    BadResponse(String),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error("variant {index}: {source}")]
    Variant {
        index: usize,
        #[source]
        source: Box<GenError>,
    },
}

/// A generation module server. Implementations must be reentrant.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn supports(&self, kind: ModuleKind) -> bool;

    /// Runs one request; output assets are written to `store`.
    fn run(&self, req: &GenerationRequest, store: &AssetStore) -> Result<GenerationResult, GenError>;
}

/// Validates, runs and checks the result of one request.
pub fn dispatch(backend: &dyn Backend, req: &GenerationRequest, store: &AssetStore) -> Result<GenerationResult, GenError> {
    req.validate()?;
    if !backend.supports(req.kind) {
        return Err(GenError::UnsupportedKind(req.kind));
    }
    let result = backend.run(req, store)?;
    if result.kind != req.kind {
        return Err(GenError::BadResponse(format!("asked for {}, got {}", req.kind, result.kind)));
    }
    result.validate()?;
    Ok(result)
}

/// [`dispatch`] on a helper thread; returns `Timeout` once `timeout`
/// elapses. The abandoned run finishes in the background.
pub fn dispatch_with_timeout(
    backend: Arc<dyn Backend>,
    req: &GenerationRequest,
    store: &AssetStore,
    timeout: Duration,
) -> Result<GenerationResult, GenError> {
    req.validate()?;
    let (tx, rx) = mpsc::channel();
    let (req_owned, store) = (req.clone(), store.clone());
    let start = Instant::now();
    std::thread::spawn(move || {
        let _ = tx.send(dispatch(backend.as_ref(), &req_owned, &store));
    });
    match rx.recv_timeout(timeout) {
        Ok(result) => result,
        Err(mpsc::RecvTimeoutError::Timeout) => Err(GenError::Timeout {
            kind: req.kind,
            elapsed: start.elapsed(),
        }),
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            Err(GenError::BackendUnavailable(format!("{} run panicked", req.kind)))
        }
    }
}

/// Runs the three seeds concurrently. The first failing variant (by index)
/// is reported.
pub fn generate_variants(
    backend: Arc<dyn Backend>,
    req: &GenerationRequest,
    store: &AssetStore,
    timeout: Duration,
) -> Result<VariantSet, GenError> {
    req.validate()?;
    let base = req.seed;
    let outcomes: Vec<Result<GenerationResult, GenError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..VARIANT_COUNT as u64)
            .map(|i| {
                let backend = backend.clone();
                let req = req.with_seed(base.wrapping_add(i));
                s.spawn(move || dispatch_with_timeout(backend, &req, store, timeout))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(GenError::BackendUnavailable("variant thread panicked".into()))))
            .collect()
    });
    let mut variants = Vec::with_capacity(VARIANT_COUNT);
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(mut result) => {
                result.seed = base.wrapping_add(index as u64);
                variants.push(result);
            }
            Err(e) => {
                return Err(GenError::Variant {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(VariantSet { variants, base_seed: base })
}

/// Asks `backend` for a longer prompt describing `scene_image`.
pub fn enrich_prompt(
    prompt: &str,
    scene_image: Option<&AssetId>,
    backend: &dyn Backend,
    store: &AssetStore,
) -> Result<String, GenError> {
    let mut req = GenerationRequest::new(ModuleKind::PromptEnrich, prompt, 0);
    req.input_image = scene_image.cloned();
    let result = dispatch(backend, &req, store)?;
    let id = result.asset(AssetRole::EnrichedPrompt).expect("validated");
    Ok(store.load_text(id)?)
}
