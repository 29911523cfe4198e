use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::assets::{AssetId, AssetStore};
use crate::image::RgbImage;
use crate::mesh::TriMesh;
use crate::splat::parse_ply;

use super::{AssetRole, Backend, GenError, GenerationRequest, GenerationResult, ModuleKind};

/// Forwards requests to `POST {base_url}/{kind}` and stores the returned
/// assets.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    timeouts: BTreeMap<ModuleKind, Duration>,
}

#[derive(Deserialize)]
struct WireResponse {
    assets: Vec<WireAsset>,
}

#[derive(Deserialize)]
struct WireAsset {
    role: AssetRole,
    #[serde(default)]
    mime: String,
    #[serde(rename = "data-base64")]
    data: String,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeouts: BTreeMap::new(),
        }
    }

    pub fn with_timeout(mut self, kind: ModuleKind, timeout: Duration) -> Self {
        self.timeouts.insert(kind, timeout);
        self
    }

    /// Sets every online kind to `online` and every offline kind to `offline`.
    pub fn with_timeouts(mut self, online: Duration, offline: Duration) -> Self {
        for kind in ModuleKind::ALL {
            self.timeouts.insert(kind, if kind.is_offline() { offline } else { online });
        }
        self
    }

    pub fn timeout(&self, kind: ModuleKind) -> Duration {
        self.timeouts.get(&kind).copied().unwrap_or_else(|| kind.default_timeout())
    }

    pub fn url(&self, kind: ModuleKind) -> String {
        format!("{}/{}", self.base_url, kind.kebab())
    }

    fn wire_body(req: &GenerationRequest, store: &AssetStore) -> Result<String, GenError> {
        let mut inputs = serde_json::Map::new();
        for (role, id) in [("image", &req.input_image), ("depth", &req.input_depth), ("cloud", &req.input_cloud)] {
            if let Some(id) = id {
                let asset = store.get(id)?;
                inputs.insert(role.to_string(), Value::String(B64.encode(asset.bytes.as_slice())));
            }
        }
        let body = json!({
            "prompt": req.prompt,
            "seed": req.seed,
            "params": req.params,
            "inputs": inputs,
        });
        Ok(body.to_string())
    }

    fn store_asset(asset: &WireAsset, store: &AssetStore) -> Result<AssetId, GenError> {
        let bad = |what: String| GenError::BadResponse(what);
        let bytes = B64
            .decode(asset.data.trim())
            .map_err(|e| bad(format!("{:?} is not base64: {e}", asset.role)))?;
        let id = match asset.role {
            AssetRole::PreviewImage => {
                let image = RgbImage::decode(&bytes).map_err(|e| bad(format!("preview image ({}): {e}", asset.mime)))?;
                store.put_image(&image)?
            }
            AssetRole::LowFiMesh | AssetRole::FullMesh => {
                let text = String::from_utf8(bytes).map_err(|_| bad("mesh is not UTF-8".into()))?;
                let mesh = TriMesh::from_obj(&text).map_err(|e| bad(format!("mesh: {e}")))?;
                store.put_mesh(&mesh)?
            }
            AssetRole::EditedCloud => {
                let cloud = parse_ply(&bytes).map_err(|e| bad(format!("cloud: {e}")))?;
                store.put_cloud(&cloud)?
            }
            AssetRole::EnrichedPrompt => {
                let text = String::from_utf8(bytes).map_err(|_| bad("prompt is not UTF-8".into()))?;
                store.put_text(&text)?
            }
        };
        Ok(id)
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn supports(&self, _kind: ModuleKind) -> bool {
        true
    }

    fn run(&self, req: &GenerationRequest, store: &AssetStore) -> Result<GenerationResult, GenError> {
        let body = Self::wire_body(req, store)?;
        let timeout = self.timeout(req.kind);
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let start = Instant::now();
        let classify = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => GenError::Timeout {
                kind: req.kind,
                elapsed: start.elapsed(),
            },
            ureq::Error::Io(ref io) if io.kind() == std::io::ErrorKind::TimedOut => GenError::Timeout {
                kind: req.kind,
                elapsed: start.elapsed(),
            },
            other => GenError::BackendUnavailable(other.to_string()),
        };
        let mut resp = agent
            .post(self.url(req.kind))
            .header("content-type", "application/json")
            .send(body)
            .map_err(classify)?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(512 << 20)
            .read_to_string()
            .map_err(classify)?;
        if !(200..300).contains(&status) {
            return Err(GenError::BackendError { status, body: text });
        }
        let wire: WireResponse =
            serde_json::from_str(&text).map_err(|e| GenError::BadResponse(format!("response schema: {e}")))?;
        let assets = wire
            .assets
            .iter()
            .map(|a| Ok((a.role, Self::store_asset(a, store)?)))
            .collect::<Result<Vec<_>, GenError>>()?;
        let result = GenerationResult {
            kind: req.kind,
            assets,
            seed: req.seed,
        };
        result.validate()?;
        Ok(result)
    }
}
