//! Content-addressed asset storage shared by the scene, renderer and backends.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::image::{DepthMap, RgbImage};
use crate::mesh::TriMesh;
use crate::splat::{parse_ply, write_ply, Aabb, SplatCloud};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssetId(pub String);

impl AssetId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AssetId {
    fn from(s: &str) -> Self {
        AssetId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MediaType {
    Ppm,
    Pgm,
    Obj,
    Ply,
    Text,
}

impl MediaType {
    pub const ALL: [MediaType; 5] = [Self::Ppm, Self::Pgm, Self::Obj, Self::Ply, Self::Text];

    pub fn mime(self) -> &'static str {
        match self {
            Self::Ppm => "image/x-portable-pixmap",
            Self::Pgm => "image/x-portable-graymap",
            Self::Obj => "model/obj",
            Self::Ply => "application/octet-stream",
            Self::Text => "text/plain; charset=utf-8",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::Ppm => "ppm",
            Self::Pgm => "pgm",
            Self::Obj => "obj",
            Self::Ply => "ply",
            Self::Text => "txt",
        }
    }

    pub fn from_extension(ext: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.extension() == ext)
    }
}

#[derive(Debug, Clone)]
pub struct Asset {
    pub media: MediaType,
    pub bytes: Arc<Vec<u8>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssetError {
    #[error("asset {0} not found")]
    Missing(AssetId),
    #[error("asset {id} is {actual:?}, expected {expected:?}")]
    WrongMedia {
        id: AssetId,
        expected: MediaType,
        actual: MediaType,
    },
    #[error("asset {id} could not be decoded: {message}")]
    Decode { id: AssetId, message: String },
    #[error("asset io: {0}")]
    Io(String),
}

#[derive(Default)]
struct Inner {
    assets: BTreeMap<AssetId, Asset>,
    dir: Option<PathBuf>,
}

/// Thread-safe handle; clones share the same storage.
#[derive(Clone, Default)]
pub struct AssetStore {
    inner: Arc<RwLock<Inner>>,
}

impl fmt::Debug for AssetStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AssetStore").field("len", &self.len()).finish()
    }
}

/// Id of `bytes` stored as `media`: the first 128 bits of SHA-256 over the
/// media extension, a NUL byte and the content, in lowercase hex.
pub fn content_id(media: MediaType, bytes: &[u8]) -> AssetId {
    let mut h = Sha256::new();
    h.update(media.extension().as_bytes());
    h.update([0u8]);
    h.update(bytes);
    let digest = h.finalize();
    let mut s = String::with_capacity(32);
    for b in &digest[..16] {
        s.push_str(&format!("{b:02x}"));
    }
    AssetId(s)
}

impl AssetStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a directory-backed store and loads every
    /// `<id>.<ext>` file it contains.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, AssetError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| AssetError::Io(e.to_string()))?;
        let mut assets = BTreeMap::new();
        let entries = std::fs::read_dir(&dir).map_err(|e| AssetError::Io(e.to_string()))?;
        for entry in entries {
            let path = entry.map_err(|e| AssetError::Io(e.to_string()))?.path();
            let (Some(stem), Some(ext)) = (
                path.file_stem().and_then(|s| s.to_str()),
                path.extension().and_then(|s| s.to_str()),
            ) else {
                continue;
            };
            let Some(media) = MediaType::from_extension(ext) else {
                continue;
            };
            let bytes = std::fs::read(&path).map_err(|e| AssetError::Io(e.to_string()))?;
            assets.insert(
                AssetId(stem.to_string()),
                Asset {
                    media,
                    bytes: Arc::new(bytes),
                },
            );
        }
        Ok(Self {
            inner: Arc::new(RwLock::new(Inner { assets, dir: Some(dir) })),
        })
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<AssetId> {
        self.inner.read().unwrap().assets.keys().cloned().collect()
    }

    pub fn contains(&self, id: &AssetId) -> bool {
        self.inner.read().unwrap().assets.contains_key(id)
    }

    pub fn put(&self, media: MediaType, bytes: Vec<u8>) -> Result<AssetId, AssetError> {
        let id = content_id(media, &bytes);
        let mut inner = self.inner.write().unwrap();
        if inner.assets.contains_key(&id) {
            return Ok(id);
        }
        if let Some(dir) = &inner.dir {
            let path = dir.join(format!("{}.{}", id, media.extension()));
            std::fs::write(&path, &bytes).map_err(|e| AssetError::Io(format!("{}: {e}", path.display())))?;
        }
        inner.assets.insert(
            id.clone(),
            Asset {
                media,
                bytes: Arc::new(bytes),
            },
        );
        Ok(id)
    }

    pub fn get(&self, id: &AssetId) -> Result<Asset, AssetError> {
        self.inner
            .read()
            .unwrap()
            .assets
            .get(id)
            .cloned()
            .ok_or_else(|| AssetError::Missing(id.clone()))
    }

    fn get_as(&self, id: &AssetId, expected: MediaType) -> Result<Arc<Vec<u8>>, AssetError> {
        let asset = self.get(id)?;
        if asset.media != expected {
            return Err(AssetError::WrongMedia {
                id: id.clone(),
                expected,
                actual: asset.media,
            });
        }
        Ok(asset.bytes)
    }

    fn decode_err(id: &AssetId, e: impl fmt::Display) -> AssetError {
        AssetError::Decode {
            id: id.clone(),
            message: e.to_string(),
        }
    }

    pub fn put_cloud(&self, cloud: &SplatCloud) -> Result<AssetId, AssetError> {
        self.put(MediaType::Ply, write_ply(cloud))
    }

    pub fn load_cloud(&self, id: &AssetId) -> Result<SplatCloud, AssetError> {
        let bytes = self.get_as(id, MediaType::Ply)?;
        parse_ply(&bytes).map_err(|e| Self::decode_err(id, e))
    }

    pub fn put_image(&self, image: &RgbImage) -> Result<AssetId, AssetError> {
        self.put(MediaType::Ppm, image.to_ppm())
    }

    pub fn load_image(&self, id: &AssetId) -> Result<RgbImage, AssetError> {
        let bytes = self.get_as(id, MediaType::Ppm)?;
        RgbImage::from_ppm(&bytes).map_err(|e| Self::decode_err(id, e))
    }

    pub fn put_depth(&self, depth: &DepthMap, near: f32, far: f32) -> Result<AssetId, AssetError> {
        self.put(MediaType::Pgm, depth.to_pgm(near, far))
    }

    pub fn load_depth(&self, id: &AssetId, near: f32, far: f32) -> Result<DepthMap, AssetError> {
        let bytes = self.get_as(id, MediaType::Pgm)?;
        DepthMap::from_pgm(&bytes, near, far).map_err(|e| Self::decode_err(id, e))
    }

    pub fn put_mesh(&self, mesh: &TriMesh) -> Result<AssetId, AssetError> {
        self.put(MediaType::Obj, mesh.to_obj().into_bytes())
    }

    pub fn load_mesh(&self, id: &AssetId) -> Result<TriMesh, AssetError> {
        let bytes = self.get_as(id, MediaType::Obj)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Self::decode_err(id, e))?;
        TriMesh::from_obj(text).map_err(|e| Self::decode_err(id, e))
    }

    pub fn put_text(&self, text: &str) -> Result<AssetId, AssetError> {
        self.put(MediaType::Text, text.as_bytes().to_vec())
    }

    pub fn load_text(&self, id: &AssetId) -> Result<String, AssetError> {
        let bytes = self.get_as(id, MediaType::Text)?;
        String::from_utf8(bytes.to_vec()).map_err(|e| Self::decode_err(id, e))
    }

    /// Local-space bounds of a cloud or mesh asset.
    pub fn bounds(&self, id: &AssetId) -> Option<Aabb> {
        match self.get(id).ok()?.media {
            MediaType::Ply => self.load_cloud(id).ok()?.bounds(),
            MediaType::Obj => self.load_mesh(id).ok()?.bounds(),
            _ => None,
        }
    }
}
