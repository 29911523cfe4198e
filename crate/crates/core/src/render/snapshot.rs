use crate::assets::{AssetError, AssetStore};
use crate::mesh::Primitive;
use crate::scene::{ObjectKind, Scene};

use super::camera::Camera;
use super::splats::{composite, project_splat_with, SplatFootprint};
use super::surfaces::{render_surfaces, Billboard, SurfaceSet};
use super::{LinearImage, RenderError, RenderSettings, RenderTarget};

pub fn compose_snapshot(scene: &Scene, cam: &Camera, assets: &AssetStore) -> Result<RenderTarget, RenderError> {
    Ok(compose_snapshot_with(scene, cam, assets, &RenderSettings::default())?.quantize())
}

/// Renders every object of `scene`: splat objects in one compositing pass,
/// everything else as opaque surfaces, merged per pixel by depth.
pub fn compose_snapshot_with(
    scene: &Scene,
    cam: &Camera,
    assets: &AssetStore,
    settings: &RenderSettings,
) -> Result<LinearImage, RenderError> {
    cam.validate()?;
    let missing = |e: AssetError| match e {
        AssetError::Missing(id) => RenderError::MissingAsset(id),
        other => RenderError::Asset(other),
    };
    let mut footprints: Vec<SplatFootprint> = Vec::new();
    let mut surfaces = SurfaceSet::default();
    for obj in &scene.objects {
        match &obj.kind {
            ObjectKind::Splat { asset } => {
                let cloud = assets.load_cloud(asset).map_err(missing)?;
                footprints.extend(
                    cloud
                        .splats
                        .iter()
                        .filter_map(|s| project_splat_with(cam, s, &obj.transform, settings.low_pass)),
                );
            }
            ObjectKind::Mesh { asset } | ObjectKind::Proxy3D { mesh: asset } => {
                let mesh = assets.load_mesh(asset).map_err(missing)?;
                surfaces.meshes.push(mesh.transformed(&obj.transform));
            }
            ObjectKind::PrimitiveArrangement { primitives } => {
                surfaces.primitives.extend(
                    primitives
                        .iter()
                        .map(|p| Primitive::new(p.shape, obj.transform.compose(&p.transform))),
                );
            }
            ObjectKind::Proxy2D { image } => {
                let image = match image {
                    Some(id) => Some(assets.load_image(id).map_err(missing)?),
                    None => None,
                };
                let bounds = obj.world_bounds();
                let e = bounds.extent();
                surfaces.billboards.push(Billboard {
                    center: bounds.center(),
                    half: 0.5 * e.x.max(e.y).max(e.z).max(1e-3),
                    image,
                });
            }
        }
    }
    let surf = (!surfaces.is_empty()).then(|| render_surfaces(cam, &surfaces));
    Ok(composite(cam.width, cam.height, &footprints, settings, surf.as_ref()))
}
