use serde::{Deserialize, Serialize};

use super::math::{Mat3, Quat, Vec3};
use super::SplatError;

/// Number of higher-order SH coefficients (all three channels) per degree.
pub const SH_REST_LEN: [usize; 4] = [0, 9, 24, 45];

/// Zeroth-order spherical harmonic basis constant.
pub const SH_C0: f64 = 0.282_094_791_77;

pub fn sh_rest_len(degree: u8) -> Option<usize> {
    SH_REST_LEN.get(degree as usize).copied()
}

pub fn sh_degree_for_len(len: usize) -> Option<u8> {
    SH_REST_LEN.iter().position(|&n| n == len).map(|d| d as u8)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One Gaussian primitive with the parameterization used by 3DGS trainers.
///
/// `sh_rest` is stored in file order: one block per color channel, each
/// holding that channel's higher-order coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSplat {
    pub position: Vec3,
    pub rotation: Quat,
    /// Natural log of the per-axis standard deviation.
    pub log_scale: Vec3,
    pub opacity_logit: f32,
    pub color_dc: [f32; 3],
    pub sh_rest: Vec<f32>,
}

impl GaussianSplat {
    /// Unit-scale, half-opaque, mid-gray splat at `position`.
    pub fn at(position: Vec3) -> Self {
        Self {
            position,
            rotation: Quat::IDENTITY,
            log_scale: Vec3::ZERO,
            opacity_logit: 0.0,
            color_dc: [0.0; 3],
            sh_rest: Vec::new(),
        }
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit as f64)
    }

    /// DC color decoded to linear RGB, unclamped.
    pub fn base_color(&self) -> [f64; 3] {
        self.color_dc.map(|c| 0.5 + SH_C0 * c as f64)
    }

    /// World-space covariance `R · diag(exp(2·log_scale)) · Rᵀ`.
    pub fn covariance(&self) -> Mat3 {
        covariance_of(self)
    }
}

pub fn covariance_of(splat: &GaussianSplat) -> Mat3 {
    let r = splat.rotation.to_mat3();
    let [lx, ly, lz] = splat.log_scale.to_f64();
    let d = Mat3::diag([(2.0 * lx).exp(), (2.0 * ly).exp(), (2.0 * lz).exp()]);
    let mut m = r * d * r.transpose();
    // Exact symmetry.
    for i in 0..3 {
        for j in (i + 1)..3 {
            let v = 0.5 * (m.0[i][j] + m.0[j][i]);
            m.0[i][j] = v;
            m.0[j][i] = v;
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplatCloud {
    pub splats: Vec<GaussianSplat>,
    pub sh_degree: u8,
}

impl SplatCloud {
    pub fn new(splats: Vec<GaussianSplat>, sh_degree: u8) -> Result<Self, SplatError> {
        let cloud = Self { splats, sh_degree };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn empty(sh_degree: u8) -> Self {
        Self {
            splats: Vec::new(),
            sh_degree,
        }
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn validate(&self) -> Result<(), SplatError> {
        let expected = sh_rest_len(self.sh_degree).ok_or(SplatError::InvalidShDegree(self.sh_degree))?;
        for (index, s) in self.splats.iter().enumerate() {
            if s.sh_rest.len() != expected {
                return Err(SplatError::ShLengthMismatch {
                    index,
                    expected,
                    actual: s.sh_rest.len(),
                });
            }
            if !s.position.is_finite() || !s.log_scale.is_finite() || !s.opacity_logit.is_finite() {
                return Err(SplatError::NonFinite(index));
            }
            if !s.rotation.is_unit() {
                return Err(SplatError::NonUnitRotation(index));
            }
        }
        Ok(())
    }

    /// Bounds of the splat centers, `None` when empty.
    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.splats.iter().map(|s| s.position))
    }
}

/// Translation, rotation and uniform scale, applied as `t + s · R(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformTRS {
    #[serde(rename = "t")]
    pub translation: Vec3,
    #[serde(rename = "r")]
    pub rotation: Quat,
    #[serde(rename = "s")]
    pub scale: f32,
}

impl Default for TransformTRS {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TransformTRS {
    pub const IDENTITY: TransformTRS = TransformTRS {
        translation: Vec3::ZERO,
        rotation: Quat::IDENTITY,
        scale: 1.0,
    };

    pub fn new(translation: Vec3, rotation: Quat, scale: f32) -> Result<Self, SplatError> {
        let t = Self {
            translation,
            rotation,
            scale,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            translation,
            ..Self::IDENTITY
        }
    }

    pub fn validate(&self) -> Result<(), SplatError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(SplatError::NonPositiveScale(self.scale));
        }
        if !self.rotation.is_unit() {
            return Err(SplatError::NonUnitTransformRotation);
        }
        if !self.translation.is_finite() {
            return Err(SplatError::NonFiniteTranslation);
        }
        Ok(())
    }

    /// Applies the transform to a point, evaluated in `f64`.
    pub fn apply_point_f64(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotation.to_mat3().mul_vec(p);
        let s = self.scale as f64;
        let t = self.translation.to_f64();
        [s * r[0] + t[0], s * r[1] + t[1], s * r[2] + t[2]]
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        Vec3::from_f64(self.apply_point_f64(p.to_f64()))
    }

    /// `self ∘ inner`: the transform that applies `inner` first, then `self`.
    pub fn compose(&self, inner: &TransformTRS) -> TransformTRS {
        TransformTRS {
            translation: Vec3::from_f64(self.apply_point_f64(inner.translation.to_f64())),
            rotation: self.rotation.mul(inner.rotation),
            scale: (self.scale as f64 * inner.scale as f64) as f32,
        }
    }
}

/// Axis-aligned box with closed bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self, SplatError> {
        if !(min.is_finite() && max.is_finite()) || min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(SplatError::InvalidBox);
        }
        Ok(Self { min, max })
    }

    /// Cube of side 1 centered on the origin.
    pub fn unit() -> Self {
        Self {
            min: Vec3::splat(-0.5),
            max: Vec3::splat(0.5),
        }
    }

    pub fn from_points(points: impl IntoIterator<Item = Vec3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
        Some(Self { min, max })
    }

    pub fn is_valid(&self) -> bool {
        Aabb::new(self.min, self.max).is_ok()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max).scale(0.5)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }

    /// Box enclosing the transformed corners.
    pub fn transformed(&self, t: &TransformTRS) -> Aabb {
        let corners = self.corners().map(|c| t.apply_point(c));
        Aabb::from_points(corners).unwrap_or(*self)
    }
}

/// Applies `t` to every splat: positions are moved, orientations rotated and
/// log-scales shifted by `ln(scale)`. Opacity and color are untouched.
pub fn transform_cloud(cloud: &SplatCloud, t: &TransformTRS) -> Result<SplatCloud, SplatError> {
    if !(t.scale > 0.0 && t.scale.is_finite()) {
        return Err(SplatError::NonPositiveScale(t.scale));
    }
    let ln_s = (t.scale as f64).ln();
    let splats = cloud
        .splats
        .iter()
        .map(|s| {
            let [lx, ly, lz] = s.log_scale.to_f64();
            GaussianSplat {
                position: t.apply_point(s.position),
                rotation: t.rotation.mul(s.rotation),
                log_scale: Vec3::from_f64([lx + ln_s, ly + ln_s, lz + ln_s]),
                opacity_logit: s.opacity_logit,
                color_dc: s.color_dc,
                sh_rest: s.sh_rest.clone(),
            }
        })
        .collect();
    Ok(SplatCloud {
        splats,
        sh_degree: cloud.sh_degree,
    })
}

/// Splats whose centers lie inside `bounds`, in their original order.
pub fn crop_aabb(cloud: &SplatCloud, bounds: &Aabb) -> SplatCloud {
    SplatCloud {
        splats: cloud
            .splats
            .iter()
            .filter(|s| bounds.contains(s.position))
            .cloned()
            .collect(),
        sh_degree: cloud.sh_degree,
    }
}

/// Concatenates clouds in argument order at the highest SH degree present.
/// Lower-degree splats get zero higher-order coefficients.
pub fn merge_clouds(clouds: &[SplatCloud]) -> SplatCloud {
    let degree = clouds.iter().map(|c| c.sh_degree).max().unwrap_or(0);
    let mut splats = Vec::with_capacity(clouds.iter().map(SplatCloud::len).sum());
    for cloud in clouds {
        for s in &cloud.splats {
            let mut s = s.clone();
            s.sh_rest = pad_sh_rest(&s.sh_rest, cloud.sh_degree, degree);
            splats.push(s);
        }
    }
    SplatCloud {
        splats,
        sh_degree: degree,
    }
}

fn pad_sh_rest(rest: &[f32], from: u8, to: u8) -> Vec<f32> {
    if from == to {
        return rest.to_vec();
    }
    let per_from = sh_rest_len(from).unwrap_or(0) / 3;
    let per_to = sh_rest_len(to).unwrap_or(0) / 3;
    let mut out = vec![0.0; per_to * 3];
    for channel in 0..3 {
        for i in 0..per_from {
            if let Some(&v) = rest.get(channel * per_from + i) {
                out[channel * per_to + i] = v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn splat_with(log_scale: Vec3, rotation: Quat) -> GaussianSplat {
        GaussianSplat {
            log_scale,
            rotation,
            ..GaussianSplat::at(Vec3::ZERO)
        }
    }

    #[test]
    fn identity_covariance() {
        let c = covariance_of(&splat_with(Vec3::ZERO, Quat::IDENTITY));
        assert!(c.max_abs_diff(&Mat3::IDENTITY) < 1e-12);
    }

    #[test]
    fn anisotropic_covariance_is_diagonal() {
        let c = covariance_of(&splat_with(Vec3::new(2f32.ln(), 0.0, 0.0), Quat::IDENTITY));
        assert!(c.max_abs_diff(&Mat3::diag([4.0, 1.0, 1.0])) < 1e-6);
    }

    #[test]
    fn identity_transform_keeps_cloud() {
        let mut s = splat_with(Vec3::new(-1.0, 0.2, 0.3), Quat::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7));
        s.position = Vec3::new(0.25, -3.5, 8.0);
        let cloud = SplatCloud::new(vec![s.clone()], 0).unwrap();
        let out = transform_cloud(&cloud, &TransformTRS::IDENTITY).unwrap();
        let o = &out.splats[0];
        assert_eq!(o.position, s.position);
        assert_eq!(o.log_scale, s.log_scale);
        assert!((o.rotation.w - s.rotation.w).abs() <= 1e-6);
        assert!((o.rotation.x - s.rotation.x).abs() <= 1e-6);
    }

    #[test]
    fn translation_moves_only_the_position() {
        let s = GaussianSplat::at(Vec3::ZERO);
        let cloud = SplatCloud::new(vec![s.clone()], 0).unwrap();
        let out = transform_cloud(&cloud, &TransformTRS::from_translation(Vec3::new(1.0, 0.0, 0.0))).unwrap();
        assert_eq!(out.splats[0].position, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(out.splats[0].rotation, s.rotation);
        assert_eq!(out.splats[0].log_scale, s.log_scale);
        assert_eq!(out.splats[0].color_dc, s.color_dc);
    }

    #[test]
    fn quarter_turn_conjugates_covariance() {
        let s = splat_with(Vec3::new(0.5, -0.3, 0.1), Quat::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.4));
        let rot = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2);
        let cloud = SplatCloud::new(vec![s.clone()], 0).unwrap();
        let out = transform_cloud(&cloud, &TransformTRS::new(Vec3::ZERO, rot, 1.0).unwrap()).unwrap();
        let r = rot.to_mat3();
        let expected = r * covariance_of(&s) * r.transpose();
        assert!(covariance_of(&out.splats[0]).max_abs_diff(&expected) < 1e-5);
    }

    #[test]
    fn rejects_non_positive_scale() {
        let t = TransformTRS {
            scale: 0.0,
            ..TransformTRS::IDENTITY
        };
        assert!(matches!(
            transform_cloud(&SplatCloud::empty(0), &t),
            Err(SplatError::NonPositiveScale(_))
        ));
        assert!(TransformTRS::new(Vec3::ZERO, Quat::IDENTITY, -1.0).is_err());
    }

    #[test]
    fn crop_edge_cases() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let cloud = SplatCloud::new(vec![GaussianSplat::at(p), GaussianSplat::at(Vec3::ZERO)], 0).unwrap();
        let degenerate = Aabb::new(p, p).unwrap();
        let out = crop_aabb(&cloud, &degenerate);
        assert_eq!(out.splats, vec![GaussianSplat::at(p)]);
        let all = Aabb::new(Vec3::splat(-10.0), Vec3::splat(10.0)).unwrap();
        assert_eq!(crop_aabb(&cloud, &all), cloud);
    }

    #[test]
    fn merge_concatenates_and_pads() {
        let a = SplatCloud::new(vec![GaussianSplat::at(Vec3::ZERO); 2], 0).unwrap();
        let mut hi = GaussianSplat::at(Vec3::ONE);
        hi.sh_rest = (0..45).map(|i| i as f32).collect();
        let b = SplatCloud::new(vec![hi; 3], 3).unwrap();
        assert_eq!(merge_clouds(&[a.clone(), SplatCloud::empty(0)]), a);
        let m = merge_clouds(&[a, b]);
        assert_eq!(m.len(), 5);
        assert_eq!(m.sh_degree, 3);
        assert_eq!(m.splats[0].position, Vec3::ZERO);
        assert!(m.splats[0].sh_rest.iter().all(|&v| v == 0.0));
        assert_eq!(m.splats[0].sh_rest.len(), 45);
        assert_eq!(m.splats[4].sh_rest[44], 44.0);
        m.validate().unwrap();
    }

    #[test]
    fn padding_keeps_channel_blocks() {
        let rest: Vec<f32> = (1..=9).map(|v| v as f32).collect();
        let padded = pad_sh_rest(&rest, 1, 2);
        assert_eq!(&padded[0..3], &[1.0, 2.0, 3.0]);
        assert_eq!(&padded[3..8], &[0.0; 5]);
        assert_eq!(&padded[8..11], &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn compose_applies_inner_first() {
        let inner = TransformTRS::new(Vec3::new(1.0, 0.0, 0.0), Quat::IDENTITY, 2.0).unwrap();
        let outer = TransformTRS::new(
            Vec3::new(0.0, 0.0, 5.0),
            Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2),
            1.0,
        )
        .unwrap();
        let p = Vec3::new(1.0, 0.0, 0.0);
        let direct = outer.apply_point(inner.apply_point(p));
        let composed = outer.compose(&inner).apply_point(p);
        assert!((direct - composed).length() < 1e-6);
    }
}
