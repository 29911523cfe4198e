//! Gaussian-splat data model, PLY interchange and transform algebra.

mod cloud;
pub mod math;
mod ply;

use thiserror::Error;

pub use cloud::{
    covariance_of, crop_aabb, merge_clouds, sh_degree_for_len, sh_rest_len, sigmoid, transform_cloud, Aabb,
    GaussianSplat, SplatCloud, TransformTRS, SH_C0, SH_REST_LEN,
};
pub use math::{Mat3, Quat, Vec3};
pub use ply::{parse_ply, write_ply};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplatError {
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f32),
    #[error("transform rotation is not a unit quaternion")]
    NonUnitTransformRotation,
    #[error("transform translation is not finite")]
    NonFiniteTranslation,
    #[error("sh degree {0} is outside 0..=3")]
    InvalidShDegree(u8),
    #[error("splat {index} has {actual} higher-order SH coefficients, expected {expected}")]
    ShLengthMismatch { index: usize, expected: usize, actual: usize },
    #[error("splat {0} has non-finite parameters")]
    NonFinite(usize),
    #[error("splat {0} rotation is not a unit quaternion")]
    NonUnitRotation(usize),
    #[error("box min must not exceed max")]
    InvalidBox,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlyError {
    #[error("not a PLY file")]
    BadMagic,
    #[error("unsupported PLY format: {0}")]
    UnsupportedFormat(String),
    #[error("missing vertex field: {0}")]
    MissingField(String),
    #[error("body truncated: need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("{0} f_rest properties do not match any SH degree")]
    BadShCount(usize),
}
