use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::ContactError;

/// Tolerance for the orthonormality and determinant checks.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Pose of the camera in the robot frame: `p_rob = origin + rotation * p_cam`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraExtrinsics {
    origin: Vector3<f64>,
    rotation: Matrix3<f64>,
}

/// JSON form: rotation rows in order.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawExtrinsics {
    origin: [f64; 3],
    rotation: [[f64; 3]; 3],
}

impl CameraExtrinsics {
    pub fn new(origin: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Self, ContactError> {
        if !origin.iter().chain(rotation.iter()).all(|c| c.is_finite()) {
            return Err(ContactError::InvalidExtrinsics("non-finite entry".into()));
        }
        let gram_error = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if gram_error > ROTATION_TOLERANCE {
            return Err(ContactError::InvalidExtrinsics(format!(
                "rotation not orthonormal (max |RᵀR - I| = {gram_error:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(ContactError::InvalidExtrinsics(format!("determinant {det}, expected +1")));
        }
        Ok(Self { origin, rotation })
    }

    pub fn identity() -> Self {
        Self {
            origin: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.rotation
    }

    pub fn camera_to_robot(&self, p_cam: Vector3<f64>) -> Vector3<f64> {
        self.origin + self.rotation * p_cam
    }

    pub fn robot_to_camera(&self, p_rob: Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p_rob - self.origin)
    }

    pub fn from_json(text: &str) -> Result<Self, ContactError> {
        let raw: RawExtrinsics =
            serde_json::from_str(text).map_err(|e| ContactError::InvalidExtrinsics(e.to_string()))?;
        let r = raw.rotation;
        Self::new(
            Vector3::from(raw.origin),
            Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
        )
    }

    pub fn to_json(&self) -> String {
        let m = &self.rotation;
        let raw = RawExtrinsics {
            origin: self.origin.into(),
            rotation: [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]),
        };
        serde_json::to_string(&raw).expect("plain numbers serialize")
    }
}
