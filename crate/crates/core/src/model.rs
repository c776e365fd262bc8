//! Communicated surrogate value functions
//!
//! ```text
//!   W(p) = ½ pᵀHp + gᵀp + σ‖p − p̄‖³ + offset
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{mat_from_row_major, mat_to_row_major, symmetrize, Mat, Vector};
use crate::tree::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("model has dimension {expected}, argument has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed model message: {0}")]
    Malformed(String),
}

/// Quadratic model with optional cubic regularization around `anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueModel {
    pub h: Mat,
    pub g: Vector,
    pub sigma: f64,
    pub anchor: Vector,
    pub offset: f64,
}

impl ValueModel {
    pub fn dim(&self) -> usize {
        self.g.len()
    }

    fn check(&self, p: &Vector) -> Result<(), ModelError> {
        if p.len() == self.dim() {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            })
        }
    }

    pub fn eval(&self, p: &Vector) -> Result<f64, ModelError> {
        self.check(p)?;
        Ok(self.value_unchecked(p))
    }

    pub fn gradient(&self, p: &Vector) -> Result<Vector, ModelError> {
        self.check(p)?;
        Ok(self.gradient_unchecked(p))
    }

    pub fn hessian(&self, p: &Vector) -> Result<Mat, ModelError> {
        self.check(p)?;
        Ok(self.hessian_unchecked(p))
    }

    /// Gradient of the quadratic part at the anchor.
    fn anchor_gradient(&self) -> Vector {
        &self.h * &self.anchor + &self.g
    }

    // Evaluated around the anchor so that differences between nearby points
    // do not suffer from cancellation when `H` is large.
    pub(crate) fn value_unchecked(&self, p: &Vector) -> f64 {
        let d = p - &self.anchor;
        let mut v = self.quadratic_part(&self.anchor)
            + self.anchor_gradient().dot(&d)
            + 0.5 * d.dot(&(&self.h * &d));
        if self.sigma > 0.0 {
            v += self.sigma * d.norm().powi(3);
        }
        v
    }

    pub(crate) fn gradient_unchecked(&self, p: &Vector) -> Vector {
        let d = p - &self.anchor;
        let mut grad = self.anchor_gradient() + &self.h * &d;
        if self.sigma > 0.0 {
            grad += &d * (3.0 * self.sigma * d.norm());
        }
        grad
    }

    /// At the anchor the cubic term contributes nothing.
    pub(crate) fn hessian_unchecked(&self, p: &Vector) -> Mat {
        let mut hess = self.h.clone();
        if self.sigma > 0.0 {
            let d = p - &self.anchor;
            let r = d.norm();
            if r > 0.0 {
                let n = d.len();
                hess += (Mat::identity(n, n) * r + &d * d.transpose() / r) * (3.0 * self.sigma);
            }
        }
        hess
    }

    /// Quadratic part only, `½ pᵀHp + gᵀp + offset`.
    pub fn quadratic_part(&self, p: &Vector) -> f64 {
        0.5 * p.dot(&(&self.h * p)) + self.g.dot(p) + self.offset
    }
}

/// Model matching `value`, `grad` and `hess` at `anchor`.
pub fn build_model(
    value: f64,
    grad: &Vector,
    hess: &Mat,
    anchor: &Vector,
    sigma: f64,
) -> ValueModel {
    let h = symmetrize(hess);
    let g = grad - &h * anchor;
    let offset = value - (0.5 * anchor.dot(&(&h * anchor)) + g.dot(anchor));
    ValueModel {
        h,
        g,
        sigma: sigma.max(0.0),
        anchor: anchor.clone(),
        offset,
    }
}

pub fn zero_model(dim: usize) -> ValueModel {
    ValueModel {
        h: Mat::zeros(dim, dim),
        g: Vector::zeros(dim),
        sigma: 0.0,
        anchor: Vector::zeros(dim),
        offset: 0.0,
    }
}

/// `W_{from,to}` in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMessage {
    pub from: NodeId,
    pub to: NodeId,
    pub model: ValueModel,
    pub sweep_tag: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    from: NodeId,
    to: NodeId,
    dim: usize,
    #[serde(rename = "H")]
    h: Vec<f64>,
    g: Vec<f64>,
    sigma: f64,
    anchor: Vec<f64>,
    offset: f64,
    sweep_tag: u64,
}

impl Serialize for ModelMessage {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Wire {
            from: self.from,
            to: self.to,
            dim: self.model.dim(),
            h: mat_to_row_major(&self.model.h),
            g: self.model.g.iter().copied().collect(),
            sigma: self.model.sigma,
            anchor: self.model.anchor.iter().copied().collect(),
            offset: self.model.offset,
            sweep_tag: self.sweep_tag,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelMessage {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let w = Wire::deserialize(d)?;
        if w.g.len() != w.dim || w.anchor.len() != w.dim {
            return Err(D::Error::custom("g/anchor length does not match dim"));
        }
        if w.sigma < 0.0 {
            return Err(D::Error::custom("negative sigma"));
        }
        let h = mat_from_row_major(w.dim, w.dim, &w.h)
            .ok_or_else(|| D::Error::custom("H has wrong length"))?;
        Ok(ModelMessage {
            from: w.from,
            to: w.to,
            model: ValueModel {
                h,
                g: Vector::from_vec(w.g),
                sigma: w.sigma,
                anchor: Vector::from_vec(w.anchor),
                offset: w.offset,
            },
            sweep_tag: w.sweep_tag,
        })
    }
}

impl ModelMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))
    }
}
