use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    /// Values are rounded through 32-bit floats on storage.
    F32,
}

/// Dense row-major array of reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        let expected = shape.iter().product::<usize>();
        if expected != data.len() {
            return Err(NnError::Shape { stage: "tensor", expected, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("tensor data".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Copy as stored under `precision`.
    pub fn stored(&self, precision: Precision) -> Self {
        match precision {
            Precision::F64 => self.clone(),
            Precision::F32 => {
                Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| v as f32 as f64).collect() }
            }
        }
    }
}
