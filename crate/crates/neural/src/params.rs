//! Named parameter tensors and their on-disk form.
//!
//! The checkpoint layout is a single JSON object:
//!
//! ```text
//! {
//!   "format": "oppmodel-params",
//!   "version": 1,
//!   "tensors": [ { "name": "l1.0.ff1.w", "shape": [128, 256], "data": [ ... ] }, ... ]
//! }
//! ```
//!
//! `data` is row-major. Floats are written in shortest round-trip form and
//! parsed with correct rounding, so save → load is bit-exact.

use std::io::{Read, Write};

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NeuralError, Result};
use crate::Tensor;

pub const PARAMS_FORMAT: &str = "oppmodel-params";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let id = ParamId(self.entries.len());
        self.entries.push(ParamEntry {
            name: name.into(),
            value,
        });
        id
    }

    /// Uniform in ±1/√fan_in, where fan_in is the row count of a weight
    /// matrix (inputs are multiplied on the left).
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value = Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound));
        self.add(name, value)
    }

    pub fn add_constant(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        v: f64,
    ) -> ParamId {
        self.add(name, Array2::from_elem((rows, cols), v))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    /// Shapes and names must match exactly; values are replaced.
    pub fn load_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.len() != self.len() {
            return Err(NeuralError::Format(format!(
                "expected {} tensors, found {}",
                self.len(),
                other.len()
            )));
        }
        for (mine, theirs) in self.entries.iter_mut().zip(&other.entries) {
            if mine.name != theirs.name || mine.value.dim() != theirs.value.dim() {
                return Err(NeuralError::Format(format!(
                    "tensor {} {:?} does not match {} {:?}",
                    mine.name,
                    mine.value.dim(),
                    theirs.name,
                    theirs.value.dim()
                )));
            }
            mine.value.assign(&theirs.value);
        }
        Ok(())
    }

    pub fn to_file_repr(&self) -> ParamsFile {
        ParamsFile {
            format: PARAMS_FORMAT.to_string(),
            version: PARAMS_VERSION,
            tensors: self
                .entries
                .iter()
                .map(|e| TensorRecord {
                    name: e.name.clone(),
                    shape: [e.value.nrows(), e.value.ncols()],
                    data: e.value.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn from_file_repr(file: ParamsFile) -> Result<Self> {
        if file.format != PARAMS_FORMAT {
            return Err(NeuralError::Format(format!(
                "unknown format tag {:?}",
                file.format
            )));
        }
        if file.version != PARAMS_VERSION {
            return Err(NeuralError::Format(format!(
                "unsupported version {}",
                file.version
            )));
        }
        let mut store = ParamStore::new();
        for t in file.tensors {
            let [r, c] = t.shape;
            if r * c != t.data.len() {
                return Err(NeuralError::Format(format!(
                    "tensor {} declares {}x{} but holds {} values",
                    t.name,
                    r,
                    c,
                    t.data.len()
                )));
            }
            let value = Array2::from_shape_vec((r, c), t.data)
                .map_err(|e| NeuralError::Format(e.to_string()))?;
            store.add(t.name, value);
        }
        Ok(store)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &self.to_file_repr())?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let file: ParamsFile = serde_json::from_reader(r)?;
        Self::from_file_repr(file)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParamsFile {
    pub format: String,
    pub version: u32,
    pub tensors: Vec<TensorRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}
