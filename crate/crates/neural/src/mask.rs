use ndarray::Array2;

use crate::error::{NeuralError, Result};

/// Boolean query × key matrix; `true` means the query may attend to the key.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMask {
    allowed: Array2<bool>,
}

impl AttentionMask {
    /// Every row must permit at least one key.
    pub fn new(allowed: Array2<bool>) -> Result<Self> {
        for (i, row) in allowed.rows().into_iter().enumerate() {
            if !row.iter().any(|&a| a) {
                return Err(NeuralError::Argument(format!(
                    "attention mask row {i} has no allowed key"
                )));
            }
        }
        Ok(Self { allowed })
    }

    pub fn full(n: usize) -> Self {
        Self {
            allowed: Array2::from_elem((n, n), true),
        }
    }

    /// Lower-triangular: query i sees keys 0..=i.
    pub fn causal(n: usize) -> Self {
        Self {
            allowed: Array2::from_shape_fn((n, n), |(i, j)| j <= i),
        }
    }

    /// Full attention inside each consecutive block, nothing across blocks.
    /// Used to encode several token sequences packed into one matrix.
    pub fn block_diagonal(lengths: &[usize]) -> Self {
        let n: usize = lengths.iter().sum();
        let mut block = Vec::with_capacity(n);
        for (b, &len) in lengths.iter().enumerate() {
            block.extend(std::iter::repeat(b).take(len));
        }
        Self {
            allowed: Array2::from_shape_fn((n, n), |(i, j)| block[i] == block[j]),
        }
    }

    pub fn size(&self) -> usize {
        self.allowed.nrows()
    }

    pub fn keys(&self) -> usize {
        self.allowed.ncols()
    }

    #[inline]
    pub fn is_allowed(&self, query: usize, key: usize) -> bool {
        self.allowed[[query, key]]
    }

    pub fn allowed(&self) -> &Array2<bool> {
        &self.allowed
    }
}
