//! Flat parameter arena with named tensors.

use serde::{Deserialize, Serialize};

use super::init::orthogonal;
use super::Scalar;
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    Zeros,
    /// Each of `blocks` equal column blocks is orthogonal with the given gain.
    Orthogonal { gain: f64, blocks: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub init: Init,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Names, shapes and offsets of every parameter in one flat buffer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    specs: Vec<ParamSpec>,
    len: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a tensor and returns its offset.
    pub fn add(&mut self, name: &str, shape: &[usize], init: Init) -> usize {
        let offset = self.len;
        let spec = ParamSpec { name: name.to_string(), shape: shape.to_vec(), offset, init };
        self.len += spec.len();
        self.specs.push(spec);
        offset
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn get(&self, name: &str) -> Option<&ParamSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    /// Deterministic initial values for a parameter seed.
    pub fn initialise<S: Scalar>(&self, seed: u64) -> Vec<S> {
        let mut out = vec![S::zero(); self.len];
        for (i, spec) in self.specs.iter().enumerate() {
            if let Init::Orthogonal { gain, blocks } = spec.init {
                let mut rng = stream(seed, Purpose::Init, i as u64);
                let (rows, cols) = (spec.shape[0], spec.shape[1]);
                let bc = cols / blocks;
                for blk in 0..blocks {
                    let w = orthogonal(rows, bc, gain, &mut rng);
                    for r in 0..rows {
                        for c in 0..bc {
                            out[spec.offset + r * cols + blk * bc + c] = S::of(w[r * bc + c]);
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_contiguous() {
        let mut l = ParamLayout::new();
        assert_eq!(l.add("a.w", &[3, 4], Init::Orthogonal { gain: 1.0, blocks: 1 }), 0);
        assert_eq!(l.add("a.b", &[4], Init::Zeros), 12);
        assert_eq!(l.len(), 16);
        assert_eq!(l.get("a.b").unwrap().range(), 12..16);
        let p: Vec<f32> = l.initialise(7);
        assert!(p[12..].iter().all(|&x| x == 0.0));
        assert_eq!(p, l.initialise::<f32>(7));
        assert_ne!(p, l.initialise::<f32>(8));
    }
}
