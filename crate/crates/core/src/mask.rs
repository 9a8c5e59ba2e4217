use crate::error::{Error, Result};

/// Boolean node indicator with a cached count of selected nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeMask {
    bits: Vec<bool>,
    active: usize,
}

impl NodeMask {
    pub fn full(n: usize) -> Self {
        NodeMask {
            bits: vec![true; n],
            active: n,
        }
    }

    pub fn empty(n: usize) -> Self {
        NodeMask {
            bits: vec![false; n],
            active: 0,
        }
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        let active = bits.iter().filter(|&&b| b).count();
        NodeMask { bits, active }
    }

    /// Mask of length `n` with exactly the listed nodes set.
    pub fn from_indices(n: usize, nodes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = NodeMask::empty(n);
        for v in nodes {
            if v >= n {
                return Err(Error::NodeOutOfRange {
                    node: v,
                    num_nodes: n,
                });
            }
            mask.set(v, true);
        }
        Ok(mask)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, v: usize) -> bool {
        self.bits[v]
    }

    pub fn set(&mut self, v: usize, value: bool) {
        if self.bits[v] != value {
            self.bits[v] = value;
            if value {
                self.active += 1;
            } else {
                self.active -= 1;
            }
        }
    }

    /// Number of selected nodes.
    #[inline]
    pub fn count(&self) -> usize {
        self.active
    }

    pub fn is_full(&self) -> bool {
        self.active == self.bits.len()
    }

    pub fn fraction(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.active as f64 / self.bits.len() as f64
        }
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter_active(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(v, &b)| b.then_some(v))
    }

    pub fn intersect(&self, other: &NodeMask) -> Result<NodeMask> {
        self.check_len(other.len(), "mask intersection")?;
        Ok(NodeMask::from_bools(
            self.bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a && *b)
                .collect(),
        ))
    }

    pub fn is_subset_of(&self, other: &NodeMask) -> bool {
        self.len() == other.len() && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    pub(crate) fn check_len(&self, expected: usize, context: &'static str) -> Result<()> {
        if self.len() != expected {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                actual: self.len(),
            });
        }
        Ok(())
    }
}
