//! Sparse non-negative integer vectors over vertices.
//!
//! Houses the r, γ, Δ (source) and ∇ (sink) vectors. The ℓ1 norm is
//! maintained incrementally; iteration order is the vertex order so that
//! every consumer is deterministic.

use std::collections::BTreeMap;

use crate::graph::{DynGraph, VertexId};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VertexVector {
    entries: BTreeMap<VertexId, u64>,
    l1: u64,
}

impl VertexVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_degrees<I: IntoIterator<Item = VertexId>>(g: &DynGraph, verts: I) -> Self {
        let mut v = Self::new();
        for x in verts {
            v.set(x, g.degree(x));
        }
        v
    }

    pub fn get(&self, v: VertexId) -> u64 {
        self.entries.get(&v).copied().unwrap_or(0)
    }

    pub fn set(&mut self, v: VertexId, val: u64) {
        let old = self.get(v);
        self.l1 = self.l1 - old + val;
        if val == 0 {
            self.entries.remove(&v);
        } else {
            self.entries.insert(v, val);
        }
    }

    pub fn add(&mut self, v: VertexId, delta: u64) {
        if delta > 0 {
            self.set(v, self.get(v) + delta);
        }
    }

    /// Subtracts up to `delta`, clamping at zero; returns the amount removed.
    pub fn sub_clamped(&mut self, v: VertexId, delta: u64) -> u64 {
        let old = self.get(v);
        let rem = old.min(delta);
        self.set(v, old - rem);
        rem
    }

    pub fn l1_norm(&self) -> u64 {
        self.l1
    }

    pub fn is_zero(&self) -> bool {
        self.l1 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, u64)> + '_ {
        self.entries.iter().map(|(&v, &x)| (v, x))
    }

    pub fn support(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.entries.keys().copied()
    }

    /// Σ over `set` of entries.
    pub fn sum_over<'a, I: IntoIterator<Item = &'a VertexId>>(&self, set: I) -> u64 {
        set.into_iter().map(|&v| self.get(v)).sum()
    }

    /// Restriction to `keep`; entries outside are dropped.
    pub fn restrict<F: Fn(VertexId) -> bool>(&self, keep: F) -> Self {
        let mut out = Self::new();
        for (v, x) in self.iter() {
            if keep(v) {
                out.set(v, x);
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &VertexVector) {
        for (v, x) in other.iter() {
            self.add(v, x);
        }
    }

    pub fn scale(&self, k: u64) -> Self {
        let mut out = Self::new();
        for (v, x) in self.iter() {
            out.set(v, x * k);
        }
        out
    }
}

impl FromIterator<(VertexId, u64)> for VertexVector {
    fn from_iter<T: IntoIterator<Item = (VertexId, u64)>>(iter: T) -> Self {
        let mut v = Self::new();
        for (k, x) in iter {
            v.add(k, x);
        }
        v
    }
}
