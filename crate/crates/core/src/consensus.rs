//! Shared machinery of both estimators: the correspondence set, the
//! append-only compatibility graph, the residual-based termination test and
//! final inlier extraction.

use std::collections::HashSet;

use crate::error::{RansicError, Result};
use crate::geom::Vec3;

/// Residual gate, in units of the noise standard deviation.
pub const INLIER_GATE: f64 = 5.2;

/// Ordered putative correspondences; index `i` is row `i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet {
    pairs: Vec<(Vec3, Vec3)>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<(Vec3, Vec3)>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(Vec3, Vec3)] {
        &self.pairs
    }

    pub fn get(&self, i: usize) -> &(Vec3, Vec3) {
        &self.pairs[i]
    }

    /// Copies out the pairs at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Vec<(Vec3, Vec3)> {
        indices.iter().map(|&i| self.pairs[i]).collect()
    }
}

impl From<Vec<(Vec3, Vec3)>> for CorrespondenceSet {
    fn from(pairs: Vec<(Vec3, Vec3)>) -> Self {
        Self::new(pairs)
    }
}

/// A sampled subset that passed its intra-sample tests, with the local model
/// (and whatever cached quantities the edge test needs).
#[derive(Debug, Clone)]
pub struct Vertex<M> {
    pub indices: Vec<usize>,
    pub model: M,
}

/// Append-only vertex store. Edges are never materialised: they are tested
/// on demand between a newly inserted vertex and the existing ones.
#[derive(Debug, Clone)]
pub struct CompatGraph<M> {
    vertices: Vec<Vertex<M>>,
    seen: HashSet<Vec<usize>>,
}

impl<M> Default for CompatGraph<M> {
    fn default() -> Self {
        Self {
            vertices: Vec::new(),
            seen: HashSet::new(),
        }
    }
}

impl<M> CompatGraph<M> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex<M>] {
        &self.vertices
    }

    pub fn get(&self, id: usize) -> &Vertex<M> {
        &self.vertices[id]
    }

    pub fn contains(&self, indices: &[usize]) -> bool {
        let mut key = indices.to_vec();
        key.sort_unstable();
        self.seen.contains(&key)
    }

    /// Inserts a vertex and returns its id, or `None` if a vertex with the
    /// same index set is already stored.
    pub fn insert(&mut self, mut indices: Vec<usize>, model: M) -> Option<usize> {
        indices.sort_unstable();
        if !self.seen.insert(indices.clone()) {
            return None;
        }
        self.vertices.push(Vertex { indices, model });
        Some(self.vertices.len() - 1)
    }

    pub fn clear(&mut self) {
        self.vertices.clear();
        self.seen.clear();
    }

    /// Vertex `id` followed by every other stored vertex `u` with
    /// `edge(v, u)`. The degree of `v` is `len() - 1` of the result.
    pub fn neighbors<F>(&self, id: usize, mut edge: F) -> Vec<usize>
    where
        F: FnMut(&Vertex<M>, &Vertex<M>) -> bool,
    {
        let v = &self.vertices[id];
        std::iter::once(id)
            .chain(
                self.vertices
                    .iter()
                    .enumerate()
                    .filter(|&(u, other)| u != id && edge(v, other))
                    .map(|(u, _)| u),
            )
            .collect()
    }

    /// Sorted, deduplicated correspondence indices covered by `ids`.
    pub fn union_indices(&self, ids: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = ids
            .iter()
            .flat_map(|&id| self.vertices[id].indices.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Parameters of the residual termination test: at least `tau` residuals
/// within the gate, with mean at most `upsilon * sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationParams {
    pub upsilon: f64,
    pub tau: usize,
    pub sigma: f64,
}

impl TerminationParams {
    pub fn new(upsilon: f64, tau: usize, sigma: f64) -> Result<Self> {
        let p = Self {
            upsilon,
            tau,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.upsilon > 0.0) || self.tau < 1 || !(self.sigma > 0.0) {
            return Err(RansicError::InvalidParam(format!(
                "termination params need upsilon > 0, tau >= 1, sigma > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn gate(&self) -> f64 {
        INLIER_GATE * self.sigma
    }
}

pub fn termination_check(residuals: &[f64], params: &TerminationParams) -> bool {
    let gate = params.gate();
    let (count, sum) = residuals
        .iter()
        .filter(|&&r| r <= gate)
        .fold((0usize, 0.0), |(c, s), r| (c + 1, s + r));
    count > 0 && count >= params.tau && sum / count as f64 <= params.upsilon * params.sigma
}

/// Indices with `r_i <= 5.2σ`, ascending.
pub fn extract_inliers(residuals: &[f64], sigma: f64) -> Vec<usize> {
    let gate = INLIER_GATE * sigma;
    residuals
        .iter()
        .enumerate()
        .filter(|&(_, &r)| r <= gate)
        .map(|(i, _)| i)
        .collect()
}
