//! Downward-closed multi-index sets and combination coefficients.
//!
//! Index components start at 1. Downward closure (every backward
//! neighbor present) is what makes the combination technique telescope,
//! so the constructor enforces it.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ScError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    n_dims: usize,
    /// Sorted lexicographically; unique; all components >= 1.
    indices: Vec<Vec<usize>>,
}

impl MultiIndexSet {
    pub fn new(n_dims: usize, mut indices: Vec<Vec<usize>>) -> Result<Self, ScError> {
        if n_dims == 0 {
            return Err(ScError::IndexSet("need at least one dimension".into()));
        }
        if indices.is_empty() {
            return Err(ScError::IndexSet("empty index set".into()));
        }
        for idx in &indices {
            if idx.len() != n_dims {
                return Err(ScError::IndexSet(format!(
                    "index {idx:?} has {} components, expected {n_dims}",
                    idx.len()
                )));
            }
            if idx.iter().any(|&c| c == 0) {
                return Err(ScError::IndexSet(format!("index {idx:?} has a zero component")));
            }
        }
        indices.sort();
        indices.dedup();
        let members: HashSet<&[usize]> = indices.iter().map(|i| i.as_slice()).collect();
        let mut probe = Vec::with_capacity(n_dims);
        for idx in &indices {
            for d in 0..n_dims {
                if idx[d] > 1 {
                    probe.clear();
                    probe.extend_from_slice(idx);
                    probe[d] -= 1;
                    if !members.contains(probe.as_slice()) {
                        return Err(ScError::IndexSet(format!(
                            "not downward-closed: {idx:?} present but {probe:?} missing"
                        )));
                    }
                }
            }
        }
        Ok(MultiIndexSet { n_dims, indices })
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn contains(&self, idx: &[usize]) -> bool {
        self.indices.binary_search_by(|probe| probe.as_slice().cmp(idx)).is_ok()
    }

    /// Largest component over all indices.
    pub fn max_level(&self) -> usize {
        self.indices.iter().flat_map(|i| i.iter().copied()).max().unwrap_or(0)
    }

    /// Combination coefficients gamma_i = sum over j in {0,1}^N with
    /// i + j in I of (-1)^|j|, aligned with `indices()`. They always sum
    /// to 1 on a downward-closed set.
    pub fn combination_coefficients(&self) -> Vec<i64> {
        let n = self.n_dims;
        let mut probe = vec![0usize; n];
        self.indices
            .iter()
            .map(|idx| {
                let mut gamma = 0i64;
                for mask in 0u32..(1 << n) {
                    for d in 0..n {
                        probe[d] = idx[d] + ((mask >> d) & 1) as usize;
                    }
                    if self.contains(&probe) {
                        gamma += if mask.count_ones() % 2 == 0 { 1 } else { -1 };
                    }
                }
                gamma
            })
            .collect()
    }
}

/// Isotropic Smolyak set I(w) = { i : sum_n (i_n - 1) <= w }.
pub fn smolyak_index_set(n_dims: usize, w: usize) -> Result<MultiIndexSet, ScError> {
    if n_dims == 0 {
        return Err(ScError::IndexSet("need at least one dimension".into()));
    }
    let mut out = Vec::new();
    let mut current = vec![1usize; n_dims];
    fill(&mut out, &mut current, 0, w);
    MultiIndexSet::new(n_dims, out)
}

fn fill(out: &mut Vec<Vec<usize>>, current: &mut Vec<usize>, dim: usize, budget: usize) {
    if dim == current.len() {
        out.push(current.clone());
        return;
    }
    for excess in 0..=budget {
        current[dim] = 1 + excess;
        fill(out, current, dim + 1, budget - excess);
    }
    current[dim] = 1;
}

/// Random downward-closed set grown by admissible single steps from the
/// all-ones root. Size is at most `max_size`; deterministic for a seeded
/// generator. Test and demo utility.
pub fn random_downward_closed(n_dims: usize, max_size: usize, rng: &mut impl Rng) -> MultiIndexSet {
    assert!(n_dims > 0 && max_size > 0);
    let root = vec![1usize; n_dims];
    let mut members: HashSet<Vec<usize>> = HashSet::from([root.clone()]);
    let mut list = vec![root];
    let target = rng.gen_range(1..=max_size);
    let mut attempts = 0;
    while list.len() < target && attempts < 200 * max_size {
        attempts += 1;
        let base = &list[rng.gen_range(0..list.len())];
        let dim = rng.gen_range(0..n_dims);
        let mut candidate = base.clone();
        candidate[dim] += 1;
        if members.contains(&candidate) {
            continue;
        }
        let admissible = (0..n_dims).all(|d| {
            if candidate[d] <= 1 {
                return true;
            }
            let mut back = candidate.clone();
            back[d] -= 1;
            members.contains(&back)
        });
        if admissible {
            members.insert(candidate.clone());
            list.push(candidate);
        }
    }
    MultiIndexSet::new(n_dims, list).expect("grown set is downward-closed by construction")
}
