//! The graded lexicographic order on `ℕ^d` and its enumeration
//! `𝔟: ℕ → ℕ^d`.
//!
//! Indices are compared by sup norm first, then lexicographically. The
//! enumeration fills the layer `{k : max_j k_j = M}` in lexicographic order
//! before moving to `M + 1`, so its first `M^d` entries are exactly the
//! discrete hypercube `{0, …, M-1}^d`.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(components: Vec<usize>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Precondition(
                "multi-index dimension must be >= 1".into(),
            ));
        }
        Ok(MultiIndex(components))
    }

    pub fn zeros(d: usize) -> Self {
        MultiIndex(vec![0; d.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    pub fn sup_norm(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

impl std::ops::Index<usize> for MultiIndex {
    type Output = usize;
    fn index(&self, j: usize) -> &usize {
        &self.0[j]
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

fn graded_lex_cmp(k: &[usize], l: &[usize]) -> Ordering {
    let mk = k.iter().max();
    let ml = l.iter().max();
    mk.cmp(&ml).then_with(|| k.cmp(l))
}

/// `k < l` in the graded lexicographic order.
pub fn graded_lex_less(k: &MultiIndex, l: &MultiIndex) -> Result<bool> {
    if k.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            found: l.dim(),
        });
    }
    Ok(graded_lex_cmp(&k.0, &l.0) == Ordering::Less)
}

#[derive(Debug, Default)]
struct Cache {
    entries: Vec<MultiIndex>,
    rank: HashMap<MultiIndex, usize>,
    /// All multi-indices with sup norm `< layers` are present.
    layers: usize,
}

/// Lazily grown enumeration of `ℕ^d` in graded lexicographic order.
/// Growth is guarded by a lock, so a shared basis can be queried from any
/// thread.
#[derive(Debug)]
pub struct MultiIndexBasis {
    d: usize,
    cache: RwLock<Cache>,
}

impl Clone for MultiIndexBasis {
    fn clone(&self) -> Self {
        let c = self.cache.read().expect("multi-index cache poisoned");
        MultiIndexBasis {
            d: self.d,
            cache: RwLock::new(Cache {
                entries: c.entries.clone(),
                rank: c.rank.clone(),
                layers: c.layers,
            }),
        }
    }
}

impl MultiIndexBasis {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Precondition("dimension must be >= 1".into()));
        }
        Ok(MultiIndexBasis {
            d,
            cache: RwLock::new(Cache::default()),
        })
    }

    /// A basis with the first `n` entries already generated.
    pub fn with_capacity(d: usize, n: usize) -> Result<Self> {
        let basis = Self::new(d)?;
        if n > 0 {
            basis.bijection(n - 1);
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    fn grow_layers(&self, cache: &mut Cache, layers: usize) {
        while cache.layers < layers {
            let m = cache.layers;
            // layer of sup norm exactly m, lexicographic
            let mut cur = vec![0usize; self.d];
            loop {
                if cur.contains(&m) {
                    let idx = MultiIndex(cur.clone());
                    cache.rank.insert(idx.clone(), cache.entries.len());
                    cache.entries.push(idx);
                }
                // odometer over {0..=m}^d, last coordinate fastest
                let mut j = self.d;
                let done = loop {
                    if j == 0 {
                        break true;
                    }
                    j -= 1;
                    if cur[j] < m {
                        cur[j] += 1;
                        cur[j + 1..].iter_mut().for_each(|c| *c = 0);
                        break false;
                    }
                };
                if done {
                    break;
                }
            }
            cache.layers += 1;
        }
    }

    fn layers_for_count(&self, n: usize) -> usize {
        // smallest M with M^d >= n
        let mut m = 0usize;
        while (m as u128).pow(self.d as u32) < n as u128 {
            m += 1;
        }
        m
    }

    /// `𝔟(n)`.
    pub fn bijection(&self, n: usize) -> MultiIndex {
        {
            let c = self.cache.read().expect("multi-index cache poisoned");
            if let Some(k) = c.entries.get(n) {
                return k.clone();
            }
        }
        let mut c = self.cache.write().expect("multi-index cache poisoned");
        let layers = self.layers_for_count(n + 1);
        self.grow_layers(&mut c, layers);
        c.entries[n].clone()
    }

    /// `𝔟^{-1}(k)`.
    pub fn bijection_inverse(&self, k: &MultiIndex) -> Result<usize> {
        if k.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: k.dim(),
            });
        }
        {
            let c = self.cache.read().expect("multi-index cache poisoned");
            if let Some(&r) = c.rank.get(k) {
                return Ok(r);
            }
        }
        let mut c = self.cache.write().expect("multi-index cache poisoned");
        self.grow_layers(&mut c, k.sup_norm() + 1);
        Ok(c.rank[k])
    }

    /// `[𝔟(0), …, 𝔟(n-1)]`.
    pub fn first(&self, n: usize) -> Vec<MultiIndex> {
        if n == 0 {
            return Vec::new();
        }
        self.bijection(n - 1);
        let c = self.cache.read().expect("multi-index cache poisoned");
        c.entries[..n].to_vec()
    }

    /// `{𝔟(0), …, 𝔟(M^d - 1)}`.
    pub fn hypercube_prefix(&self, side: usize) -> Result<BTreeSet<MultiIndex>> {
        if side == 0 {
            return Err(Error::Precondition("hypercube side must be >= 1".into()));
        }
        let count = side
            .checked_pow(self.d as u32)
            .ok_or_else(|| Error::Precondition("hypercube too large".into()))?;
        Ok(self.first(count).into_iter().collect())
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Graded lexicographic order (sup norm, then lexicographic).
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        graded_lex_cmp(&self.0, &other.0)
    }
}
