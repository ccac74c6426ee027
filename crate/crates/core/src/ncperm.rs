//! Noncrossing permutations of `k` replicas.
//!
//! A permutation is stored by its images: `images[j] = σ(j)`, 0-based.
//! Products compose right-to-left, `(σ·ν)(j) = σ(ν(j))`. The identity is
//! written ○ and the cycle `j ↦ j+1 mod k` is written □. A permutation is
//! noncrossing when it lies on a geodesic between ○ and □ for the metric
//! `ℓ(σ,ν) = k − #cycles(σ⁻¹ν)`.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Largest `k` accepted by [`enumerate_nc`] (brute force over `k!`).
pub const MAX_ENUM_K: usize = 6;
/// Largest `n` accepted by [`catalan`].
pub const MAX_CATALAN_N: usize = 30;
/// Maximum number of multichains returned by [`NcLattice::multichains`].
pub const MAX_MULTICHAINS: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermError {
    #[error("k = {k} outside supported range {min}..={max}")]
    OutOfRange { k: usize, min: usize, max: usize },
    #[error("not a bijection on 0..{k}: {images:?}")]
    NotBijection { k: usize, images: Vec<usize> },
    #[error("permutations act on different element counts ({left} vs {right})")]
    ShapeMismatch { left: usize, right: usize },
    #[error("order violation: {lower} is not below {upper}")]
    OrderViolation { lower: String, upper: String },
    #[error("permutation {0} is crossing")]
    Crossing(String),
    #[error("{what}: {count} exceeds the limit {limit}")]
    Capacity { what: &'static str, count: u128, limit: u128 },
    #[error("Catalan number C_{0} overflows or exceeds the supported range")]
    CatalanOverflow(usize),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self, PermError> {
        let k = images.len();
        let mut seen = vec![false; k];
        for &i in &images {
            if i >= k || seen[i] {
                return Err(PermError::NotBijection { k, images });
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(k: usize) -> Self {
        Self { images: (0..k).collect() }
    }

    /// The full cycle `j ↦ j+1 mod k`.
    pub fn cyclic(k: usize) -> Self {
        Self { images: (0..k).map(|j| (j + 1) % k).collect() }
    }

    /// Builds a permutation from disjoint cycles; unlisted elements are fixed.
    pub fn from_cycles(k: usize, cycles: &[&[usize]]) -> Result<Self, PermError> {
        let mut images: Vec<usize> = (0..k).collect();
        let mut touched = vec![false; k];
        for cyc in cycles {
            for (pos, &j) in cyc.iter().enumerate() {
                if j >= k || touched[j] {
                    return Err(PermError::NotBijection { k, images: cyc.to_vec() });
                }
                touched[j] = true;
                images[j] = cyc[(pos + 1) % cyc.len()];
            }
        }
        Self::new(images)
    }

    pub fn k(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, j: usize) -> usize {
        self.images[j]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.k()];
        for (j, &i) in self.images.iter().enumerate() {
            inv[i] = j;
        }
        Self { images: inv }
    }

    /// `self · other`, i.e. `j ↦ self(other(j))`.
    pub fn compose(&self, other: &Self) -> Result<Self, PermError> {
        self.check_same(other)?;
        Ok(Self { images: other.images.iter().map(|&j| self.images[j]).collect() })
    }

    /// Cycles in canonical form: each starts at its minimum, sorted by minimum.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let k = self.k();
        let mut seen = vec![false; k];
        let mut out = Vec::new();
        for start in 0..k {
            if seen[start] {
                continue;
            }
            let mut cyc = vec![start];
            seen[start] = true;
            let mut j = self.images[start];
            while j != start {
                seen[j] = true;
                cyc.push(j);
                j = self.images[j];
            }
            out.push(cyc);
        }
        out
    }

    /// `|σ|`, the number of cycles.
    pub fn cycle_count(&self) -> usize {
        self.cycles().len()
    }

    /// `#cycles(self⁻¹ · other)`.
    pub fn relative_cycle_count(&self, other: &Self) -> Result<usize, PermError> {
        Ok(self.inverse().compose(other)?.cycle_count())
    }

    /// Geodesic test against ○ and □.
    pub fn is_noncrossing(&self) -> bool {
        let k = self.k();
        if k == 0 {
            return true;
        }
        let to_id = k - self.cycle_count();
        let to_cyc = k - self.inverse().compose(&Self::cyclic(k)).map(|p| p.cycle_count()).unwrap_or(0);
        to_id + to_cyc == k - 1
    }

    fn check_same(&self, other: &Self) -> Result<(), PermError> {
        if self.k() != other.k() {
            return Err(PermError::ShapeMismatch { left: self.k(), right: other.k() });
        }
        Ok(())
    }

    /// Block label of each element (index of its cycle in [`Self::cycles`]).
    fn block_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.k()];
        for (b, cyc) in self.cycles().iter().enumerate() {
            for &j in cyc {
                labels[j] = b;
            }
        }
        labels
    }

    /// True when every cycle of `self` lies inside a cycle of `other`.
    pub fn is_below(&self, other: &Self) -> Result<bool, PermError> {
        self.check_same(other)?;
        let labels = other.block_labels();
        Ok(self.cycles().iter().all(|c| c.iter().all(|&j| labels[j] == labels[c[0]])))
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Cycle notation, 1-based like the usual textbook form: `(1)(23)(4)`.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for cyc in self.cycles() {
            write!(f, "(")?;
            for (n, j) in cyc.iter().enumerate() {
                if n > 0 && self.k() > 9 {
                    write!(f, " ")?;
                }
                write!(f, "{}", j + 1)?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// `(leq, distance)` with `distance = k − #cycles(σ⁻¹ν)`.
pub fn compare(sigma: &Permutation, nu: &Permutation) -> Result<(bool, usize), PermError> {
    let leq = sigma.is_below(nu)?;
    let dist = sigma.k() - sigma.relative_cycle_count(nu)?;
    Ok((leq, dist))
}

/// Möbius function of the noncrossing lattice: a signed product of Catalan
/// numbers over the cycles of `σ⁻¹ν`.
pub fn moebius(sigma: &Permutation, nu: &Permutation) -> Result<i64, PermError> {
    if !sigma.is_below(nu)? {
        return Err(PermError::OrderViolation { lower: sigma.to_string(), upper: nu.to_string() });
    }
    let rel = sigma.inverse().compose(nu)?;
    let mut mu: i64 = 1;
    for cyc in rel.cycles() {
        let n = cyc.len() - 1;
        let c = catalan(n)? as i64;
        mu *= if n % 2 == 0 { c } else { -c };
    }
    Ok(mu)
}

/// Kreweras complement `σ* = σ⁻¹·□`.
pub fn kreweras(sigma: &Permutation) -> Result<Permutation, PermError> {
    if !sigma.is_noncrossing() {
        return Err(PermError::Crossing(sigma.to_string()));
    }
    sigma.inverse().compose(&Permutation::cyclic(sigma.k()))
}

pub fn catalan(n: usize) -> Result<u64, PermError> {
    if n > MAX_CATALAN_N {
        return Err(PermError::CatalanOverflow(n));
    }
    let mut c = vec![1u64; n + 1];
    for m in 1..=n {
        let mut acc: u64 = 0;
        for r in 1..=m {
            let term = c[r - 1].checked_mul(c[m - r]).ok_or(PermError::CatalanOverflow(n))?;
            acc = acc.checked_add(term).ok_or(PermError::CatalanOverflow(n))?;
        }
        c[m] = acc;
    }
    Ok(c[n])
}

fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    // Heap's algorithm would do; lexicographic order is nicer for tables.
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..k).rev().find(|&j| cur[j] > cur[i]).expect("successor exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// All noncrossing permutations of `k` elements, ordered by distance from ○
/// and then lexicographically by images. ○ comes first and □ last.
pub fn enumerate_nc(k: usize) -> Result<Vec<Permutation>, PermError> {
    if !(1..=MAX_ENUM_K).contains(&k) {
        return Err(PermError::OutOfRange { k, min: 1, max: MAX_ENUM_K });
    }
    let mut out: Vec<Permutation> = all_permutations(k)
        .into_iter()
        .map(|images| Permutation { images })
        .filter(Permutation::is_noncrossing)
        .collect();
    out.sort_by_key(|p| (k - p.cycle_count(), p.images.clone()));
    Ok(out)
}

/// A chain `σ₁ ⊆ σ₂ ⊆ … ⊆ σ_m`, stored as indices into an [`NcLattice`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Multichain {
    pub chain: Vec<usize>,
}

/// The lattice NC(k) with precomputed order, Möbius and Kreweras tables.
#[derive(Debug, Clone)]
pub struct NcLattice {
    k: usize,
    elements: Vec<Permutation>,
    leq: Vec<Vec<bool>>,
    moebius: Vec<Vec<i64>>,
    cycles: Vec<usize>,
    kreweras: Vec<usize>,
    index: HashMap<Vec<usize>, usize>,
}

impl NcLattice {
    pub fn new(k: usize) -> Result<Self, PermError> {
        let elements = enumerate_nc(k)?;
        let n = elements.len();
        let index: HashMap<_, _> =
            elements.iter().enumerate().map(|(i, p)| (p.images.clone(), i)).collect();
        let mut leq = vec![vec![false; n]; n];
        let mut moeb = vec![vec![0i64; n]; n];
        for (i, s) in elements.iter().enumerate() {
            for (j, v) in elements.iter().enumerate() {
                if s.is_below(v)? {
                    leq[i][j] = true;
                    moeb[i][j] = moebius(s, v)?;
                }
            }
        }
        let kreweras = elements
            .iter()
            .map(|s| kreweras(s).map(|c| index[&c.images]))
            .collect::<Result<Vec<_>, _>>()?;
        let cycles = elements.iter().map(Permutation::cycle_count).collect();
        Ok(Self { k, elements, leq, moebius: moeb, cycles, kreweras, index })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Permutation {
        &self.elements[i]
    }

    pub fn index_of(&self, p: &Permutation) -> Option<usize> {
        self.index.get(&p.images).copied()
    }

    pub fn identity_index(&self) -> usize {
        0
    }

    pub fn cyclic_index(&self) -> usize {
        self.elements.len() - 1
    }

    pub fn leq(&self, i: usize, j: usize) -> bool {
        self.leq[i][j]
    }

    /// μ(σᵢ, σⱼ); zero when σᵢ ⊄ σⱼ.
    pub fn moebius(&self, i: usize, j: usize) -> i64 {
        self.moebius[i][j]
    }

    /// `|σᵢ|`.
    pub fn cycle_count(&self, i: usize) -> usize {
        self.cycles[i]
    }

    pub fn kreweras(&self, i: usize) -> usize {
        self.kreweras[i]
    }

    /// Indices of all elements above `i` (including `i`).
    pub fn above(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| self.leq[i][j])
    }

    /// Number of multichains of length `m` (`m = 0` counts the empty chain).
    pub fn multichain_count(&self, m: usize) -> u128 {
        if m == 0 {
            return 1;
        }
        // ending[j] = number of chains of the current length ending at j
        let mut ending = vec![1u128; self.len()];
        for _ in 1..m {
            let mut next = vec![0u128; self.len()];
            for (i, &c) in ending.iter().enumerate() {
                for j in self.above(i) {
                    next[j] = next[j].saturating_add(c);
                }
            }
            ending = next;
        }
        ending.iter().fold(0u128, |a, &b| a.saturating_add(b))
    }

    /// All multichains of length `m`, in lexicographic order of indices.
    pub fn multichains(&self, m: usize) -> Result<Vec<Multichain>, PermError> {
        let count = self.multichain_count(m);
        if count > MAX_MULTICHAINS {
            return Err(PermError::Capacity { what: "multichain count", count, limit: MAX_MULTICHAINS });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut cur = Vec::with_capacity(m);
        self.extend_chains(m, &mut cur, &mut out);
        Ok(out)
    }

    fn extend_chains(&self, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Multichain>) {
        if cur.len() == m {
            out.push(Multichain { chain: cur.clone() });
            return;
        }
        let candidates: Vec<usize> = match cur.last() {
            None => (0..self.len()).collect(),
            Some(&last) => self.above(last).collect(),
        };
        for j in candidates {
            cur.push(j);
            self.extend_chains(m, cur, out);
            cur.pop();
        }
    }

    pub fn is_multichain(&self, chain: &[usize]) -> bool {
        chain.iter().all(|&i| i < self.len()) && chain.windows(2).all(|w| self.leq[w[0]][w[1]])
    }
}
