//! Evolution in space: permutation states on the temporal lattice, the
//! spatial transfer matrix, and the influence matrix (IM).
//!
//! # Temporal lattice
//!
//! At time `t` a cut between two bath sites carries `m = 2τ` legs,
//! `τ = t − 1`, ordered `a₁, b₁, a₂, b₂, …, a_τ, b_τ` from early to late.
//! `a_s` is the worldline of the left site between the right-sweep gates of
//! period `s`, `b_s` the one between the left-sweep gates. Each leg has
//! dimension `d^{2k}` (see [`crate::gates`] for the digit layout).
//!
//! # Transfer matrix
//!
//! The transfer matrix of bond `(j, j+1)` maps states at the right cut to
//! the left cut. It is specified by `2τ` gates, `[R⁽¹⁾, L⁽¹⁾, R⁽²⁾, …]`: the
//! right-sweep and left-sweep gate of that bond in each period. The carried
//! worldline of site `j+1` starts in `|○)`, ends in `(□|`, and the whole
//! network carries a factor `1/d`.
//!
//! All pairings are bilinear; permutation states are real.

use ndarray::{Array1, Array2, Array3};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::gates::{apply_folded, Gate};
use crate::ncperm::{Multichain, NcLattice, PermError, Permutation};
use crate::replica::{boundary_block, dressed_cycle, dressed_identity, leg_dim, permutation_vector};
use crate::tensor;

/// Entry budget for dense temporal states.
pub const MAX_DENSE_ENTRIES: usize = 1 << 24;

#[derive(Debug, Error)]
pub enum SpacetimeError {
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error("permutation {0} is crossing")]
    Domain(String),
    #[error("dense temporal state with {entries} entries exceeds the budget {limit}")]
    Capacity { entries: u128, limit: u128 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("ill-conditioned multichain Gram matrix (condition number {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
    #[error("invalid time {0}: need t ≥ {1}")]
    Time(usize, usize),
}

fn c0() -> C64 {
    C64::new(0.0, 0.0)
}

fn dense_entries(d: usize, k: usize, legs: usize) -> u128 {
    (leg_dim(d, k) as u128).saturating_pow(legs as u32)
}

fn check_dense(d: usize, k: usize, legs: usize) -> Result<usize, SpacetimeError> {
    let entries = dense_entries(d, k, legs);
    if entries > MAX_DENSE_ENTRIES as u128 {
        return Err(SpacetimeError::Capacity { entries, limit: MAX_DENSE_ENTRIES as u128 });
    }
    Ok(entries as usize)
}

#[derive(Debug, Clone)]
pub struct PermutationState {
    pub d: usize,
    pub k: usize,
    pub sigma: Permutation,
    pub vector: Vec<C64>,
}

pub fn permutation_state(sigma: &Permutation, d: usize) -> Result<PermutationState, SpacetimeError> {
    if !sigma.is_noncrossing() {
        return Err(SpacetimeError::Domain(sigma.to_string()));
    }
    Ok(PermutationState { d, k: sigma.k(), sigma: sigma.clone(), vector: permutation_vector(sigma, d) })
}

/// A dense vector on `m` temporal legs.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalState {
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub data: Vec<C64>,
}

impl TemporalState {
    pub fn zeros(d: usize, k: usize, m: usize) -> Result<Self, SpacetimeError> {
        let n = check_dense(d, k, m)?;
        Ok(Self { d, k, m, data: vec![c0(); n] })
    }

    /// Tensor product of single-leg vectors.
    pub fn product(d: usize, k: usize, legs: &[Vec<C64>]) -> Result<Self, SpacetimeError> {
        check_dense(d, k, legs.len())?;
        let mut data = vec![C64::new(1.0, 0.0)];
        for leg in legs {
            let mut next = Vec::with_capacity(data.len() * leg.len());
            for x in &data {
                next.extend(leg.iter().map(|y| x * y));
            }
            data = next;
        }
        Ok(Self { d, k, m: legs.len(), data })
    }

    pub fn leg_dim(&self) -> usize {
        leg_dim(self.d, self.k)
    }

    /// Bilinear pairing `(self|other)`.
    pub fn dot(&self, other: &Self) -> C64 {
        tensor::vdot_bilinear(&self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, alpha: C64, x: &Self) {
        for (y, v) in self.data.iter_mut().zip(&x.data) {
            *y += alpha * v;
        }
    }

    pub fn scale(&mut self, alpha: C64) {
        self.data.iter_mut().for_each(|z| *z *= alpha);
    }

    /// `(v₁ ⊗ … ⊗ v_m | self)` for a product covector.
    pub fn contract_product(&self, legs: &[Vec<C64>]) -> C64 {
        let n = self.leg_dim();
        let mut cur: Vec<C64> = self.data.clone();
        for leg in legs {
            let rest = cur.len() / n;
            let mut next = vec![c0(); rest];
            for (i, v) in leg.iter().enumerate() {
                if v.norm() == 0.0 {
                    continue;
                }
                for (dst, src) in next.iter_mut().zip(&cur[i * rest..(i + 1) * rest]) {
                    *dst += v * src;
                }
            }
            cur = next;
        }
        cur[0]
    }
}

/// `|σ⃗) = |σ₁) ⊗ … ⊗ |σ_m)` for a chain of lattice indices.
pub fn multichain_state(lat: &NcLattice, chain: &[usize], d: usize) -> Result<TemporalState, SpacetimeError> {
    let legs: Vec<Vec<C64>> = chain.iter().map(|&i| permutation_vector(lat.element(i), d)).collect();
    TemporalState::product(d, lat.k(), &legs)
}

/// `(ν⃗|σ⃗) = ∏ d^{|νᵢ⁻¹σᵢ|}`.
pub fn chain_overlap(lat: &NcLattice, nu: &[usize], sigma: &[usize], d: usize) -> f64 {
    nu.iter()
        .zip(sigma)
        .map(|(&a, &b)| (d as f64).powi(lat.element(a).relative_cycle_count(lat.element(b)).expect("same k") as i32))
        .product()
}

/// `τ = t − 1` Bell pairs joining legs `(a_s, b_s)`.
pub fn cup_state(t: usize, d: usize, k: usize) -> Result<TemporalState, SpacetimeError> {
    if t < 2 {
        return Err(SpacetimeError::Time(t, 2));
    }
    let m = 2 * (t - 1);
    check_dense(d, k, m)?;
    let n = leg_dim(d, k);
    let mut pair = vec![c0(); n * n];
    for x in 0..n {
        pair[x * n + x] = C64::new(1.0, 0.0);
    }
    let mut data = vec![C64::new(1.0, 0.0)];
    for _ in 0..t - 1 {
        let mut next = Vec::with_capacity(data.len() * pair.len());
        for x in &data {
            next.extend(pair.iter().map(|y| x * y));
        }
        data = next;
    }
    Ok(TemporalState { d, k, m, data })
}

/// `(σ⃗|cup) = ∏ᵢ d^{|σ_{2i−1}⁻¹σ_{2i}|}`.
pub fn cup_overlap(lat: &NcLattice, chain: &[usize], d: usize) -> f64 {
    chain
        .chunks(2)
        .map(|p| (d as f64).powi(lat.element(p[0]).relative_cycle_count(lat.element(p[1])).expect("same k") as i32))
        .product()
}

/// Leg vectors of the `k = 2` domain wall `○^j □^{m−j}` on `m` legs;
/// normalized walls carry an extra `d^{−m}` (spread evenly over the legs).
pub fn domain_wall_legs(m: usize, j: usize, d: usize, normalized: bool) -> Vec<Vec<C64>> {
    let id = permutation_vector(&Permutation::identity(2), d);
    let cy = permutation_vector(&Permutation::cyclic(2), d);
    let s = if normalized { 1.0 / d as f64 } else { 1.0 };
    (0..m).map(|leg| if leg < j { &id } else { &cy }).map(|v| v.iter().map(|z| z * s).collect()).collect()
}

pub fn domain_wall_state(m: usize, j: usize, d: usize, normalized: bool) -> Result<TemporalState, SpacetimeError> {
    TemporalState::product(d, 2, &domain_wall_legs(m, j, d, normalized))
}

fn check_gates(gates: &[Gate], m: usize, d: usize) -> Result<(), SpacetimeError> {
    if gates.len() != m || !m.is_multiple_of(2) {
        return Err(SpacetimeError::Shape(format!("{} gates for {m} temporal legs", gates.len())));
    }
    if gates.iter().any(|g| g.d() != d) {
        return Err(SpacetimeError::Shape("gate dimension differs from state dimension".into()));
    }
    Ok(())
}

/// `M[(o, a), (c, y)] = R[(o, y), (a, c)]`: right-sweep gate as a map from
/// (carry, right leg) to (carry, left leg).
fn right_step_matrix(g: &Gate) -> Array2<C64> {
    let d = g.d();
    let m = g.matrix();
    Array2::from_shape_fn((d * d, d * d), |(row, col)| {
        let (o, a) = (row / d, row % d);
        let (cc, y) = (col / d, col % d);
        m[[o * d + y, a * d + cc]]
    })
}

/// `M[(c′, b), (o, b′)] = L[(b, c′), (o, b′)]`.
fn left_step_matrix(g: &Gate) -> Array2<C64> {
    let d = g.d();
    let m = g.matrix();
    Array2::from_shape_fn((d * d, d * d), |(row, col)| {
        let (cp, b) = (row / d, row % d);
        m[[b * d + cp, col]]
    })
}

/// Matrix-free application of the transfer matrix to a dense state.
pub fn transfer_apply(gates: &[Gate], state: &TemporalState) -> Result<TemporalState, SpacetimeError> {
    let (d, k, m) = (state.d, state.k, state.m);
    check_gates(gates, m, d)?;
    check_dense(d, k, m + 1)?;
    let n = leg_dim(d, k);
    let start = permutation_vector(&Permutation::identity(k), d);
    let finish = permutation_vector(&Permutation::cyclic(k), d);
    // carry leg first
    let mut work: Vec<C64> = Vec::with_capacity(n * state.data.len());
    for x in &start {
        work.extend(state.data.iter().map(|y| x * y));
    }
    for (s, pair) in gates.chunks(2).enumerate() {
        let (ra, lb) = (1 + 2 * s, 2 + 2 * s);
        apply_folded(&mut work, d, k, m + 1, 0, ra, &right_step_matrix(&pair[0]));
        apply_folded(&mut work, d, k, m + 1, 0, lb, &left_step_matrix(&pair[1]));
    }
    let rest = state.data.len();
    let mut out = vec![c0(); rest];
    for (x, f) in finish.iter().enumerate() {
        if f.norm() == 0.0 {
            continue;
        }
        for (dst, src) in out.iter_mut().zip(&work[x * rest..(x + 1) * rest]) {
            *dst += f * src;
        }
    }
    let inv_d = 1.0 / d as f64;
    out.iter_mut().for_each(|z| *z *= inv_d);
    Ok(TemporalState { d, k, m, data: out })
}

/// Two-leg helper: `(v_j ⊗ v_{j+1})` → folded gate → contract one output.
struct StepKernel {
    d: usize,
    k: usize,
    n: usize,
}

impl StepKernel {
    fn pair(&self, left: &[C64], right: &[C64]) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.n * self.n);
        for x in left {
            v.extend(right.iter().map(|y| x * y));
        }
        v
    }

    /// Right-sweep gate: inputs `(bra, carry)`; returns the left-site output
    /// after closing the right-site output with `ket`.
    fn right(&self, g: &Gate, bra: &[C64], carry: &[C64], ket: &[C64]) -> Vec<C64> {
        let mut v = self.pair(bra, carry);
        apply_folded(&mut v, self.d, self.k, 2, 0, 1, g.matrix());
        (0..self.n).map(|o| tensor::vdot_bilinear(&v[o * self.n..(o + 1) * self.n], ket)).collect()
    }

    /// Left-sweep gate: inputs `(inner, ket)`; returns the new carry after
    /// closing the left-site output with `bra`.
    fn left(&self, g: &Gate, inner: &[C64], ket: &[C64], bra: &[C64]) -> Vec<C64> {
        let mut v = self.pair(inner, ket);
        apply_folded(&mut v, self.d, self.k, 2, 0, 1, g.matrix());
        (0..self.n).map(|c| (0..self.n).map(|b| bra[b] * v[b * self.n + c]).sum()).collect()
    }
}

/// `(bra|𝒯|ket)` for product states given leg by leg.
pub fn transfer_element(gates: &[Gate], bra: &[Vec<C64>], ket: &[Vec<C64>], k: usize) -> Result<C64, SpacetimeError> {
    let d = gates.first().map(Gate::d).ok_or_else(|| SpacetimeError::Shape("no gates".into()))?;
    check_gates(gates, bra.len(), d)?;
    if ket.len() != bra.len() {
        return Err(SpacetimeError::Shape("bra and ket leg counts differ".into()));
    }
    let kern = StepKernel { d, k, n: leg_dim(d, k) };
    let mut carry = permutation_vector(&Permutation::identity(k), d);
    for (s, pair) in gates.chunks(2).enumerate() {
        let inner = kern.right(&pair[0], &bra[2 * s], &carry, &ket[2 * s]);
        carry = kern.left(&pair[1], &inner, &ket[2 * s + 1], &bra[2 * s + 1]);
    }
    let fin = permutation_vector(&Permutation::cyclic(k), d);
    Ok(tensor::vdot_bilinear(&fin, &carry) / d as f64)
}

/// Weight of a multichain in the IM:
/// `∏ᵢ μ(σ_{2i−1},σ_{2i}) d^{|σ_{2i}|−|σ_{2i−1}|−k}`.
pub fn im_weight(lat: &NcLattice, chain: &[usize], d: usize) -> f64 {
    let k = lat.k() as i32;
    chain
        .chunks(2)
        .map(|p| {
            let e = lat.cycle_count(p[1]) as i32 - lat.cycle_count(p[0]) as i32 - k;
            lat.moebius(p[0], p[1]) as f64 * (d as f64).powi(e)
        })
        .product()
}

/// The IM as a matrix product state over lattice labels.
///
/// The bond label is the most recent chain element. Odd sites emit `|σ)`
/// with tensor `δ_{β⊆σ}`; even sites emit `|σ′)` with weight
/// `μ(σ,σ′) d^{|σ′|−|σ|−k}`. The left boundary is the label ○ (the first
/// chain element is unconstrained because ○ lies below everything); the
/// right boundary sums over all labels.
#[derive(Debug, Clone, Serialize)]
pub struct ImMps {
    pub k: usize,
    pub d: usize,
    pub sites: usize,
    pub labels: Vec<Vec<usize>>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// `odd[β][σ] = δ_{β⊆σ}`
    pub odd: Vec<Vec<f64>>,
    /// `even[σ][σ′] = μ(σ,σ′) d^{|σ′|−|σ|−k}`
    pub even: Vec<Vec<f64>>,
}

impl ImMps {
    pub fn new(lat: &NcLattice, d: usize, sites: usize) -> Self {
        let n = lat.len();
        let k = lat.k();
        let odd = (0..n).map(|b| (0..n).map(|s| if lat.leq(b, s) { 1.0 } else { 0.0 }).collect()).collect();
        let even = (0..n)
            .map(|s| {
                (0..n)
                    .map(|sp| {
                        let e = lat.cycle_count(sp) as i32 - lat.cycle_count(s) as i32 - k as i32;
                        lat.moebius(s, sp) as f64 * (d as f64).powi(e)
                    })
                    .collect()
            })
            .collect();
        let mut left = vec![0.0; n];
        left[lat.identity_index()] = 1.0;
        Self {
            k,
            d,
            sites,
            labels: lat.elements().iter().map(|p| p.images().to_vec()).collect(),
            left,
            right: vec![1.0; n],
            odd,
            even,
        }
    }

    fn bond(&self) -> usize {
        self.left.len()
    }

    /// Weight of a chain from the transfer matrices of the MPS.
    pub fn chain_weight(&self, chain: &[usize]) -> f64 {
        let mut v = self.left.clone();
        for (i, &s) in chain.iter().enumerate() {
            let tensor = if i % 2 == 0 { &self.odd } else { &self.even };
            let mut w = vec![0.0; self.bond()];
            w[s] = (0..self.bond()).map(|b| v[b] * tensor[b][s]).sum();
            v = w;
        }
        v.iter().zip(&self.right).map(|(x, y)| x * y).sum()
    }

    /// Site tensor `[bond_in, physical, bond_out]` with physical leg `d^{2k}`.
    pub fn site_tensor(&self, site: usize) -> Array3<C64> {
        let n = self.bond();
        let phys = leg_dim(self.d, self.k);
        let tensor = if site.is_multiple_of(2) { &self.odd } else { &self.even };
        let vecs: Vec<Vec<C64>> =
            self.labels.iter().map(|im| permutation_vector(&Permutation::new(im.clone()).expect("stored label"), self.d)).collect();
        Array3::from_shape_fn((n, phys, n), |(b, x, s)| vecs[s][x] * tensor[b][s])
    }

    /// Dense contraction of the MPS (sum over label paths).
    pub fn to_dense(&self) -> Result<TemporalState, SpacetimeError> {
        let n = self.bond();
        let phys = leg_dim(self.d, self.k);
        check_dense(self.d, self.k, self.sites)?;
        // env[label] = partial dense vector
        let mut env: Vec<Vec<C64>> = (0..n).map(|b| vec![C64::new(self.left[b], 0.0)]).collect();
        for site in 0..self.sites {
            let t = self.site_tensor(site);
            let len = env[0].len();
            let mut next = vec![vec![c0(); len * phys]; n];
            for (b, e) in env.iter().enumerate() {
                for s in 0..n {
                    for x in 0..phys {
                        let w = t[[b, x, s]];
                        if w.norm() == 0.0 {
                            continue;
                        }
                        for (i, z) in e.iter().enumerate() {
                            next[s][i * phys + x] += z * w;
                        }
                    }
                }
            }
            env = next;
        }
        let mut data = vec![c0(); env[0].len()];
        for (s, e) in env.iter().enumerate() {
            for (dst, z) in data.iter_mut().zip(e) {
                *dst += z * self.right[s];
            }
        }
        Ok(TemporalState { d: self.d, k: self.k, m: self.sites, data })
    }
}

/// The IM at time `t` in three equivalent forms.
#[derive(Debug, Clone)]
pub struct InfluenceMatrix {
    pub t: usize,
    pub d: usize,
    pub k: usize,
    pub chains: Vec<Multichain>,
    pub weights: Vec<f64>,
    pub mps: ImMps,
    /// Present when the dense vector fits the entry budget.
    pub dense: Option<TemporalState>,
}

pub fn influence_matrix(t: usize, d: usize, k: usize) -> Result<InfluenceMatrix, SpacetimeError> {
    if t < 2 {
        return Err(SpacetimeError::Time(t, 2));
    }
    let lat = NcLattice::new(k)?;
    let m = 2 * (t - 1);
    let chains = lat.multichains(m)?;
    let weights: Vec<f64> = chains.iter().map(|c| im_weight(&lat, &c.chain, d)).collect();
    let dense = if dense_entries(d, k, m) <= MAX_DENSE_ENTRIES as u128 {
        let mut s = TemporalState::zeros(d, k, m)?;
        for (c, &w) in chains.iter().zip(&weights) {
            if w != 0.0 {
                s.axpy(C64::new(w, 0.0), &multichain_state(&lat, &c.chain, d)?);
            }
        }
        Some(s)
    } else {
        None
    };
    Ok(InfluenceMatrix { t, d, k, chains, weights, mps: ImMps::new(&lat, d, m), dense })
}

#[derive(Debug, Serialize)]
struct ImExport<'a> {
    t: usize,
    d: usize,
    k: usize,
    chains: Vec<&'a [usize]>,
    weights: &'a [f64],
    mps: &'a ImMps,
}

impl InfluenceMatrix {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&ImExport {
            t: self.t,
            d: self.d,
            k: self.k,
            chains: self.chains.iter().map(|c| c.chain.as_slice()).collect(),
            weights: &self.weights,
            mps: &self.mps,
        })
    }
}

/// `(ν⃗|𝒯|ℐ)` by sweeping the MPS labels alongside the carried worldline.
pub fn transfer_on_im(gates: &[Gate], bra: &[Vec<C64>], lat: &NcLattice) -> Result<C64, SpacetimeError> {
    let d = gates.first().map(Gate::d).ok_or_else(|| SpacetimeError::Shape("no gates".into()))?;
    let k = lat.k();
    check_gates(gates, bra.len(), d)?;
    let n = leg_dim(d, k);
    let nl = lat.len();
    let kern = StepKernel { d, k, n };
    let perms: Vec<Vec<C64>> = lat.elements().iter().map(|p| permutation_vector(p, d)).collect();
    let mut carries: Vec<Option<Vec<C64>>> = vec![None; nl];
    carries[lat.identity_index()] = Some(permutation_vector(&Permutation::identity(k), d));
    for (s, pair) in gates.chunks(2).enumerate() {
        let mut inner: Vec<Option<Vec<C64>>> = vec![None; nl];
        for sigma in 0..nl {
            let mut acc = vec![c0(); n];
            let mut any = false;
            for (beta, c) in carries.iter().enumerate() {
                if let Some(c) = c {
                    if lat.leq(beta, sigma) {
                        acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
                        any = true;
                    }
                }
            }
            if any {
                inner[sigma] = Some(kern.right(&pair[0], &bra[2 * s], &acc, &perms[sigma]));
            }
        }
        let mut next: Vec<Option<Vec<C64>>> = vec![None; nl];
        for (sigma, o) in inner.iter().enumerate() {
            let Some(o) = o else { continue };
            for sp in lat.above(sigma) {
                let e = lat.cycle_count(sp) as i32 - lat.cycle_count(sigma) as i32 - k as i32;
                let w = lat.moebius(sigma, sp) as f64 * (d as f64).powi(e);
                let c = kern.left(&pair[1], o, &perms[sp], &bra[2 * s + 1]);
                let slot = next[sp].get_or_insert_with(|| vec![c0(); n]);
                slot.iter_mut().zip(&c).for_each(|(a, b)| *a += b * w);
            }
        }
        carries = next;
    }
    let fin = permutation_vector(&Permutation::cyclic(k), d);
    let total: C64 = carries.iter().flatten().map(|c| tensor::vdot_bilinear(&fin, c)).sum();
    Ok(total / d as f64)
}

/// Orthogonal projection onto the span of multichain states, expressed in
/// the (non-orthogonal) multichain basis.
#[derive(Debug, Clone)]
pub struct Projection {
    pub chains: Vec<Multichain>,
    pub coefficients: Vec<C64>,
    pub condition: f64,
}

/// Gram matrix `(ν⃗|σ⃗)` over the given chains.
pub fn gram_matrix(lat: &NcLattice, chains: &[Multichain], d: usize) -> Array2<f64> {
    let n = chains.len();
    Array2::from_shape_fn((n, n), |(i, j)| chain_overlap(lat, &chains[i].chain, &chains[j].chain, d))
}

/// Solves `G c = overlaps` for the projection coefficients.
pub fn project_overlaps(
    lat: &NcLattice,
    chains: &[Multichain],
    d: usize,
    overlaps: &[C64],
) -> Result<Projection, SpacetimeError> {
    let g = gram_matrix(lat, chains, d);
    let (w, v) = g.eigh(UPLO::Lower)?;
    let wmax = w.iter().copied().fold(0.0, f64::max);
    let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = wmax / wmin;
    if !(wmin > 0.0) || condition > 1e12 {
        return Err(SpacetimeError::IllConditioned { condition });
    }
    let o = Array1::from(overlaps.to_vec());
    let vt_o: Array1<C64> = v.t().mapv(|x| C64::new(x, 0.0)).dot(&o);
    let scaled: Array1<C64> = vt_o.iter().zip(w.iter()).map(|(z, &l)| z / l).collect();
    let coeffs = v.mapv(|x| C64::new(x, 0.0)).dot(&scaled);
    Ok(Projection { chains: chains.to_vec(), coefficients: coeffs.to_vec(), condition })
}

/// Projects a dense temporal state onto the multichain span.
pub fn project_multichain(state: &TemporalState) -> Result<Projection, SpacetimeError> {
    let lat = NcLattice::new(state.k)?;
    let chains = lat.multichains(state.m)?;
    let overlaps: Vec<C64> = chains
        .iter()
        .map(|c| {
            let legs: Vec<Vec<C64>> = c.chain.iter().map(|&i| permutation_vector(lat.element(i), state.d)).collect();
            state.contract_product(&legs)
        })
        .collect();
    project_overlaps(&lat, &chains, state.d, &overlaps)
}

impl Projection {
    pub fn to_dense(&self, lat: &NcLattice, d: usize) -> Result<TemporalState, SpacetimeError> {
        let m = self.chains.first().map_or(0, |c| c.chain.len());
        let mut s = TemporalState::zeros(d, lat.k(), m)?;
        for (c, &w) in self.chains.iter().zip(&self.coefficients) {
            s.axpy(w, &multichain_state(lat, &c.chain, d)?);
        }
        Ok(s)
    }

    /// `‖Σ (cᵢ − wᵢ)|σ⃗ᵢ)‖²` through the Gram matrix.
    pub fn distance_sq(&self, lat: &NcLattice, d: usize, other: &[C64]) -> f64 {
        let g = gram_matrix(lat, &self.chains, d);
        let diff: Vec<C64> = self.coefficients.iter().zip(other).map(|(a, b)| a - b).collect();
        let mut acc = c0();
        for i in 0..diff.len() {
            for j in 0..diff.len() {
                acc += diff[i].conj() * g[[i, j]] * diff[j];
            }
        }
        acc.re
    }
}

/// Left boundary contracted with a dense temporal state: the subsystem
/// worldline starts in `(a⊗1)^{⊗k}|○)`, meets the boundary gate once per
/// period, and ends in `(□|(b⊗1)^{⊗k} ⊗ (□|`. Includes the `1/d²` factor.
pub fn boundary_contract_dense(gate: &Gate, a: &Array2<C64>, b: &Array2<C64>, state: &TemporalState) -> Result<C64, SpacetimeError> {
    let (d, k, m) = (state.d, state.k, state.m);
    if gate.d() != d || m % 2 != 0 {
        return Err(SpacetimeError::Shape("boundary/state mismatch".into()));
    }
    let n = leg_dim(d, k);
    let mut pair = Vec::with_capacity(n * n);
    for x in dressed_identity(a, k) {
        pair.extend(permutation_vector(&Permutation::identity(k), d).iter().map(|y| x * y));
    }
    apply_folded(&mut pair, d, k, 2, 0, 1, gate.matrix());
    let fin_sq = dressed_cycle(b, k);
    let fin_cy = permutation_vector(&Permutation::cyclic(k), d);
    let close = |v: &[C64]| -> C64 {
        (0..n).map(|x| fin_sq[x] * tensor::vdot_bilinear(&v[x * n..(x + 1) * n], &fin_cy)).sum()
    };
    let scale = 1.0 / (d * d) as f64;
    if m == 0 {
        return Ok(close(&pair) * scale);
    }
    // R[x0, b_1, rest]: contract the first step's site-1 output with a_1
    let rest = state.data.len() / n;
    let mut run = vec![c0(); n * rest];
    for x0 in 0..n {
        for y in 0..n {
            let w = pair[x0 * n + y];
            if w.norm() == 0.0 {
                continue;
            }
            for (dst, src) in run[x0 * rest..(x0 + 1) * rest].iter_mut().zip(&state.data[y * rest..(y + 1) * rest]) {
                *dst += w * src;
            }
        }
    }
    // run legs: [x0, b_s, a_{s+1}, b_{s+1}, …]
    let mut legs = m;
    while legs > 2 {
        apply_folded(&mut run, d, k, legs, 0, 1, gate.matrix());
        // legs 1 (output a_{s+1}) and 2 (state's a_{s+1}) are joined
        let inner = run.len() / (n * n * n);
        let mut next = vec![c0(); n * inner];
        for x0 in 0..n {
            for y in 0..n {
                let off = ((x0 * n + y) * n + y) * inner;
                for (dst, src) in next[x0 * inner..(x0 + 1) * inner].iter_mut().zip(&run[off..off + inner]) {
                    *dst += src;
                }
            }
        }
        run = next;
        legs -= 2;
    }
    apply_folded(&mut run, d, k, 2, 0, 1, gate.matrix());
    Ok(close(&run) * scale)
}

/// `C_k(t)` in the thermodynamic limit: the boundary contracted with the IM,
/// evaluated by sweeping the MPS labels in time.
pub fn otoc_from_im(gate: &Gate, a: &Array2<C64>, b: &Array2<C64>, t: usize, k: usize) -> Result<C64, SpacetimeError> {
    let d = gate.d();
    let n = leg_dim(d, k);
    if t == 0 {
        let ab = a.dot(b);
        let mut p = Array2::<C64>::eye(d);
        for _ in 0..k {
            p = p.dot(&ab);
        }
        return Ok(p.diag().sum() / d as f64);
    }
    let lat = NcLattice::new(k)?;
    let nl = lat.len();
    let dd = (d * d) as f64;
    // raw[σ][β]: site 1 enters in β, leaves into σ (no 1/d²)
    let raw: Vec<Vec<Option<Array2<C64>>>> = (0..nl)
        .map(|s| {
            (0..nl)
                .map(|bt| lat.leq(bt, s).then(|| boundary_block(gate, lat.element(s), lat.element(bt)).mapv(|z| z * dd)))
                .collect()
        })
        .collect();
    let mut v: Vec<Option<Array1<C64>>> = vec![None; nl];
    v[lat.identity_index()] = Some(Array1::from(dressed_identity(a, k)));
    for _ in 0..t - 1 {
        let mut odd: Vec<Option<Array1<C64>>> = vec![None; nl];
        for s in 0..nl {
            for (bt, vb) in v.iter().enumerate() {
                if let (Some(vb), Some(m)) = (vb, &raw[s][bt]) {
                    let u = m.dot(vb);
                    match &mut odd[s] {
                        Some(acc) => *acc += &u,
                        slot => *slot = Some(u),
                    }
                }
            }
        }
        let mut even: Vec<Option<Array1<C64>>> = vec![None; nl];
        for (s, u) in odd.iter().enumerate() {
            let Some(u) = u else { continue };
            for sp in lat.above(s) {
                let e = lat.cycle_count(sp) as i32 - lat.cycle_count(s) as i32 - k as i32;
                let w = lat.moebius(s, sp) as f64 * (d as f64).powi(e);
                let add = u.mapv(|z| z * w);
                match &mut even[sp] {
                    Some(acc) => *acc += &add,
                    slot => *slot = Some(add),
                }
            }
        }
        v = even;
    }
    let fin_sq = dressed_cycle(b, k);
    let fin_cy = permutation_vector(&Permutation::cyclic(k), d);
    let mut total = c0();
    for (bt, vb) in v.iter().enumerate() {
        let Some(vb) = vb else { continue };
        let mut pair = Vec::with_capacity(n * n);
        let pv = permutation_vector(lat.element(bt), d);
        for x in vb.iter() {
            pair.extend(pv.iter().map(|y| x * y));
        }
        apply_folded(&mut pair, d, k, 2, 0, 1, gate.matrix());
        total += (0..n).map(|x| fin_sq[x] * tensor::vdot_bilinear(&pair[x * n..(x + 1) * n], &fin_cy)).sum::<C64>();
    }
    Ok(total / dd)
}

/// Gate list of the transfer matrix for bond `j` (1-based) of a circuit.
pub fn bond_gates(right: &Gate, left: &Gate, t: usize) -> Vec<Gate> {
    (0..t.saturating_sub(1)).flat_map(|_| [right.clone(), left.clone()]).collect()
}

/// `(2τ, j|𝒯|2τ, i)` between normalized `k = 2` domain walls.
pub fn domain_wall_element(gates: &[Gate], j: usize, i: usize) -> Result<C64, SpacetimeError> {
    let m = gates.len();
    let d = gates.first().map(Gate::d).ok_or_else(|| SpacetimeError::Shape("no gates".into()))?;
    if i > m || j > m {
        return Err(SpacetimeError::Shape(format!("domain wall position beyond {m} legs")));
    }
    transfer_element(gates, &domain_wall_legs(m, j, d, true), &domain_wall_legs(m, i, d, true), 2)
}

/// Largest index accepted by [`b_coefficients`].
pub const MAX_B_INDEX: usize = 6;

/// `B_n = (2τ, n+1|𝒯|2τ, 1)` for `n = 0..=i_max` (so `B₀ = 1`), evaluated
/// with one bond gate pair repeated over `τ = ⌈(i_max+1)/2⌉` periods.
pub fn b_coefficients(right: &Gate, left: &Gate, i_max: usize) -> Result<Vec<C64>, SpacetimeError> {
    if i_max > MAX_B_INDEX {
        return Err(SpacetimeError::Capacity { entries: i_max as u128, limit: MAX_B_INDEX as u128 });
    }
    let tau = (i_max + 2) / 2;
    let gates = bond_gates(right, left, tau + 1);
    (0..=i_max).map(|n| domain_wall_element(&gates, n + 1, 1)).collect()
}

/// Mirror family for walls moving towards the environment: `(2τ,0|𝒯|2τ,n)`
/// for odd `n` and `(2τ,1|𝒯|2τ,n+1)` for even `n`. Coincides with
/// [`b_coefficients`] only for reflection-symmetric bond dynamics.
pub fn b_coefficients_mirrored(right: &Gate, left: &Gate, i_max: usize) -> Result<Vec<C64>, SpacetimeError> {
    if i_max > MAX_B_INDEX {
        return Err(SpacetimeError::Capacity { entries: i_max as u128, limit: MAX_B_INDEX as u128 });
    }
    let tau = (i_max + 2) / 2;
    let gates = bond_gates(right, left, tau + 1);
    (0..=i_max)
        .map(|n| if n % 2 == 1 { domain_wall_element(&gates, 0, n) } else { domain_wall_element(&gates, 1, n + 1) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{random_cartan_gate, random_du_gate, paper_boundary_gate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn rand_state(rng: &mut ChaCha20Rng, d: usize, k: usize, m: usize) -> TemporalState {
        let mut s = TemporalState::zeros(d, k, m).unwrap();
        s.data.iter_mut().for_each(|z| *z = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        s
    }

    #[test]
    fn permutation_state_overlaps() {
        let id = permutation_state(&Permutation::identity(2), 2).unwrap();
        let cy = permutation_state(&Permutation::cyclic(2), 2).unwrap();
        assert_eq!(tensor::vdot_bilinear(&id.vector, &id.vector), C64::new(4.0, 0.0));
        assert_eq!(tensor::vdot_bilinear(&id.vector, &cy.vector), C64::new(2.0, 0.0));
        assert!(id.vector.iter().all(|z| z.im == 0.0 && (z.re == 0.0 || z.re == 1.0)));
        let crossing = Permutation::from_cycles(4, &[&[0, 2], &[1, 3]]).unwrap();
        assert!(matches!(permutation_state(&crossing, 2), Err(SpacetimeError::Domain(_))));
    }

    #[test]
    fn chain_overlaps_factorize_k3() {
        let lat = NcLattice::new(3).unwrap();
        let chains = lat.multichains(2).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = &chains[rng.random_range(0..chains.len())].chain;
            let b = &chains[rng.random_range(0..chains.len())].chain;
            let dense = multichain_state(&lat, a, 2).unwrap().dot(&multichain_state(&lat, b, 2).unwrap());
            assert!((dense.re - chain_overlap(&lat, a, b, 2)).abs() < 1e-9);
        }
    }

    #[test]
    fn cup_overlaps_and_norm() {
        for (k, t) in [(2usize, 2usize), (2, 3), (3, 2)] {
            let lat = NcLattice::new(k).unwrap();
            let cup = cup_state(t, 2, k).unwrap();
            let tau = (t - 1) as i32;
            assert!((cup.norm().powi(2) - 2f64.powi(2 * k as i32 * tau)).abs() < 1e-9);
            for c in lat.multichains(2 * (t - 1)).unwrap() {
                let dense = multichain_state(&lat, &c.chain, 2).unwrap().dot(&cup);
                let closed: f64 = c
                    .chain
                    .chunks(2)
                    .map(|p| 2f64.powi(lat.cycle_count(p[1]) as i32 - lat.cycle_count(p[0]) as i32 + k as i32))
                    .product();
                assert!((dense.re - closed).abs() < 1e-9);
                assert!((cup_overlap(&lat, &c.chain, 2) - closed).abs() < 1e-12);
            }
        }
        assert!(cup_state(1, 2, 2).is_err());
    }

    #[test]
    fn normalized_domain_wall_cup_overlaps() {
        for t in 2..=4 {
            let m = 2 * (t - 1);
            let cup = cup_state(t, 2, 2).unwrap();
            for j in 0..=m {
                let ov = domain_wall_state(m, j, 2, true).unwrap().dot(&cup);
                let expect = if j % 2 == 0 { 1.0 } else { 0.5 };
                assert!((ov.re - expect).abs() < 1e-12, "t={t} j={j}");
            }
        }
    }

    #[test]
    fn swap_transfer_is_identity() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let s = rand_state(&mut rng, 2, 2, 4);
        let out = transfer_apply(&vec![Gate::swap(2); 4], &s).unwrap();
        assert!(out.max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn dense_and_product_sweeps_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let gates: Vec<Gate> = (0..4).map(|_| random_cartan_gate(&mut rng, 0.5, (0.0, 1.0))).collect();
        let lat = NcLattice::new(2).unwrap();
        let chains = lat.multichains(4).unwrap();
        for nu in &chains {
            for sg in &chains {
                let bra: Vec<Vec<C64>> = nu.chain.iter().map(|&i| permutation_vector(lat.element(i), 2)).collect();
                let ket: Vec<Vec<C64>> = sg.chain.iter().map(|&i| permutation_vector(lat.element(i), 2)).collect();
                let fast = transfer_element(&gates, &bra, &ket, 2).unwrap();
                let dense = transfer_apply(&gates, &multichain_state(&lat, &sg.chain, 2).unwrap()).unwrap();
                let slow = dense.contract_product(&bra);
                assert!((fast - slow).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_gate_matrix_elements() {
        // without the 1/d prefactor the identity network evaluates to
        // d·∏ d^{|σ_{2i−1}|−|σ_{2i}|+k} ∏ d^{|ν_{2i}|−|ν_{2i−1}|+k}
        let lat = NcLattice::new(2).unwrap();
        let d = 2usize;
        let gates = vec![Gate::identity(d); 4];
        let chains = lat.multichains(4).unwrap();
        let pw = |e: i32| (d as f64).powi(e);
        for nu in &chains {
            for sg in &chains {
                let bra: Vec<Vec<C64>> = nu.chain.iter().map(|&i| permutation_vector(lat.element(i), d)).collect();
                let ket: Vec<Vec<C64>> = sg.chain.iter().map(|&i| permutation_vector(lat.element(i), d)).collect();
                let el = transfer_element(&gates, &bra, &ket, 2).unwrap();
                let cc = |i: usize| lat.cycle_count(i) as i32;
                let ket_f: f64 = sg.chain.chunks(2).map(|p| pw(cc(p[0]) - cc(p[1]) + 2)).product();
                let bra_f: f64 = nu.chain.chunks(2).map(|p| pw(cc(p[1]) - cc(p[0]) + 2)).product();
                assert!((el.re * d as f64 - d as f64 * ket_f * bra_f).abs() < 1e-9, "{:?} {:?}", nu.chain, sg.chain);
            }
        }
    }

    #[test]
    fn du_transfer_fixes_multichains() {
        let lat = NcLattice::new(2).unwrap();
        let gates: Vec<Gate> = (0..4).map(|s| random_du_gate(s, (0.0, 1.0))).collect();
        for c in lat.multichains(4).unwrap() {
            let s = multichain_state(&lat, &c.chain, 2).unwrap();
            let out = transfer_apply(&gates, &s).unwrap();
            let mut diff = out.clone();
            diff.axpy(C64::new(-1.0, 0.0), &s);
            assert!(diff.norm() / s.norm() < 1e-10);
        }
        // left eigenstates as well, k = 3 through product sweeps
        let lat3 = NcLattice::new(3).unwrap();
        let g2: Vec<Gate> = (10..12).map(|s| random_du_gate(s, (0.0, 1.0))).collect();
        for nu in lat3.multichains(2).unwrap() {
            for sg in lat3.multichains(2).unwrap() {
                let bra: Vec<Vec<C64>> = nu.chain.iter().map(|&i| permutation_vector(lat3.element(i), 2)).collect();
                let ket: Vec<Vec<C64>> = sg.chain.iter().map(|&i| permutation_vector(lat3.element(i), 2)).collect();
                let el = transfer_element(&g2, &bra, &ket, 3).unwrap();
                let ov = chain_overlap(&lat3, &nu.chain, &sg.chain, 2);
                assert!((el - ov).norm() < 1e-10 * ov.max(1.0));
            }
        }
    }

    #[test]
    fn influence_matrix_two_steps() {
        let im = influence_matrix(2, 2, 2).unwrap();
        let lat = NcLattice::new(2).unwrap();
        let mut expect = TemporalState::zeros(2, 2, 2).unwrap();
        expect.axpy(C64::new(0.25, 0.0), &multichain_state(&lat, &[1, 1], 2).unwrap());
        expect.axpy(C64::new(0.25, 0.0), &multichain_state(&lat, &[0, 0], 2).unwrap());
        expect.axpy(C64::new(-0.125, 0.0), &multichain_state(&lat, &[0, 1], 2).unwrap());
        assert!(im.dense.as_ref().unwrap().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn influence_matrix_domain_wall_overlaps() {
        for t in 2..=4 {
            let im = influence_matrix(t, 2, 2).unwrap();
            let m = 2 * (t - 1);
            for j in 0..=m {
                let ov = domain_wall_state(m, j, 2, true).unwrap().dot(im.dense.as_ref().unwrap());
                let expect = if j % 2 == 0 { 1.0 } else { 0.5 };
                assert!((ov.re - expect).abs() < 1e-12, "t={t} j={j} {ov}");
            }
        }
    }

    #[test]
    fn mps_matches_dense_and_weights() {
        for (k, t) in [(2usize, 2usize), (2, 3), (3, 2)] {
            let im = influence_matrix(t, 2, k).unwrap();
            let mps_dense = im.mps.to_dense().unwrap();
            assert!(mps_dense.max_abs_diff(im.dense.as_ref().unwrap()) < 1e-12);
            for (c, &w) in im.chains.iter().zip(&im.weights) {
                assert!((im.mps.chain_weight(&c.chain) - w).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mps_left_boundary_needs_identity_label() {
        // the right boundary sums over labels; summing the left one too would
        // overcount chains whose first element has several lower bounds
        let lat = NcLattice::new(3).unwrap();
        let mut mps = ImMps::new(&lat, 2, 2);
        let exact: Vec<f64> = lat.multichains(2).unwrap().iter().map(|c| mps.chain_weight(&c.chain)).collect();
        mps.left = vec![1.0; lat.len()];
        let summed: Vec<f64> = lat.multichains(2).unwrap().iter().map(|c| mps.chain_weight(&c.chain)).collect();
        assert!(exact.iter().zip(&summed).any(|(a, b)| (a - b).abs() > 1e-12));
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let lat = NcLattice::new(2).unwrap();
        for _ in 0..3 {
            let v = rand_state(&mut rng, 2, 2, 4);
            let p = project_multichain(&v).unwrap();
            let pv = p.to_dense(&lat, 2).unwrap();
            let ppv = project_multichain(&pv).unwrap().to_dense(&lat, 2).unwrap();
            assert!(ppv.max_abs_diff(&pv) < 1e-9);
        }
    }

    #[test]
    fn projected_cup_is_the_influence_matrix() {
        for (k, t) in [(2usize, 2usize), (2, 3), (3, 2)] {
            let im = influence_matrix(t, 2, k).unwrap();
            let p = project_multichain(&cup_state(t, 2, k).unwrap()).unwrap();
            let lat = NcLattice::new(k).unwrap();
            let dense = p.to_dense(&lat, 2).unwrap();
            assert!(dense.max_abs_diff(im.dense.as_ref().unwrap()) < 1e-9, "k={k} t={t}");
        }
    }

    #[test]
    fn theorem_for_generic_gates() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for (k, t) in [(2usize, 2usize), (2, 3), (3, 2)] {
            let lat = NcLattice::new(k).unwrap();
            let m = 2 * (t - 1);
            let gates: Vec<Gate> = (0..m)
                .map(|_| {
                    let tau = 0.3 + rng.random::<f64>();
                    random_cartan_gate(&mut rng, tau, (0.0, 1.0))
                })
                .collect();
            for nu in lat.multichains(m).unwrap() {
                let bra: Vec<Vec<C64>> = nu.chain.iter().map(|&i| permutation_vector(lat.element(i), 2)).collect();
                let lhs = transfer_on_im(&gates, &bra, &lat).unwrap();
                let rhs = cup_overlap(&lat, &nu.chain, 2);
                assert!((lhs - rhs).norm() / rhs.abs() < 1e-9, "k={k} t={t} {:?}: {lhs} vs {rhs}", nu.chain);
            }
        }
    }

    #[test]
    fn transfer_on_im_matches_dense() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let lat = NcLattice::new(2).unwrap();
        let gates: Vec<Gate> = (0..4).map(|_| random_cartan_gate(&mut rng, 0.5, (0.0, 1.0))).collect();
        let im = influence_matrix(3, 2, 2).unwrap();
        let ti = transfer_apply(&gates, im.dense.as_ref().unwrap()).unwrap();
        for nu in lat.multichains(4).unwrap() {
            let bra: Vec<Vec<C64>> = nu.chain.iter().map(|&i| permutation_vector(lat.element(i), 2)).collect();
            let fast = transfer_on_im(&gates, &bra, &lat).unwrap();
            assert!((fast - ti.contract_product(&bra)).norm() < 1e-12);
        }
    }

    #[test]
    fn im_sweep_matches_semigroup() {
        let (g, _) = paper_boundary_gate();
        let spec = crate::channel::channel_spectrum(&crate::channel::channel_from_gate(&g)).unwrap();
        let (a, b) = (&spec.leading.a, &spec.leading.b);
        let semi = crate::channel::c2_semigroup(&g, a, b, 8);
        for (t, x) in semi.iter().enumerate() {
            let y = otoc_from_im(&g, a, b, t, 2).unwrap();
            assert!((x - y).norm() < 1e-10, "t={t} {x} {y}");
        }
    }

    #[test]
    fn dense_boundary_matches_im_sweep() {
        let (g, _) = paper_boundary_gate();
        let spec = crate::channel::channel_spectrum(&crate::channel::channel_from_gate(&g)).unwrap();
        let (a, b) = (&spec.leading.a, &spec.leading.b);
        for (k, t) in [(2usize, 2usize), (2, 3), (2, 4), (3, 2)] {
            let im = influence_matrix(t, 2, k).unwrap();
            let dense = boundary_contract_dense(&g, a, b, im.dense.as_ref().unwrap()).unwrap();
            let sweep = otoc_from_im(&g, a, b, t, k).unwrap();
            assert!((dense - sweep).norm() < 1e-10, "k={k} t={t}");
        }
    }

    #[test]
    fn b_coefficients_for_dual_unitary_gates() {
        let g = random_du_gate(4, (0.0, 1.0));
        let h = random_du_gate(5, (0.0, 1.0));
        let b = b_coefficients(&g, &h, 5).unwrap();
        for (n, x) in b.iter().enumerate() {
            assert!((x - 0.5f64.powi(n as i32)).norm() < 1e-12, "n={n} {x}");
        }
        assert!(b_coefficients(&g, &h, 7).is_err());
    }

    /// Closed-form `(2τ,p|𝒯|2τ,q)` in terms of the coefficient families
    /// `bl` (wall moves right, `q < p`) and `br` (`q > p`).
    fn wall_table(p: usize, q: usize, bl: &[C64], br: &[C64], d: f64) -> C64 {
        let (j, i) = (p / 2, q / 2);
        match (p % 2, q % 2) {
            (0, 0) if i == j => C64::new(1.0, 0.0),
            (0, 0) if i < j => bl[2 * (j - i) - 1] / d,
            (0, 0) => br[2 * (i - j) - 1] / d,
            (0, 1) if i < j => bl[2 * (j - i) - 1],
            (0, 1) => br[2 * (i - j) + 1],
            (1, 0) if i <= j => bl[2 * (j - i)] / d,
            // shifted by one relative to the left branch; i = j + 1 is B₀/d
            (1, 0) => br[2 * (i - j - 1)] / d,
            _ if i == j => C64::new(1.0, 0.0),
            _ if i < j => bl[2 * (j - i)],
            _ => br[2 * (i - j)],
        }
    }

    #[test]
    fn domain_wall_table_from_b_coefficients() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let g = random_cartan_gate(&mut rng, 0.2, (0.0, 1.0));
        let h = random_cartan_gate(&mut rng, 0.2, (0.0, 1.0));
        for right in [&g, &h] {
            let bl = b_coefficients(&g, right, 6).unwrap();
            let br = b_coefficients_mirrored(&g, right, 6).unwrap();
            assert!((bl[0] - 1.0).norm() < 1e-12);
            let gates = bond_gates(&g, right, 4);
            let m = gates.len();
            for p in 0..=m {
                for q in 0..=m {
                    let x = domain_wall_element(&gates, p, q).unwrap();
                    let want = wall_table(p, q, &bl, &br, 2.0);
                    assert!((x - want).norm() < 1e-10, "p={p} q={q} {x} vs {want}");
                }
            }
        }
        // the two directions differ even for a shared bond gate
        let bl = b_coefficients(&g, &g, 5).unwrap();
        let br = b_coefficients_mirrored(&g, &g, 5).unwrap();
        assert!((bl[1] - br[1]).norm() < 1e-10);
        assert!((bl[3] - br[3]).norm() > 1e-7);
    }

}
