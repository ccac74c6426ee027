//! Exact diagonalization of the Floquet operator and the free cumulants of
//! eigenstate matrix elements (sums over pairwise distinct indices).

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eig, QR};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::FloquetOperator;
use crate::tensor;

pub const MAX_DIAG_DIM: usize = 1 << 11;
pub const MAX_NAIVE_DIM: usize = 160;
pub const MAX_FREQ_K4_DIM: usize = 1 << 10;
/// Eigenvalues of the auxiliary Hermitian matrix closer than this are
/// re-diagonalized together.
const CLUSTER_GAP: f64 = 1e-6;
/// Mixing coefficient of the anti-Hermitian part; irrational to avoid
/// accidental coincidences.
const MIX: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Error)]
pub enum EthError {
    #[error("{what}: dimension {dim} exceeds {limit}")]
    Capacity { what: &'static str, dim: usize, limit: usize },
    #[error("eigendecomposition residual {0:e} above tolerance")]
    Numerical(f64),
    #[error("observable must be {d}×{d}")]
    Observable { d: usize },
    #[error("empty frequency grid")]
    EmptyGrid,
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub dim: usize,
    /// Eigenphases in `(−π, π]`.
    pub phases: Vec<f64>,
    pub basis: Array2<C64>,
    pub elem_a: Array2<C64>,
    pub elem_b: Array2<C64>,
    pub reconstruction_residual: f64,
}

/// `o ⊗ 1` on a chain of `dim` states with `o` on the leading qudit.
fn lift(o: &Array2<C64>, dim: usize) -> Array2<C64> {
    let d = o.nrows();
    let rest = dim / d;
    let mut m = Array2::zeros((dim, dim));
    for i in 0..d {
        for j in 0..d {
            for r in 0..rest {
                m[[i * rest + r, j * rest + r]] = o[[i, j]];
            }
        }
    }
    m
}

/// Orthonormal eigenbasis of a unitary matrix.
///
/// Both Hermitian parts of `U` are diagonalized through one generic
/// combination `(U+U†)/2 + c(U−U†)/2i`; clusters of nearly equal
/// eigenvalues are re-diagonalized with `U` itself.
pub fn unitary_eigenbasis(u: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>), EthError> {
    let n = u.nrows();
    let ud = tensor::dagger(u);
    let h = (u + &ud).mapv(|z| z * 0.5) + (u - &ud).mapv(|z| z * C64::new(0.0, -0.5 * MIX));
    let (w, mut v) = tensor::hermitian_eigh(&h)?;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && w[end] - w[end - 1] < CLUSTER_GAP {
            end += 1;
        }
        if end - start > 1 {
            let block = v.slice(s![.., start..end]).to_owned();
            let small = tensor::dagger(&block).dot(u).dot(&block);
            let (_, vecs) = small.eig()?;
            let (q, _) = vecs.qr()?;
            let rotated = block.dot(&q);
            v.slice_mut(s![.., start..end]).assign(&rotated);
        }
        start = end;
    }
    let uv = u.dot(&v);
    let phases = (0..n)
        .map(|i| {
            let col = v.column(i);
            let z: C64 = col.iter().zip(uv.column(i).iter()).map(|(x, y)| x.conj() * y).sum();
            z.arg()
        })
        .collect();
    Ok((phases, v))
}

pub fn diagonalize(fl: &FloquetOperator, a: &Array2<C64>, b: &Array2<C64>) -> Result<SpectralData, EthError> {
    let dim = fl.dim;
    if dim > MAX_DIAG_DIM {
        return Err(EthError::Capacity { what: "diagonalization", dim, limit: MAX_DIAG_DIM });
    }
    let d = a.nrows();
    if a.ncols() != d || b.dim() != (d, d) || !dim.is_multiple_of(d) {
        return Err(EthError::Observable { d });
    }
    let (phases, basis) = unitary_eigenbasis(&fl.matrix)?;
    let vd = tensor::dagger(&basis);
    let diag: Array2<C64> = Array2::from_diag(&phases.iter().map(|&p| C64::from_polar(1.0, p)).collect::<Array1<_>>());
    let recon = basis.dot(&diag).dot(&vd);
    let residual = tensor::max_abs_diff(&recon, &fl.matrix);
    if residual > 1e-8 {
        return Err(EthError::Numerical(residual));
    }
    let elem_a = vd.dot(&lift(a, dim)).dot(&basis);
    let elem_b = vd.dot(&lift(b, dim)).dot(&basis);
    Ok(SpectralData { dim, phases, basis, elem_a, elem_b, reconstruction_residual: residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    InclusionExclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Time,
    Frequency,
}

#[derive(Debug, Clone, Serialize)]
pub struct CumulantSeries {
    pub domain: Domain,
    pub grid: Vec<f64>,
    pub k2: Vec<C64>,
    pub k4: Vec<C64>,
    pub method: Method,
}

impl SpectralData {
    /// `Ã_ij = A_ij e^{iω_ij t}`: the Heisenberg-evolved observable.
    pub fn evolved_a(&self, t: f64) -> Array2<C64> {
        let ph: Vec<C64> = self.phases.iter().map(|&p| C64::from_polar(1.0, p * t)).collect();
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.elem_a[[i, j]] * ph[i] * ph[j].conj())
    }

    /// `k₂(t) = (1/D) Σ_{i≠j} A_ij B_ji e^{iω_ij t}`.
    pub fn k2(&self, t: f64) -> C64 {
        let at = self.evolved_a(t);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    acc += at[[i, j]] * self.elem_b[[j, i]];
                }
            }
        }
        acc / self.dim as f64
    }

    /// Static `k₂` from traces: `(tr(AB) − Σ_i A_ii B_ii)/D`.
    pub fn k2_static_from_traces(&self, a: &Array2<C64>, b: &Array2<C64>) -> C64 {
        let d = a.nrows();
        let tr_ab: C64 = a.dot(b).diag().sum() * (self.dim / d) as f64;
        let diag: C64 = (0..self.dim).map(|i| self.elem_a[[i, i]] * self.elem_b[[i, i]]).sum();
        (tr_ab - diag) / self.dim as f64
    }

    /// Distinct-index `k₄(t)` by the quadruple loop (oracle).
    pub fn k4_naive(&self, t: f64) -> Result<C64, EthError> {
        let n = self.dim;
        if n > MAX_NAIVE_DIM {
            return Err(EthError::Capacity { what: "naive quadruple sum", dim: n, limit: MAX_NAIVE_DIM });
        }
        let at = self.evolved_a(t);
        let b = &self.elem_b;
        let total: C64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = C64::new(0.0, 0.0);
                for j in (0..n).filter(|&j| j != i) {
                    for k in (0..n).filter(|&k| k != i && k != j) {
                        let left = at[[i, j]] * b[[j, k]];
                        for l in (0..n).filter(|&l| l != i && l != j && l != k) {
                            acc += left * at[[k, l]] * b[[l, i]];
                        }
                    }
                }
                acc
            })
            .sum();
        Ok(total / n as f64)
    }

    /// `(1/D)·tr(ÃBÃB)`, the unrestricted sum, and the distinct-index sum
    /// from inclusion–exclusion over the set partitions of `{i,j,k,l}`.
    fn four_point_sums(&self, t: f64) -> (C64, C64) {
        let n = self.dim;
        let at = self.evolved_a(t);
        let b = &self.elem_b;
        let p = at.dot(b);
        let q = b.dot(&at);
        let ad: Vec<C64> = (0..n).map(|i| at[[i, i]]).collect();
        let bd: Vec<C64> = (0..n).map(|i| b[[i, i]]).collect();
        let zero = C64::new(0.0, 0.0);
        // all entries O(D²) once P = ÃB and Q = BÃ are known
        let (mut full, mut s12, mut s23, mut s34, mut s14) = (zero, zero, zero, zero, zero);
        let (mut s12_34, mut s14_23, mut s13_24) = (zero, zero, zero);
        for i in 0..n {
            let (mut bab, mut aba) = (zero, zero);
            for k in 0..n {
                full += p[[i, k]] * p[[k, i]];
                bab += q[[i, k]] * b[[k, i]];
                aba += p[[i, k]] * at[[k, i]];
                s23 += at[[i, k]] * bd[k] * p[[k, i]];
                s34 += p[[i, k]] * ad[k] * b[[k, i]];
                s12_34 += ad[i] * ad[k] * b[[i, k]] * b[[k, i]];
                s14_23 += at[[i, k]] * at[[k, i]] * bd[k] * bd[i];
                let x = at[[i, k]] * b[[k, i]];
                s13_24 += x * x;
            }
            s12 += ad[i] * bab;
            s14 += bd[i] * aba;
        }
        let s13: C64 = (0..n).map(|i| p[[i, i]] * p[[i, i]]).sum();
        let s24: C64 = (0..n).map(|i| q[[i, i]] * q[[i, i]]).sum();
        let s123: C64 = (0..n).map(|i| ad[i] * bd[i] * p[[i, i]]).sum();
        let s124: C64 = (0..n).map(|i| ad[i] * bd[i] * q[[i, i]]).sum();
        let s1234: C64 = (0..n).map(|i| ad[i] * ad[i] * bd[i] * bd[i]).sum();
        // triples {i,j,k} and {i,k,l} coincide with s123, {j,k,l} with s124
        let distinct = full - (s12 + s23 + s34 + s14 + s13 + s24) + (s12_34 + s14_23 + s13_24) + (s123 * 2.0 + s124 * 2.0) * 2.0
            - s1234 * 6.0;
        (full / n as f64, distinct / n as f64)
    }

    pub fn k4(&self, t: f64) -> C64 {
        self.four_point_sums(t).1
    }

    /// `C₂(t) − k₄(t) − 2k₂(t)²`: index coincidences not captured by the
    /// free-cumulant decomposition.
    pub fn coincidence_remainder(&self, t: f64) -> C64 {
        let (full, distinct) = self.four_point_sums(t);
        let k2 = self.k2(t);
        full - distinct - k2 * k2 * 2.0
    }

    /// `C₂(t) = tr(A(t)BA(t)B)/D` in the eigenbasis.
    pub fn c2(&self, t: f64) -> C64 {
        self.four_point_sums(t).0
    }
}

pub fn eth_cumulants_time(sd: &SpectralData, times: &[i64], method: Method) -> Result<CumulantSeries, EthError> {
    let k4: Vec<C64> = match method {
        Method::Naive => times.iter().map(|&t| sd.k4_naive(t as f64)).collect::<Result<_, _>>()?,
        Method::InclusionExclusion => times.iter().map(|&t| sd.k4(t as f64)).collect(),
    };
    Ok(CumulantSeries {
        domain: Domain::Time,
        grid: times.iter().map(|&t| t as f64).collect(),
        k2: times.iter().map(|&t| sd.k2(t as f64)).collect(),
        k4,
        method,
    })
}

/// `(−π, π]` reduction.
pub fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// `n` uniform points `−π + 2π(m+1)/n` on `(−π, π]`; differences of grid
/// points are grid points modulo 2π.
pub fn omega_grid(n: usize) -> Vec<f64> {
    let w = 2.0 * PI / n as f64;
    (0..n).map(|m| -PI + (m as f64 + 1.0) * w).collect()
}

/// Truncation of the Gaussian time window `e^{−t²/2ν}` at `e^{−40}`.
pub fn window_half_width(nu: f64) -> i64 {
    (80.0 * nu).sqrt().ceil() as i64
}

/// Frequency cumulants with the Dirac comb `2π δ^{(2π)}` replaced by a
/// Gaussian of variance `1/ν`.
///
/// `k₂(ω)` is accumulated directly over eigenphase pairs; `k₄(ω)` as the
/// windowed Fourier sum `Σ_t e^{−t²/2ν} k₄(t) e^{−iωt}`, which is the same
/// smoothed comb evaluated through the distinct-index time series.
pub fn eth_cumulants_freq(sd: &SpectralData, omegas: &[f64], nu: f64, with_k4: bool) -> Result<CumulantSeries, EthError> {
    if omegas.is_empty() {
        return Err(EthError::EmptyGrid);
    }
    if with_k4 && sd.dim > MAX_FREQ_K4_DIM {
        return Err(EthError::Capacity { what: "frequency k4", dim: sd.dim, limit: MAX_FREQ_K4_DIM });
    }
    let k2 = k2_pair_histogram(sd, omegas, nu);
    let k4 = if with_k4 {
        let half = window_half_width(nu);
        let times: Vec<i64> = (-half..=half).collect();
        let series: Vec<C64> = times.iter().map(|&t| sd.k4(t as f64)).collect();
        windowed_fourier(&times, &series, omegas, nu)
    } else {
        Vec::new()
    };
    Ok(CumulantSeries { domain: Domain::Frequency, grid: omegas.to_vec(), k2, k4, method: Method::InclusionExclusion })
}

/// `(2π/D) Σ_{i≠j} A_ij B_ji δ_ν(ω − ω_ij)` with wrapped differences.
pub fn k2_pair_histogram(sd: &SpectralData, omegas: &[f64], nu: f64) -> Vec<C64> {
    let n = sd.dim;
    let norm = (nu / (2.0 * PI)).sqrt() * 2.0 * PI / n as f64;
    let cutoff = 12.0 / nu.sqrt();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![C64::new(0.0, 0.0); omegas.len()];
            for j in (0..n).filter(|&j| j != i) {
                let w = sd.elem_a[[i, j]] * sd.elem_b[[j, i]];
                let wij = sd.phases[i] - sd.phases[j];
                for (slot, &om) in acc.iter_mut().zip(omegas) {
                    let x = wrap_phase(om - wij);
                    if x.abs() < cutoff {
                        *slot += w * (-0.5 * nu * x * x).exp();
                    }
                }
            }
            acc
        })
        .reduce(
            || vec![C64::new(0.0, 0.0); omegas.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
        .into_iter()
        .map(|z| z * norm)
        .collect()
}

/// `Σ_t e^{−t²/2ν} s(t) e^{−iωt}`.
pub fn windowed_fourier(times: &[i64], series: &[C64], omegas: &[f64], nu: f64) -> Vec<C64> {
    omegas
        .iter()
        .map(|&om| {
            times
                .iter()
                .zip(series)
                .map(|(&t, &s)| {
                    let tf = t as f64;
                    s * (-tf * tf / (2.0 * nu)).exp() * C64::from_polar(1.0, -om * tf)
                })
                .sum()
        })
        .collect()
}

/// Sum rule `∫ k(ω) dω/2π` on a uniform grid.
pub fn frequency_sum_rule(values: &[C64]) -> C64 {
    values.iter().sum::<C64>() / values.len() as f64
}

/// Two-frequency oracle `k̃₄(ω₁,ω₂)` on a small grid, for `D ≤ 64`.
pub fn k4_two_frequency(sd: &SpectralData, omegas: &[f64], nu: f64) -> Result<Array2<C64>, EthError> {
    let n = sd.dim;
    if n > 64 {
        return Err(EthError::Capacity { what: "two-frequency k4", dim: n, limit: 64 });
    }
    let g = |x: f64| (nu / (2.0 * PI)).sqrt() * 2.0 * PI * (-0.5 * nu * wrap_phase(x).powi(2)).exp();
    let (a, b, ph) = (&sd.elem_a, &sd.elem_b, &sd.phases);
    let m = omegas.len();
    let mut out = Array2::<C64>::zeros((m, m));
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            for k in (0..n).filter(|&k| k != i && k != j) {
                for l in (0..n).filter(|&l| l != i && l != j && l != k) {
                    let w = a[[i, j]] * b[[j, k]] * a[[k, l]] * b[[l, i]];
                    let (w1, w2) = (ph[i] - ph[j], ph[k] - ph[l]);
                    let g1: Vec<f64> = omegas.iter().map(|&o| g(o - w1)).collect();
                    let g2: Vec<f64> = omegas.iter().map(|&o| g(o - w2)).collect();
                    for (x, gx) in g1.iter().enumerate() {
                        for (y, gy) in g2.iter().enumerate() {
                            out[[x, y]] += w * gx * gy;
                        }
                    }
                }
            }
        }
    }
    Ok(out.mapv(|z| z / n as f64))
}

/// Convolution of `k̃₄(ω₁,ω₂)` along `ω₁+ω₂ = ω` on an [`omega_grid`].
pub fn convolve_two_frequency(k: &Array2<C64>, omegas: &[f64]) -> Vec<C64> {
    let m = omegas.len();
    let dw = 2.0 * PI / m as f64;
    omegas
        .iter()
        .map(|&om| {
            let mut acc = C64::new(0.0, 0.0);
            for (x, &o1) in omegas.iter().enumerate() {
                let target = wrap_phase(om - o1);
                let y = (((target + PI) / dw) - 1.0).round().rem_euclid(m as f64) as usize;
                acc += k[[x, y]];
            }
            acc * dw / (2.0 * PI)
        })
        .collect()
}
