//! Two-qudit gates.
//!
//! A gate is a `d²×d²` matrix whose row and column indices are
//! `(left, right) = left·d + right`.
//!
//! Folded (replica) objects live on *legs* of dimension `d^{2k}`. A leg index
//! is the digit string `(i₁, i₁′, i₂, i₂′, …, i_k, i_k′)`, first digit most
//! significant: replica-major with ket (unprimed) and bra (primed) interleaved.
//! The folded gate acts as `g` on every ket pair and `g*` on every bra pair,
//! so that a single replica of a vectorized operator `vec(X)_{ii′} = X_{ii′}`
//! transforms as `X ↦ g X g†`.

use std::f64::consts::FRAC_PI_4;

use ndarray::{array, Array1, Array2};
use ndarray_linalg::SVD;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor;

/// Unitarity tolerance for validated gates.
pub const UNITARITY_TOL: f64 = 1e-12;
/// Entry budget for an explicitly materialized folded operator.
pub const MAX_FOLDED_ENTRIES: usize = 1 << 24;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("matrix has shape {rows}x{cols}, expected {expected}x{expected}")]
    Shape { rows: usize, cols: usize, expected: usize },
    #[error("matrix is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },
    #[error("local factor {name} is not special-unitary (unitarity {unitarity:e}, |det-1| {det:e})")]
    InvalidLocal { name: &'static str, unitarity: f64, det: f64 },
    #[error("the Cartan parametrization is only defined for qubits (d = {0})")]
    NotQubit(usize),
    #[error("folded operator with {entries} entries exceeds the budget {limit}")]
    Capacity { entries: usize, limit: usize },
    #[error("SVD failed: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
    #[error("gate JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[inline]
fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    d: usize,
    matrix: Array2<C64>,
}

impl Gate {
    /// Validates shape and unitarity.
    pub fn new(d: usize, matrix: Array2<C64>) -> Result<Self, GateError> {
        let n = d * d;
        if matrix.dim() != (n, n) {
            return Err(GateError::Shape { rows: matrix.nrows(), cols: matrix.ncols(), expected: n });
        }
        let residual = tensor::unitarity_residual(&matrix);
        if residual >= UNITARITY_TOL {
            return Err(GateError::NotUnitary { residual });
        }
        Ok(Self { d, matrix })
    }

    pub fn identity(d: usize) -> Self {
        Self { d, matrix: Array2::eye(d * d).mapv(|x: f64| c(x, 0.0)) }
    }

    pub fn swap(d: usize) -> Self {
        let n = d * d;
        let mut m = Array2::zeros((n, n));
        for a in 0..d {
            for b in 0..d {
                m[[b * d + a, a * d + b]] = c(1.0, 0.0);
            }
        }
        Self { d, matrix: m }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self { d: self.d, matrix: tensor::dagger(&self.matrix) }
    }

    /// `self · other` (other acts first).
    pub fn compose(&self, other: &Gate) -> Result<Self, GateError> {
        if self.d != other.d {
            return Err(GateError::Shape { rows: other.matrix.nrows(), cols: other.matrix.ncols(), expected: self.d * self.d });
        }
        Self::new(self.d, self.matrix.dot(&other.matrix))
    }

    pub fn unitarity_residual(&self) -> f64 {
        tensor::unitarity_residual(&self.matrix)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        tensor::max_abs_diff(&self.matrix, &tensor::dagger(&self.matrix))
    }

    /// Space-time reshuffle: `g̃[(in_r, out_r), (in_l, out_l)] = g[(out_l, out_r), (in_l, in_r)]`,
    /// i.e. the gate read as a map from the left worldline to the right one.
    pub fn reshuffled(&self) -> Array2<C64> {
        let d = self.d;
        Array2::from_shape_fn((d * d, d * d), |(row, col)| {
            let (in_r, out_r) = (row / d, row % d);
            let (in_l, out_l) = (col / d, col % d);
            self.matrix[[out_l * d + out_r, in_l * d + in_r]]
        })
    }

    pub fn to_json(&self) -> Result<String, GateError> {
        let rows = self.matrix.outer_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect();
        Ok(serde_json::to_string_pretty(&GateJson { d: self.d, rows })?)
    }

    pub fn from_json(s: &str) -> Result<Self, GateError> {
        let g: GateJson = serde_json::from_str(s)?;
        let n = g.d * g.d;
        if g.rows.len() != n || g.rows.iter().any(|r| r.len() != n) {
            return Err(GateError::Shape { rows: g.rows.len(), cols: g.rows.first().map_or(0, Vec::len), expected: n });
        }
        let m = Array2::from_shape_fn((n, n), |(i, j)| c(g.rows[i][j][0], g.rows[i][j][1]));
        Self::new(g.d, m)
    }
}

/// On-disk gate format. `serde_json` prints the shortest decimal that
/// round-trips each double exactly (at most 17 significant digits).
#[derive(Debug, Serialize, Deserialize)]
struct GateJson {
    d: usize,
    rows: Vec<Vec<[f64; 2]>>,
}

/// `(flag, residual)` with residual `‖g̃†g̃ − 1‖_max`.
pub fn is_dual_unitary(g: &Gate, tol: f64) -> (bool, f64) {
    let r = tensor::unitarity_residual(&g.reshuffled());
    (r < tol, r)
}

#[derive(Debug, Clone)]
pub struct CartanParams {
    pub tau: f64,
    pub jz: f64,
    pub u_plus: Array2<C64>,
    pub u_minus: Array2<C64>,
    pub v_plus: Array2<C64>,
    pub v_minus: Array2<C64>,
}

impl CartanParams {
    pub fn with_identity_locals(tau: f64, jz: f64) -> Self {
        let id = Array2::eye(2).mapv(|x: f64| c(x, 0.0));
        Self { tau, jz, u_plus: id.clone(), u_minus: id.clone(), v_plus: id.clone(), v_minus: id }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, tau: f64, jz_range: (f64, f64)) -> Self {
        let u_plus = random_su2(rng);
        let u_minus = random_su2(rng);
        let v_plus = random_su2(rng);
        let v_minus = random_su2(rng);
        let jz = jz_range.0 + (jz_range.1 - jz_range.0) * rng.random::<f64>();
        Self { tau, jz, u_plus, u_minus, v_plus, v_minus }
    }

    fn validate(&self) -> Result<(), GateError> {
        let locals = [("u_plus", &self.u_plus), ("u_minus", &self.u_minus), ("v_plus", &self.v_plus), ("v_minus", &self.v_minus)];
        for (name, m) in locals {
            if m.dim() != (2, 2) {
                return Err(GateError::Shape { rows: m.nrows(), cols: m.ncols(), expected: 2 });
            }
            let unitarity = tensor::unitarity_residual(m);
            let det = (m[[0, 0]] * m[[1, 1]] - m[[0, 1]] * m[[1, 0]] - 1.0).norm();
            if unitarity >= UNITARITY_TOL || det >= UNITARITY_TOL {
                return Err(GateError::InvalidLocal { name, unitarity, det });
            }
        }
        Ok(())
    }
}

/// `exp(−iτ(XX + YY + J_z ZZ))` in the computational basis.
fn xxz_propagator(tau: f64, jz: f64) -> Array2<C64> {
    let outer = C64::from_polar(1.0, -tau * jz);
    let inner = C64::from_polar(1.0, tau * jz);
    let (s, co) = (2.0 * tau).sin_cos();
    let mut m = Array2::zeros((4, 4));
    m[[0, 0]] = outer;
    m[[3, 3]] = outer;
    m[[1, 1]] = inner * co;
    m[[2, 2]] = inner * co;
    m[[1, 2]] = inner * c(0.0, -s);
    m[[2, 1]] = inner * c(0.0, -s);
    m
}

/// `(v₊⊗v₋)·exp(−iτ(XX+YY+J_z ZZ))·(u₊⊗u₋)`; dual-unitary at `τ = π/4`.
pub fn cartan_gate(p: &CartanParams) -> Result<Gate, GateError> {
    p.validate()?;
    let before = tensor::kron(&p.u_plus, &p.u_minus);
    let after = tensor::kron(&p.v_plus, &p.v_minus);
    let m = after.dot(&xxz_propagator(p.tau, p.jz)).dot(&before);
    Gate::new(2, m)
}

/// Haar-random SU(2) from a normalized Gaussian quaternion.
pub fn random_su2<R: Rng + ?Sized>(rng: &mut R) -> Array2<C64> {
    let mut q = [0.0f64; 4];
    for x in &mut q {
        *x = rng.sample(StandardNormal);
    }
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [a, b, cc, dd] = q.map(|x| x / n);
    array![[c(a, b), c(cc, dd)], [c(-cc, dd), c(a, -b)]]
}

/// Random dual-unitary qubit gate: Cartan form at `τ = π/4`, Haar locals,
/// `J_z` uniform in `jz_range`. Deterministic in `seed`.
pub fn random_du_gate(seed: u64, jz_range: (f64, f64)) -> Gate {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    random_cartan_gate(&mut rng, FRAC_PI_4, jz_range)
}

pub fn random_cartan_gate<R: Rng + ?Sized>(rng: &mut R, tau: f64, jz_range: (f64, f64)) -> Gate {
    cartan_gate(&CartanParams::random(rng, tau, jz_range)).expect("Haar locals are special-unitary")
}

/// The fixed Hermitian boundary gate as printed (four decimals, so only
/// approximately unitary).
pub fn paper_boundary_matrix_raw() -> Array2<C64> {
    array![
        [c(0.7214, 0.0), c(0.3618, -0.0674), c(-0.4365, -0.1884), c(0.2964, 0.1740)],
        [c(0.3618, 0.0674), c(0.5139, 0.0), c(0.5213, 0.3501), c(-0.3428, -0.2977)],
        [c(-0.4365, 0.1884), c(0.5213, -0.3501), c(0.1888, 0.0), c(0.5821, 0.0723)],
        [c(0.2964, -0.1740), c(-0.3428, 0.2977), c(0.5821, -0.0723), c(0.5759, 0.0)],
    ]
}

/// Unitary polar factor `W V†` of `m = W Σ V†`.
pub fn polar_unitary(m: &Array2<C64>) -> Result<Array2<C64>, GateError> {
    let (w, _s, vt) = m.svd(true, true)?;
    let (w, vt) = (w.expect("requested U"), vt.expect("requested Vt"));
    Ok(w.dot(&vt))
}

/// The boundary gate re-unitarized by polar decomposition, together with its
/// leading nontrivial channel eigenvalue.
pub fn paper_boundary_gate() -> (Gate, C64) {
    let p = polar_unitary(&paper_boundary_matrix_raw()).expect("SVD of a 4x4 matrix");
    // the polar factor of a Hermitian matrix is Hermitian; remove roundoff
    let herm = (&p + &tensor::dagger(&p)).mapv(|z| z * 0.5);
    let g = Gate::new(2, herm).expect("polar factor is unitary");
    let lambda = crate::channel::channel_from_gate(&g).leading_nontrivial_eigenvalue();
    (g, lambda)
}

/// `(g ⊗ g*)^{⊗k}` materialized on two legs.
#[derive(Debug, Clone)]
pub struct FoldedOperator {
    pub d: usize,
    pub k: usize,
    pub matrix: Array2<C64>,
}

/// Materializes the folded gate. Row index = `(left leg, right leg)`.
pub fn fold(g: &Gate, k: usize) -> Result<FoldedOperator, GateError> {
    let d = g.d;
    let leg = d.pow(2 * k as u32);
    let dim = leg * leg;
    let entries = dim.saturating_mul(dim);
    if entries > MAX_FOLDED_ENTRIES {
        return Err(GateError::Capacity { entries, limit: MAX_FOLDED_ENTRIES });
    }
    let mut m = Array2::<C64>::zeros((dim, dim));
    for col in 0..dim {
        let mut v = vec![c(0.0, 0.0); dim];
        v[col] = c(1.0, 0.0);
        apply_folded(&mut v, d, k, 2, 0, 1, &g.matrix);
        m.column_mut(col).assign(&Array1::from(v));
    }
    Ok(FoldedOperator { d, k, matrix: m })
}

/// Applies `(m ⊗ m*)^{⊗k}` to legs `(leg_a, leg_b)` of a state made of
/// `n_legs` legs, each of dimension `d^{2k}`. `m` is any `d²×d²` matrix.
pub fn apply_folded(state: &mut [C64], d: usize, k: usize, n_legs: usize, leg_a: usize, leg_b: usize, m: &Array2<C64>) {
    let mc = tensor::conj(m);
    let n = n_legs * 2 * k;
    for r in 0..k {
        let (qa, qb) = (leg_a * 2 * k + 2 * r, leg_b * 2 * k + 2 * r);
        tensor::apply_two(state, d, n, qa, qb, m.view());
        tensor::apply_two(state, d, n, qa + 1, qb + 1, mc.view());
    }
}
