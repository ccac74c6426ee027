//! Exact dense simulation of the boundary-scrambling Floquet circuit.
//!
//! Site 0 is the subsystem, sites `1..=L` the bath; site 0 is the most
//! significant qudit of the `D = d^{L+1}` dimensional Hilbert space. One
//! period applies, in time order, the boundary gate on `(0,1)`, the right
//! sweep `V_{1,2}, …, V_{L−1,L}`, then the left sweep `V_{L−1,L}, …, V_{1,2}`.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use std::f64::consts::FRAC_PI_4;
use thiserror::Error;

use crate::gates::{random_cartan_gate, Gate};
use crate::tensor::{self, apply_two};

/// Dense Floquet operators are limited to `D ≤ 2¹²` by default.
pub const DEFAULT_MAX_DIM: usize = 1 << 12;
/// Default flop budget for Heisenberg evolution.
pub const DEFAULT_FLOP_BUDGET: f64 = 5e13;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("bath size L = {0} is below 2")]
    TooSmall(usize),
    #[error("{what}: {value} exceeds the limit {limit}")]
    Capacity { what: &'static str, value: f64, limit: f64 },
    #[error("gate list mismatch: {0}")]
    Gates(String),
    #[error("observable must be {d}×{d}, got {rows}×{cols}")]
    Observable { d: usize, rows: usize, cols: usize },
}

#[derive(Debug, Clone)]
pub enum BulkGates {
    /// Both sweeps reuse the same `L−1` bond gates.
    Shared(Vec<Gate>),
    /// Separate gates for the right and the left sweep.
    Independent { right: Vec<Gate>, left: Vec<Gate> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Shared,
    Independent,
}

impl std::str::FromStr for SweepMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared" => Ok(Self::Shared),
            "independent" => Ok(Self::Independent),
            other => Err(format!("unknown sweep mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CircuitSpec {
    pub l: usize,
    pub d: usize,
    pub boundary: Gate,
    pub bulk: BulkGates,
    pub seed: u64,
}

impl CircuitSpec {
    pub fn new(l: usize, boundary: Gate, bulk: BulkGates, seed: u64) -> Result<Self, CircuitError> {
        if l < 2 {
            return Err(CircuitError::TooSmall(l));
        }
        let d = boundary.d();
        let lists: Vec<&Vec<Gate>> = match &bulk {
            BulkGates::Shared(g) => vec![g],
            BulkGates::Independent { right, left } => vec![right, left],
        };
        for list in lists {
            if list.len() != l - 1 {
                return Err(CircuitError::Gates(format!("{} bond gates for L = {l}", list.len())));
            }
            if list.iter().any(|g| g.d() != d) {
                return Err(CircuitError::Gates("bond gate dimension differs from boundary gate".into()));
            }
        }
        Ok(Self { l, d, boundary, bulk, seed })
    }

    /// Random qubit bath: Cartan gates at Trotter step `tau` with Haar
    /// locals and `J_z ∈ [0, 1)`, drawn from a ChaCha20 stream seeded by `seed`.
    pub fn random_bath(l: usize, boundary: Gate, tau: f64, mode: SweepMode, seed: u64) -> Result<Self, CircuitError> {
        if l < 2 {
            return Err(CircuitError::TooSmall(l));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<Gate> { (0..n).map(|_| random_cartan_gate(&mut rng, tau, (0.0, 1.0))).collect() };
        let bulk = match mode {
            SweepMode::Shared => BulkGates::Shared(draw(l - 1)),
            SweepMode::Independent => {
                let right = draw(l - 1);
                let left = draw(l - 1);
                BulkGates::Independent { right, left }
            }
        };
        Self::new(l, boundary, bulk, seed)
    }

    /// Dual-unitary random bath.
    pub fn random_du_bath(l: usize, boundary: Gate, mode: SweepMode, seed: u64) -> Result<Self, CircuitError> {
        Self::random_bath(l, boundary, FRAC_PI_4, mode, seed)
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.l as u32 + 1)
    }

    pub fn sweep_mode(&self) -> SweepMode {
        match self.bulk {
            BulkGates::Shared(_) => SweepMode::Shared,
            BulkGates::Independent { .. } => SweepMode::Independent,
        }
    }

    pub fn right_sweep(&self) -> &[Gate] {
        match &self.bulk {
            BulkGates::Shared(g) => g,
            BulkGates::Independent { right, .. } => right,
        }
    }

    pub fn left_sweep(&self) -> &[Gate] {
        match &self.bulk {
            BulkGates::Shared(g) => g,
            BulkGates::Independent { left, .. } => left,
        }
    }

    /// `(first site, gate)` in time order for one period.
    pub fn schedule(&self) -> Vec<(usize, &Gate)> {
        let mut s = vec![(0, &self.boundary)];
        s.extend(self.right_sweep().iter().enumerate().map(|(i, g)| (i + 1, g)));
        s.extend(self.left_sweep().iter().enumerate().rev().map(|(i, g)| (i + 1, g)));
        s
    }
}

#[derive(Debug, Clone)]
pub struct FloquetOperator {
    pub dim: usize,
    pub matrix: Array2<C64>,
}

impl FloquetOperator {
    pub fn unitarity_residual(&self) -> f64 {
        tensor::unitarity_residual(&self.matrix)
    }
}

pub fn build_floquet(spec: &CircuitSpec) -> Result<FloquetOperator, CircuitError> {
    build_floquet_with_limit(spec, DEFAULT_MAX_DIM)
}

pub fn build_floquet_with_limit(spec: &CircuitSpec, max_dim: usize) -> Result<FloquetOperator, CircuitError> {
    let dim = spec.dim();
    if dim > max_dim {
        return Err(CircuitError::Capacity { what: "Floquet dimension", value: dim as f64, limit: max_dim as f64 });
    }
    let n = spec.l + 1;
    let mut m = Array2::<C64>::eye(dim);
    let buf = m.as_slice_mut().expect("standard layout");
    // rows are the first n qudits of the 2n-qudit flattened matrix
    for (q, g) in spec.schedule() {
        apply_two(buf, spec.d, 2 * n, q, q + 1, g.matrix().view());
    }
    Ok(FloquetOperator { dim, matrix: m })
}

/// Operator on the full chain stored as a `2(L+1)`-qudit tensor.
#[derive(Debug, Clone)]
pub struct HeisenbergOperator {
    d: usize,
    n: usize,
    data: Vec<C64>,
}

impl HeisenbergOperator {
    /// `a ⊗ 1` with `a` on site 0.
    pub fn local(a: &Array2<C64>, d: usize, n: usize) -> Self {
        let rest = d.pow(n as u32 - 1);
        let dim = d * rest;
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..d {
            for j in 0..d {
                let v = a[[i, j]];
                if v.norm() == 0.0 {
                    continue;
                }
                for r in 0..rest {
                    data[(i * rest + r) * dim + j * rest + r] = v;
                }
            }
        }
        Self { d, n, data }
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    /// `X ↦ G X G†` for a gate on sites `(q, q+1)`.
    pub fn conjugate(&mut self, q: usize, g: &Gate) {
        apply_two(&mut self.data, self.d, 2 * self.n, q, q + 1, g.matrix().view());
        let gc = tensor::conj(g.matrix());
        apply_two(&mut self.data, self.d, 2 * self.n, self.n + q, self.n + q + 1, gc.view());
    }

    pub fn step(&mut self, spec: &CircuitSpec) {
        for (q, g) in spec.schedule() {
            self.conjugate(q, g);
        }
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        let dim = self.dim();
        ArrayView2::from_shape((dim, dim), &self.data).expect("square")
    }

    pub fn trace(&self) -> C64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `X·(b ⊗ 1)`.
    pub fn times_local(&self, b: &Array2<C64>) -> Array2<C64> {
        let dim = self.dim();
        let rest = dim / self.d;
        let mut out = Array2::<C64>::zeros((dim, dim));
        for row in 0..dim {
            let src = &self.data[row * dim..(row + 1) * dim];
            for jo in 0..self.d {
                for r in 0..rest {
                    let mut acc = C64::new(0.0, 0.0);
                    for ji in 0..self.d {
                        acc += src[ji * rest + r] * b[[ji, jo]];
                    }
                    out[[row, jo * rest + r]] = acc;
                }
            }
        }
        out
    }
}

/// `tr(M^k)/D` with a pairwise trace for the last product.
fn normalized_power_trace(m: &Array2<C64>, k: usize) -> C64 {
    let dim = m.nrows();
    let trace_product = |x: &Array2<C64>, y: &Array2<C64>| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                acc += x[[i, j]] * y[[j, i]];
            }
        }
        acc
    };
    let tr = match k {
        0 => C64::new(dim as f64, 0.0),
        1 => m.diag().sum(),
        _ => {
            let half = k / 2;
            let mut p = m.clone();
            for _ in 1..half {
                p = p.dot(m);
            }
            if k.is_multiple_of(2) {
                trace_product(&p, &p)
            } else {
                trace_product(&p, &p.dot(m))
            }
        }
    };
    tr / dim as f64
}

fn check_observable(o: &Array2<C64>, d: usize) -> Result<(), CircuitError> {
    if o.dim() != (d, d) {
        return Err(CircuitError::Observable { d, rows: o.nrows(), cols: o.ncols() });
    }
    Ok(())
}

/// Estimated flops of Heisenberg evolution plus `C_k` evaluation.
pub fn otoc_cost(spec: &CircuitSpec, ks: &[usize], t_max: usize) -> f64 {
    let dim = spec.dim() as f64;
    let d2 = (spec.d * spec.d) as f64;
    let per_step = spec.schedule().len() as f64 * 2.0 * dim * dim * d2 * 8.0;
    let per_eval: f64 = ks.iter().map(|&k| if k <= 2 { dim * dim * 8.0 } else { (k / 2) as f64 * dim.powi(3) * 8.0 }).sum();
    (t_max as f64 + 1.0) * (per_step + per_eval)
}

/// `C_k(t) = tr((A(t)B)^k)/D` for each `k` in `ks`, `t = 0..=t_max`, with
/// `A(t+1) = 𝒰 A(t) 𝒰†`. Returned as `[k index][t]`.
pub fn otoc_series(
    spec: &CircuitSpec,
    a: &Array2<C64>,
    b: &Array2<C64>,
    ks: &[usize],
    t_max: usize,
    flop_budget: f64,
) -> Result<Vec<Vec<C64>>, CircuitError> {
    check_observable(a, spec.d)?;
    check_observable(b, spec.d)?;
    let cost = otoc_cost(spec, ks, t_max);
    if cost > flop_budget {
        return Err(CircuitError::Capacity { what: "Heisenberg evolution flops", value: cost, limit: flop_budget });
    }
    let mut op = HeisenbergOperator::local(a, spec.d, spec.l + 1);
    let mut out = vec![Vec::with_capacity(t_max + 1); ks.len()];
    for t in 0..=t_max {
        if t > 0 {
            op.step(spec);
        }
        let ab = op.times_local(b);
        for (series, &k) in out.iter_mut().zip(ks) {
            series.push(normalized_power_trace(&ab, k));
        }
    }
    Ok(out)
}

pub fn k_otoc_direct(spec: &CircuitSpec, a: &Array2<C64>, b: &Array2<C64>, k: usize, t_max: usize) -> Result<Vec<C64>, CircuitError> {
    Ok(otoc_series(spec, a, b, &[k], t_max, DEFAULT_FLOP_BUDGET)?.remove(0))
}
