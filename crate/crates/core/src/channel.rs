//! The boundary channel `ℳ(a) = (1/d) tr₂[U(a⊗1)U†]`, its two-replica
//! blocks, the semigroup generator and the closed-form OTOC predictions.
//!
//! Operators are vectorized row-major: `vec(a)[i·d + j] = a[i, j]`.
//! The two-replica space uses the leg ordering of [`crate::gates`] with
//! `k = 2`, so `ℳ_{○○}` is literally `ℳ ⊗ ℳ` there.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, UPLO};
use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::gates::Gate;
use crate::ncperm::Permutation;
use crate::replica::{boundary_block, dressed_cycle, dressed_identity, permutation_vector};
use crate::tensor::{self, vdot_bilinear};

/// Minimal separation between the leading nontrivial eigenvalue and the rest.
pub const DEGENERACY_GAP: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("leading nontrivial mode is degenerate (gap {gap:e})")]
    Degenerate { gap: f64, eigenvalues: Vec<C64> },
    #[error("eigensolver failed: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

#[derive(Debug, Clone)]
pub struct Channel {
    d: usize,
    superoperator: Array2<C64>,
}

/// Builds ℳ column by column from `U (E_ij ⊗ 1) U†`.
pub fn channel_from_gate(g: &Gate) -> Channel {
    let d = g.d();
    let u = g.matrix();
    let ud = tensor::dagger(u);
    let mut s = Array2::zeros((d * d, d * d));
    for i in 0..d {
        for j in 0..d {
            let mut e = Array2::<C64>::zeros((d, d));
            e[[i, j]] = C64::new(1.0, 0.0);
            let big = u.dot(&tensor::kron(&e, &Array2::eye(d))).dot(&ud);
            for p in 0..d {
                for q in 0..d {
                    let tr: C64 = (0..d).map(|r| big[[p * d + r, q * d + r]]).sum();
                    s[[p * d + q, i * d + j]] = tr / d as f64;
                }
            }
        }
    }
    Channel { d, superoperator: s }
}

/// Orthonormal real basis of traceless `d×d` operators (generalized
/// Gell-Mann without the √2 splitting of off-diagonals: plain matrix units).
fn traceless_basis(d: usize) -> Array2<C64> {
    let mut cols: Vec<Array1<C64>> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let mut v = Array1::zeros(d * d);
                v[i * d + j] = C64::new(1.0, 0.0);
                cols.push(v);
            }
        }
    }
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut v = Array1::zeros(d * d);
        for m in 0..l {
            v[m * d + m] = C64::new(1.0 / norm, 0.0);
        }
        v[l * d + l] = C64::new(-(l as f64) / norm, 0.0);
        cols.push(v);
    }
    let mut q = Array2::zeros((d * d, cols.len()));
    for (c, v) in cols.iter().enumerate() {
        q.column_mut(c).assign(v);
    }
    q
}

fn sort_by_modulus(v: &mut [C64]) {
    v.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)).then(b.im.total_cmp(&a.im)));
}

impl Channel {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn superoperator(&self) -> &Array2<C64> {
        &self.superoperator
    }

    pub fn apply(&self, a: &Array2<C64>) -> Array2<C64> {
        let d = self.d;
        let v = Array1::from_iter(a.iter().copied());
        self.superoperator.dot(&v).into_shape_with_order((d, d)).expect("d² entries")
    }

    /// Restriction to traceless operators; exact because ℳ is unital and
    /// trace preserving.
    fn traceless_block(&self) -> (Array2<C64>, Array2<C64>) {
        let q = traceless_basis(self.d);
        let qt = q.t().to_owned();
        (qt.dot(&self.superoperator).dot(&q), q)
    }

    /// All `d²` eigenvalues sorted by decreasing modulus.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let (block, _) = self.traceless_block();
        let mut ev = vec![C64::new(1.0, 0.0)];
        if block.nrows() > 0 {
            ev.extend(block.eig().expect("small dense eigenproblem").0.iter().copied());
        }
        sort_by_modulus(&mut ev);
        ev
    }

    /// Eigenvalues on the traceless sector, sorted by decreasing modulus.
    pub fn nontrivial_eigenvalues(&self) -> Vec<C64> {
        let (block, _) = self.traceless_block();
        let mut ev: Vec<C64> = block.eig().expect("small dense eigenproblem").0.to_vec();
        sort_by_modulus(&mut ev);
        ev
    }

    pub fn leading_nontrivial_eigenvalue(&self) -> C64 {
        self.nontrivial_eigenvalues()[0]
    }

    /// Minimal eigenvalue of the (Hermitian) Choi matrix.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        let d = self.d;
        // Choi[(p,i),(q,j)] = ℳ(E_ij)[p,q]
        let choi = Array2::from_shape_fn((d * d, d * d), |(r, c)| {
            let (p, i) = (r / d, r % d);
            let (q, j) = (c / d, c % d);
            self.superoperator[[p * d + q, i * d + j]]
        });
        let herm = (&choi + &tensor::dagger(&choi)).mapv(|z| z * 0.5);
        let (w, _) = herm.eigh(UPLO::Lower).expect("Hermitian eigenproblem");
        w.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Leading nontrivial eigenoperators: `ℳ(a) = λa`, `tr(b ℳ(x)) = λ tr(bx)`.
#[derive(Debug, Clone, Serialize)]
pub struct EigenOperatorPair {
    pub a: Array2<C64>,
    pub b: Array2<C64>,
    pub lambda: C64,
}

#[derive(Debug, Clone)]
pub struct ChannelSpectrum {
    pub eigenvalues: Vec<C64>,
    pub leading: EigenOperatorPair,
    pub gap: f64,
}

fn first_significant(v: &Array2<C64>) -> C64 {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    *v.iter().find(|z| z.norm() > 1e-8 * scale).unwrap_or(&C64::new(1.0, 0.0))
}

/// Fixes the phase of a right eigenoperator: unit `tr(aa†)/d`, `tr(a²)`
/// real positive when it is nonzero, first significant entry with positive
/// real part.
fn normalize_right(mut a: Array2<C64>) -> Array2<C64> {
    let d = a.nrows() as f64;
    let frob = a.iter().map(|z| z.norm_sqr()).sum::<f64>() / d;
    a.mapv_inplace(|z| z / frob.sqrt());
    let tr2: C64 = a.dot(&a).diag().sum();
    if tr2.norm() > 1e-10 {
        let phase = C64::from_polar(1.0, -tr2.arg() / 2.0);
        a.mapv_inplace(|z| z * phase);
    } else {
        let lead = first_significant(&a);
        let phase = C64::from_polar(1.0, -lead.arg());
        a.mapv_inplace(|z| z * phase);
    }
    let lead = first_significant(&a);
    if lead.re < 0.0 || (lead.re == 0.0 && lead.im < 0.0) {
        a.mapv_inplace(|z| -z);
    }
    a
}

/// Eigenvalues with the leading nontrivial eigenoperator pair.
pub fn channel_spectrum(c: &Channel) -> Result<ChannelSpectrum, ChannelError> {
    let d = c.d;
    let eigenvalues = c.eigenvalues();
    let (block, q) = c.traceless_block();
    let (vals, right) = block.eig()?;
    let n = vals.len();
    let lead = (0..n)
        .max_by(|&i, &j| {
            vals[i].norm().total_cmp(&vals[j].norm()).then(vals[i].re.total_cmp(&vals[j].re)).then(vals[i].im.total_cmp(&vals[j].im))
        })
        .expect("d ≥ 2");
    let lambda = vals[lead];
    let gap = (0..n).filter(|&i| i != lead).map(|i| (vals[i] - lambda).norm()).fold(f64::INFINITY, f64::min);
    if gap < DEGENERACY_GAP {
        return Err(ChannelError::Degenerate { gap, eigenvalues });
    }
    let a_vec = q.dot(&right.column(lead));
    let a = normalize_right(a_vec.into_shape_with_order((d, d)).expect("d² entries"));
    // left eigenvector of the block: eigenvector of its transpose
    let (lvals, left) = block.t().to_owned().eig()?;
    let li = (0..n).min_by(|&i, &j| (lvals[i] - lambda).norm().total_cmp(&(lvals[j] - lambda).norm())).expect("nonempty");
    // bilinear covector on vec-space: ℓ = Q w, then b[j,i] = ℓ[i,j]
    let ell = q.dot(&left.column(li));
    let mut b = Array2::from_shape_fn((d, d), |(j, i)| ell[i * d + j]);
    let tr_ab: C64 = a.dot(&b).diag().sum();
    b.mapv_inplace(|z| z * d as f64 / tr_ab);
    Ok(ChannelSpectrum { eigenvalues, leading: EigenOperatorPair { a, b, lambda }, gap })
}

/// The three two-replica blocks `ℳ_{σν}` (first label: site-1 output,
/// second: site-1 input).
#[derive(Debug, Clone)]
pub struct ReplicaChannels {
    pub m_ss: Array2<C64>,
    pub m_oo: Array2<C64>,
    pub m_so: Array2<C64>,
}

impl ReplicaChannels {
    pub fn new(g: &Gate) -> Self {
        let id = Permutation::identity(2);
        let cy = Permutation::cyclic(2);
        Self { m_ss: boundary_block(g, &cy, &cy), m_oo: boundary_block(g, &id, &id), m_so: boundary_block(g, &cy, &id) }
    }
}

/// `𝒢 = [[ℳ_{□□}, ℳ_{□○} − ℳ_{□□}/d], [0, ℳ_{○○}]]`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub d: usize,
    pub blocks: ReplicaChannels,
    pub matrix: Array2<C64>,
}

pub fn generator(g: &Gate) -> Generator {
    let d = g.d();
    let blocks = ReplicaChannels::new(g);
    let n = blocks.m_ss.nrows();
    let mut m = Array2::zeros((2 * n, 2 * n));
    let upper = &blocks.m_so - &blocks.m_ss.mapv(|z| z / d as f64);
    m.slice_mut(ndarray::s![..n, ..n]).assign(&blocks.m_ss);
    m.slice_mut(ndarray::s![..n, n..]).assign(&upper);
    m.slice_mut(ndarray::s![n.., n..]).assign(&blocks.m_oo);
    Generator { d, blocks, matrix: m }
}

impl Generator {
    pub fn eigenvalues(&self) -> Result<Vec<C64>, ChannelError> {
        let mut ev = self.matrix.eig()?.0.to_vec();
        sort_by_modulus(&mut ev);
        Ok(ev)
    }

    /// `|ψ_a) = (d|●), d²|●))`.
    pub fn psi_a(&self, a: &Array2<C64>) -> Vec<C64> {
        let d = self.d as f64;
        let dot = dressed_identity(a, 2);
        dot.iter().map(|z| z * d).chain(dot.iter().map(|z| z * d * d)).collect()
    }

    /// `(ψ_b| = ((■|/d², 0)`.
    pub fn psi_b(&self, b: &Array2<C64>) -> Vec<C64> {
        let d = self.d as f64;
        let sq = dressed_cycle(b, 2);
        let n = sq.len();
        sq.iter().map(|z| z / (d * d)).chain(std::iter::repeat_n(C64::new(0.0, 0.0), n)).collect()
    }
}

/// `C₂(t) = (ψ_b|𝒢^t|ψ_a)` for `t = 0..=t_max`, for arbitrary observables.
pub fn c2_semigroup(g: &Gate, a: &Array2<C64>, b: &Array2<C64>, t_max: usize) -> Vec<C64> {
    let gen = generator(g);
    let mut v = Array1::from(gen.psi_a(a));
    let cov = gen.psi_b(b);
    let mut out = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            v = gen.matrix.dot(&v);
        }
        out.push(vdot_bilinear(&cov, v.as_slice().expect("contiguous")));
    }
    out
}

/// Scalars entering the closed forms.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryConstants {
    pub lambda: C64,
    /// `tr(ab)/d`
    pub k2_static: C64,
    /// `tr(abab)/d − 2(tr(ab)/d)²`
    pub k4_static: C64,
    /// `(■|ℳ_{□○}|●)`
    pub m_so_overlap: C64,
    /// `(■|●) = tr(abab)`
    pub bb_overlap: C64,
    pub complex_lambda: bool,
}

impl BoundaryConstants {
    pub fn new(g: &Gate, pair: &EigenOperatorPair) -> Self {
        let d = g.d() as f64;
        let (a, b) = (&pair.a, &pair.b);
        let tr_ab: C64 = a.dot(b).diag().sum();
        let ab = a.dot(b);
        let tr_abab: C64 = ab.dot(&ab).diag().sum();
        let blocks = ReplicaChannels::new(g);
        let dot = Array1::from(dressed_identity(a, 2));
        let sq = dressed_cycle(b, 2);
        let m_so_overlap = vdot_bilinear(&sq, blocks.m_so.dot(&dot).as_slice().expect("contiguous"));
        let k2 = tr_ab / d;
        Self {
            lambda: pair.lambda,
            k2_static: k2,
            k4_static: tr_abab / d - k2 * k2 * 2.0,
            m_so_overlap,
            bb_overlap: tr_abab,
            complex_lambda: pair.lambda.im.abs() > 1e-12,
        }
    }

    /// `λ^t` for integer `t ≥ 0`, with `λ^{−2}·0 = 0` handled by callers.
    fn pow(&self, t: i64) -> C64 {
        self.lambda.powi(t as i32)
    }

    /// Eq. (19)-type closed form:
    /// `λ^{2t−2} t (■|ℳ_{□○}|●) − λ^{2t}(t−1)(■|●)/d`.
    pub fn c2_closed(&self, t: usize, d: usize) -> C64 {
        let t = t as i64;
        let lead = if t == 0 { C64::new(0.0, 0.0) } else { self.pow(2 * t - 2) * self.m_so_overlap * t as f64 };
        lead - self.pow(2 * t) * self.bb_overlap * ((t - 1) as f64 / d as f64)
    }

    pub fn k2(&self, t: usize) -> C64 {
        self.k2_static * self.pow(t as i64)
    }

    /// `k₄(t) = λ^{2t} k₄(a,b,a,b) + t λ^{2t−2} [(■|ℳ_{□○}|●) − λ²(■|●)/d]`.
    pub fn k4(&self, t: usize, d: usize) -> C64 {
        let ti = t as i64;
        let bracket = self.m_so_overlap - self.lambda * self.lambda * self.bb_overlap / d as f64;
        let lin = if t == 0 { C64::new(0.0, 0.0) } else { self.pow(2 * ti - 2) * bracket * t as f64 };
        self.pow(2 * ti) * self.k4_static + lin
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CumulantPoint {
    pub t: usize,
    pub c1: C64,
    pub c2: C64,
    pub k2: C64,
    pub k4: C64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyticCumulants {
    pub constants: BoundaryConstants,
    pub series: Vec<CumulantPoint>,
}

/// Closed-form `C₁, C₂, k₂, k₄` for the leading eigenoperators of `g`.
pub fn analytic_cumulants(g: &Gate, t_max: usize) -> Result<AnalyticCumulants, ChannelError> {
    let spec = channel_spectrum(&channel_from_gate(g))?;
    let constants = BoundaryConstants::new(g, &spec.leading);
    let d = g.d();
    let series = (0..=t_max)
        .map(|t| {
            let k2 = constants.k2(t);
            let k4 = constants.k4(t, d);
            CumulantPoint { t, c1: k2, c2: k4 + k2 * k2 * 2.0, k2, k4 }
        })
        .collect();
    Ok(AnalyticCumulants { constants, series })
}

/// Outcome of the Jordan-block reconstruction of the `λ²` sector of 𝒢.
#[derive(Debug, Clone, Serialize)]
pub enum JordanReport {
    Block(Box<JordanBlock>),
    /// No Jordan block: the coupling `(b_□|ℳ_{□○} − ℳ_{□□}/d|a_○)` vanishes
    /// or `λ = 0`.
    Absent { lambda: C64, coupling: C64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct JordanBlock {
    pub lambda: C64,
    pub alpha_sq: C64,
    pub alpha_id: C64,
    pub beta_sq: C64,
    pub beta_id: C64,
    /// `‖(𝒢−λ²)R₀‖`, `‖L₀(𝒢−λ²)‖`
    pub eigen_residual: f64,
    /// `‖(𝒢−λ²)R₁ − R₀‖`
    pub right_generalized_residual: f64,
    /// `‖L₁(𝒢−λ²) − L₀‖`
    pub left_generalized_residual: f64,
    /// `max |(L_i|R_j) − (1−δ_ij)|`
    pub biorthonormality_residual: f64,
    /// `max_t max‖𝒢^t P − J^t‖` over `t ≤ t_max` on the projected block
    pub power_residual: f64,
    /// `max_t |(ψ_b|J^t|ψ_a) − C₂ closed form|`
    pub c2_residual: f64,
    #[serde(skip)]
    pub r0: Vec<C64>,
    #[serde(skip)]
    pub r1: Vec<C64>,
    #[serde(skip)]
    pub l0: Vec<C64>,
    #[serde(skip)]
    pub l1: Vec<C64>,
}

fn max_norm(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Least-squares solve via the Moore–Penrose pseudo-inverse.
fn pinv_solve(m: &Array2<C64>, rhs: &Array1<C64>) -> Result<Array1<C64>, ChannelError> {
    use ndarray_linalg::SVD;
    let (u, s, vt) = m.svd(true, true)?;
    let (u, vt) = (u.expect("U"), vt.expect("Vt"));
    let smax = s.iter().copied().fold(0.0, f64::max);
    let utb = tensor::dagger(&u).dot(rhs);
    let scaled = Array1::from_iter(
        utb.iter().zip(s.iter()).map(|(x, &sv)| if sv > 1e-10 * smax { x / sv } else { C64::new(0.0, 0.0) }),
    );
    Ok(tensor::dagger(&vt).dot(&scaled))
}

/// Builds `R₀, R₁, L₀, L₁` for the `λ²` sector and checks them against
/// direct powers of 𝒢 for `t ≤ t_max`.
pub fn jordan_check(g: &Gate, t_max: usize) -> Result<JordanReport, ChannelError> {
    let d = g.d();
    let df = d as f64;
    let spec = channel_spectrum(&channel_from_gate(g))?;
    let EigenOperatorPair { a, b, lambda } = spec.leading;
    let gen = generator(g);
    let n = gen.blocks.m_ss.nrows();
    let l2 = lambda * lambda;
    let id2 = Permutation::identity(2);
    let cy2 = Permutation::cyclic(2);

    let a_id = Array1::from(dressed_identity(&a, 2));
    let b_sq = Array1::from(dressed_cycle(&b, 2));
    // |a_□) = (a⊗1)^{⊗2}|□) and (b_○| = (○|(b⊗1)^{⊗2}
    let a_sq = dressed_on_perm(&a, &cy2);
    let b_id = dressed_covector_on_perm(&b, &id2);

    let x = &gen.blocks.m_so - &gen.blocks.m_ss.mapv(|z| z / df);
    let coupling = b_sq.dot(&x.dot(&a_id));
    if lambda.norm() < 1e-12 || coupling.norm() < 1e-12 {
        return Ok(JordanReport::Absent { lambda, coupling });
    }
    let alpha_id = C64::new(1.0, 0.0);
    let beta_id = C64::new(df * df, 0.0);
    let alpha_sq = alpha_id * coupling / (df * df);
    let beta_sq = beta_id / (df * df * coupling);

    let shift = |m: &Array2<C64>| m - &Array2::<C64>::eye(n).mapv(|z| z * l2);
    let rhs_r = a_sq.mapv(|z| z * alpha_sq) - x.dot(&a_id).mapv(|z| z * alpha_id);
    let mut r1 = pinv_solve(&shift(&gen.blocks.m_ss), &rhs_r)?;
    let fix = b_sq.dot(&r1) / b_sq.dot(&a_sq);
    r1 = &r1 - &a_sq.mapv(|z| z * fix);
    let rhs_l = b_id.mapv(|z| z * beta_id / df.powi(4)) - x.t().dot(&b_sq).mapv(|z| z * beta_sq);
    let mut l1 = pinv_solve(&shift(&gen.blocks.m_oo).t().to_owned(), &rhs_l)?;
    let fix = l1.dot(&a_id) / b_id.dot(&a_id);
    l1 = &l1 - &b_id.mapv(|z| z * fix);

    let zeros = Array1::<C64>::zeros(n);
    let cat = |top: &Array1<C64>, bot: &Array1<C64>| -> Array1<C64> { top.iter().chain(bot.iter()).copied().collect() };
    let r0v = cat(&a_sq.mapv(|z| z * alpha_sq), &zeros);
    let r1v = cat(&r1, &a_id.mapv(|z| z * alpha_id));
    let l0v = cat(&zeros, &b_id.mapv(|z| z * beta_id / df.powi(4)));
    let l1v = cat(&b_sq.mapv(|z| z * beta_sq), &l1);

    let gm = &gen.matrix;
    let gshift = gm - &Array2::<C64>::eye(2 * n).mapv(|z| z * l2);
    let eigen_residual = max_norm(&gshift.dot(&r0v)).max(max_norm(&gshift.t().dot(&l0v)));
    let right_generalized_residual = max_norm(&(gshift.dot(&r1v) - &r0v));
    let left_generalized_residual = max_norm(&(gshift.t().dot(&l1v) - &l0v));
    let pairs = [(l0v.dot(&r0v), 0.0), (l0v.dot(&r1v), 1.0), (l1v.dot(&r0v), 1.0), (l1v.dot(&r1v), 0.0)];
    let biorthonormality_residual = pairs.iter().map(|(v, e)| (v - e).norm()).fold(0.0, f64::max);

    let outer = |u: &Array1<C64>, v: &Array1<C64>| Array2::from_shape_fn((2 * n, 2 * n), |(i, j)| u[i] * v[j]);
    let proj = outer(&r0v, &l1v) + outer(&r1v, &l0v);
    let nil = outer(&r0v, &l0v);
    let psi_a = Array1::from(gen.psi_a(&a));
    let psi_b = Array1::from(gen.psi_b(&b));
    let consts = BoundaryConstants::new(g, &EigenOperatorPair { a: a.clone(), b: b.clone(), lambda });
    let mut power = proj.clone();
    let mut power_residual: f64 = 0.0;
    let mut c2_residual: f64 = 0.0;
    for t in 0..=t_max {
        if t > 0 {
            power = gm.dot(&power);
        }
        let lt = l2.powi(t as i32);
        let jt = if t == 0 { proj.clone() } else { proj.mapv(|z| z * lt) + nil.mapv(|z| z * l2.powi(t as i32 - 1) * t as f64) };
        power_residual = power_residual.max(tensor::max_abs_diff(&power, &jt));
        let c2_j = psi_b.dot(&jt.dot(&psi_a));
        c2_residual = c2_residual.max((c2_j - consts.c2_closed(t, d)).norm());
    }
    Ok(JordanReport::Block(Box::new(JordanBlock {
        lambda,
        alpha_sq,
        alpha_id,
        beta_sq,
        beta_id,
        eigen_residual,
        right_generalized_residual,
        left_generalized_residual,
        biorthonormality_residual,
        power_residual,
        c2_residual,
        r0: r0v.to_vec(),
        r1: r1v.to_vec(),
        l0: l0v.to_vec(),
        l1: l1v.to_vec(),
    })))
}

/// `(a ⊗ 1)^{⊗k}|σ)` on one leg.
pub fn dressed_on_perm(a: &Array2<C64>, sigma: &Permutation) -> Array1<C64> {
    let d = a.nrows();
    let k = sigma.k();
    let mut v = permutation_vector(sigma, d);
    let n = 2 * k;
    for r in 0..k {
        tensor::apply_one(&mut v, d, n, 2 * r, a.view());
    }
    Array1::from(v)
}

/// `(σ|(b ⊗ 1)^{⊗k}` as a bilinear covector.
pub fn dressed_covector_on_perm(b: &Array2<C64>, sigma: &Permutation) -> Array1<C64> {
    let d = b.nrows();
    let k = sigma.k();
    let mut v = permutation_vector(sigma, d);
    let n = 2 * k;
    let bt = b.t().to_owned();
    for r in 0..k {
        tensor::apply_one(&mut v, d, n, 2 * r, bt.view());
    }
    Array1::from(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{paper_boundary_gate, random_cartan_gate, random_du_gate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_and_swap_channels() {
        let id = channel_from_gate(&Gate::identity(2));
        assert!(tensor::max_abs_diff(id.superoperator(), &Array2::eye(4).mapv(c)) < 1e-15);
        assert!(id.eigenvalues().iter().all(|z| (z - 1.0).norm() < 1e-12));
        match channel_spectrum(&id) {
            Err(ChannelError::Degenerate { gap, eigenvalues }) => {
                assert!(gap < 1e-8);
                assert_eq!(eigenvalues.len(), 4);
            }
            other => panic!("expected degeneracy, got {other:?}"),
        }
        let sw = channel_from_gate(&Gate::swap(2));
        let a = Array2::from_shape_vec((2, 2), vec![c(0.3), C64::new(0.1, 0.2), c(-1.0), c(0.7)]).unwrap();
        let out = sw.apply(&a);
        let expect = Array2::eye(2).mapv(|x: f64| c(x) * (a[[0, 0]] + a[[1, 1]]) / 2.0);
        assert!(tensor::max_abs_diff(&out, &expect) < 1e-15);
        assert!(sw.leading_nontrivial_eigenvalue().norm() < 1e-12);
    }

    #[test]
    fn trace_preservation_and_complete_positivity() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..10 {
            let ch = channel_from_gate(&random_cartan_gate(&mut rng, 0.5, (0.0, 1.0)));
            let vid = Array1::from(vec![c(1.0), c(0.0), c(0.0), c(1.0)]);
            // left fixed point (trace) and right fixed point (unital)
            assert!(max_norm(&(ch.superoperator().t().dot(&vid) - &vid)) < 1e-12);
            assert!(max_norm(&(ch.superoperator().dot(&vid) - &vid)) < 1e-12);
            assert!(ch.choi_min_eigenvalue() > -1e-10);
        }
    }

    #[test]
    fn paper_gate_channel_has_one_nontrivial_mode() {
        let (g, _) = paper_boundary_gate();
        let ev = channel_from_gate(&g).eigenvalues();
        assert!((ev[0] - 1.0).norm() < 1e-12);
        assert!((ev[1].norm() - 0.9).abs() < 0.02);
        assert!(ev[2].norm() < 1e-6 && ev[3].norm() < 1e-6, "{ev:?}");
    }

    #[test]
    fn paper_gate_eigenoperators() {
        let (g, lam) = paper_boundary_gate();
        let ch = channel_from_gate(&g);
        let s = channel_spectrum(&ch).unwrap();
        let p = &s.leading;
        assert!(p.lambda.im.abs() < 1e-12 && (p.lambda - lam).norm() < 1e-12);
        assert!(tensor::max_abs_diff(&p.a, &tensor::dagger(&p.a)) < 1e-12);
        assert!(tensor::max_abs_diff(&p.a, &p.b) < 1e-10);
        assert!((p.a[[0, 0]] + p.a[[1, 1]]).norm() < 1e-12);
        let tr_aa: C64 = p.a.dot(&p.a).diag().sum();
        assert!((tr_aa / 2.0 - 1.0).norm() < 1e-12);
        assert!(tensor::max_abs_diff(&ch.apply(&p.a), &p.a.mapv(|z| z * p.lambda)) < 1e-12);
    }

    #[test]
    fn left_eigenoperator_for_non_hermitian_gate() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let g = random_cartan_gate(&mut rng, 0.45, (0.0, 1.0));
        let ch = channel_from_gate(&g);
        let s = channel_spectrum(&ch).unwrap();
        let EigenOperatorPair { a, b, lambda } = s.leading;
        assert!(tensor::max_abs_diff(&ch.apply(&a), &a.mapv(|z| z * lambda)) < 1e-10);
        // tr(b ℳ(x)) = λ tr(b x) for arbitrary x
        let x = Array2::from_shape_vec((2, 2), vec![C64::new(0.2, 0.1), c(1.0), C64::new(0.0, -0.4), c(0.3)]).unwrap();
        let lhs: C64 = b.dot(&ch.apply(&x)).diag().sum();
        let rhs: C64 = b.dot(&x).diag().sum() * lambda;
        assert!((lhs - rhs).norm() < 1e-10);
        let tr_ab: C64 = a.dot(&b).diag().sum();
        assert!((tr_ab - 2.0).norm() < 1e-12);
        assert!((b[[0, 0]] + b[[1, 1]]).norm() < 1e-12);
    }

    #[test]
    fn diagonal_blocks_are_tensor_squares() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let g = random_cartan_gate(&mut rng, 0.6, (0.0, 1.0));
        let ch = channel_from_gate(&g);
        let rc = ReplicaChannels::new(&g);
        let sq = tensor::kron(ch.superoperator(), ch.superoperator());
        assert!(tensor::max_abs_diff(&rc.m_oo, &sq) < 1e-12);
        // □-basis change: relabel (i1 i1' i2 i2') -> (i1 i2' i2 i1') on both sides
        let swap_bras = |x: usize| {
            let (i1, i1p, i2, i2p) = (x >> 3 & 1, x >> 2 & 1, x >> 1 & 1, x & 1);
            i1 << 3 | i2p << 2 | i2 << 1 | i1p
        };
        let conj = Array2::from_shape_fn((16, 16), |(r, col)| rc.m_ss[[swap_bras(r), swap_bras(col)]]);
        assert!(tensor::max_abs_diff(&conj, &sq) < 1e-12);
    }

    #[test]
    fn generator_spectrum_is_pairwise_products() {
        let (g, _) = paper_boundary_gate();
        let gen = generator(&g);
        let lam = channel_from_gate(&g).eigenvalues();
        let mut products: Vec<C64> = lam.iter().flat_map(|x| lam.iter().map(move |y| x * y)).collect();
        sort_by_modulus(&mut products);
        // diagonal blocks: each has spectrum {λ_i λ_j} exactly once
        for block in [&gen.blocks.m_ss, &gen.blocks.m_oo] {
            let mut ev = block.eig().unwrap().0.to_vec();
            sort_by_modulus(&mut ev);
            for (x, y) in ev.iter().zip(&products) {
                assert!((x - y).norm() < 1e-8, "{x} vs {y}");
            }
        }
        let ev = gen.eigenvalues().unwrap();
        let mut doubled: Vec<C64> = products.iter().flat_map(|&p| [p, p]).collect();
        sort_by_modulus(&mut doubled);
        assert_eq!(ev.len(), doubled.len());
        let worst = ev.iter().zip(&doubled).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst {worst:e}");
    }

    #[test]
    fn identity_generator_blocks() {
        let gen = generator(&Gate::identity(2));
        let n = 16;
        let eye = Array2::<C64>::eye(n);
        assert!(tensor::max_abs_diff(&gen.blocks.m_ss, &eye) < 1e-14);
        assert!(tensor::max_abs_diff(&gen.blocks.m_oo, &eye) < 1e-14);
        assert!(gen.matrix.slice(ndarray::s![n.., ..n]).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn eigen_relations_for_dressed_states() {
        let (g, _) = paper_boundary_gate();
        let s = channel_spectrum(&channel_from_gate(&g)).unwrap();
        let gen = generator(&g);
        let l2 = s.leading.lambda.powi(2);
        let sq = Array1::from(dressed_cycle(&s.leading.b, 2));
        let dot = Array1::from(dressed_identity(&s.leading.a, 2));
        assert!(max_norm(&(gen.blocks.m_ss.t().dot(&sq) - sq.mapv(|z| z * l2))) < 1e-10);
        assert!(max_norm(&(gen.blocks.m_oo.dot(&dot) - dot.mapv(|z| z * l2))) < 1e-10);
    }

    #[test]
    fn semigroup_matches_closed_form_for_eigenoperators() {
        let (g, _) = paper_boundary_gate();
        let s = channel_spectrum(&channel_from_gate(&g)).unwrap();
        let series = c2_semigroup(&g, &s.leading.a, &s.leading.b, 50);
        let an = analytic_cumulants(&g, 50).unwrap();
        for (t, (x, p)) in series.iter().zip(&an.series).enumerate() {
            assert!((x - an.constants.c2_closed(t, 2)).norm() < 1e-12, "t={t}");
            assert!((x - p.c2).norm() < 1e-12);
        }
        // regression values for the first two periods
        assert!((series[1].re - 0.63663).abs() < 1e-5);
        assert!((series[2].re - 0.37590).abs() < 1e-5);
    }

    #[test]
    fn analytic_cumulants_static_values() {
        let (g, _) = paper_boundary_gate();
        let an = analytic_cumulants(&g, 10).unwrap();
        assert!((an.series[0].k2 - 1.0).norm() < 1e-12);
        // with tr(a²)/d = 1 at d = 2 every traceless Hermitian pair has k₄ = −1
        assert!((an.series[0].k4 + 1.0).norm() < 1e-12);
        for p in &an.series {
            assert!((p.c2 - (p.k4 + p.k2 * p.k2 * 2.0)).norm() < 1e-12);
            assert!((p.c2 - an.constants.c2_closed(p.t, 2)).norm() < 1e-12);
        }
    }

    #[test]
    fn jordan_reconstruction() {
        let (g, _) = paper_boundary_gate();
        let JordanReport::Block(j) = jordan_check(&g, 30).unwrap() else { panic!("block expected") };
        assert!(j.eigen_residual < 1e-9);
        assert!(j.right_generalized_residual < 1e-9, "{}", j.right_generalized_residual);
        assert!(j.left_generalized_residual < 1e-9, "{}", j.left_generalized_residual);
        assert!(j.biorthonormality_residual < 1e-9);
        assert!((j.alpha_sq * j.beta_sq - 0.25).norm() < 1e-12);
        assert!((j.alpha_id * j.beta_id - 4.0).norm() < 1e-12);
        assert!(j.power_residual < 1e-9, "{}", j.power_residual);
        assert!(j.c2_residual < 1e-12, "{}", j.c2_residual);
    }

    #[test]
    fn jordan_check_rejects_degenerate_channels() {
        // SWAP and DU gates have a maximally degenerate traceless spectrum
        assert!(matches!(jordan_check(&Gate::swap(2), 5), Err(ChannelError::Degenerate { .. })));
        let g = random_du_gate(3, (0.0, 1.0));
        assert!(matches!(jordan_check(&g, 5), Err(ChannelError::Degenerate { .. })));
    }

    #[test]
    fn eigenoperator_otoc_decays_at_twice_the_channel_rate() {
        let (g, _) = paper_boundary_gate();
        let spec = channel_spectrum(&channel_from_gate(&g)).unwrap();
        let s = c2_semigroup(&g, &spec.leading.a, &spec.leading.b, 200);
        let lam = spec.leading.lambda.re;
        // (αt + β)λ^{2t} at late times: s(t)/λ^{2t} has constant increments
        let u = |t: usize| s[t].re / lam.powi(2 * t as i32);
        let (d1, d2) = (u(101) - u(100), u(161) - u(160));
        assert!(d1.abs() > 1e-3 && (d1 - d2).abs() < 1e-2 * d1.abs(), "{d1} vs {d2}");
    }

    #[test]
    fn generator_contains_single_replica_modes() {
        // generic observables also excite modes decaying like λ^t
        let (g, lam) = paper_boundary_gate();
        let ev = generator(&g).eigenvalues().unwrap();
        assert!(ev.iter().any(|z| (z - lam).norm() < 1e-8));
        assert!(ev.iter().any(|z| (z - lam * lam).norm() < 1e-8));
    }
}
