//! Dense kernels on flat tensors of `n` qudits (row-major, qudit 0 most
//! significant). Everything that touches large arrays funnels through here.

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

#[inline]
pub(crate) fn strides(d: usize, n: usize) -> Vec<usize> {
    let mut s = vec![1usize; n];
    for q in (0..n.saturating_sub(1)).rev() {
        s[q] = s[q + 1] * d;
    }
    s
}

/// Applies a `d²×d²` matrix to qudits `(qa, qb)` of `state`, with `qa`
/// the more significant factor of the matrix index.
pub(crate) fn apply_two(state: &mut [C64], d: usize, n: usize, qa: usize, qb: usize, m: ArrayView2<C64>) {
    debug_assert!(qa != qb && qa < n && qb < n);
    debug_assert_eq!(m.dim(), (d * d, d * d));
    let st = strides(d, n);
    let (sa, sb) = (st[qa], st[qb]);
    let (hi, lo) = if sa > sb { (sa, sb) } else { (sb, sa) };
    let total = state.len();
    let dd = d * d;
    let mat: Vec<C64> = m.iter().copied().collect();
    let offs: Vec<usize> = (0..dd).map(|r| (r / d) * sa + (r % d) * sb).collect();
    let mut buf = vec![C64::new(0.0, 0.0); dd];
    let mut outer = 0;
    while outer < total {
        let mut mid = outer;
        while mid < outer + hi {
            for inner in mid..mid + lo {
                for (r, &o) in offs.iter().enumerate() {
                    buf[r] = state[inner + o];
                }
                for (r, &o) in offs.iter().enumerate() {
                    let row = &mat[r * dd..(r + 1) * dd];
                    let mut acc = C64::new(0.0, 0.0);
                    for (x, y) in row.iter().zip(&buf) {
                        acc += x * y;
                    }
                    state[inner + o] = acc;
                }
            }
            mid += lo * d;
        }
        outer += hi * d;
    }
}

/// Applies a `d×d` matrix to qudit `q`.
pub(crate) fn apply_one(state: &mut [C64], d: usize, n: usize, q: usize, m: ArrayView2<C64>) {
    let s = strides(d, n)[q];
    let total = state.len();
    let mut buf = vec![C64::new(0.0, 0.0); d];
    let mut outer = 0;
    while outer < total {
        for inner in outer..outer + s {
            for (r, b) in buf.iter_mut().enumerate() {
                *b = state[inner + r * s];
            }
            for r in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (c, b) in buf.iter().enumerate() {
                    acc += m[[r, c]] * b;
                }
                state[inner + r * s] = acc;
            }
        }
        outer += s * d;
    }
}

pub(crate) fn conj(m: &Array2<C64>) -> Array2<C64> {
    m.mapv(|z| z.conj())
}

pub(crate) fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub(crate) fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `‖M†M − 1‖_max`.
pub(crate) fn unitarity_residual(m: &Array2<C64>) -> f64 {
    let p = dagger(m).dot(m);
    let n = p.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            r = r.max((p[[i, j]] - target).norm());
        }
    }
    r
}

pub(crate) fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// Eigen-decomposition of a Hermitian matrix, eigenvectors in columns.
///
/// For row-major complex input the backend hands back the complex
/// conjugate of the eigenvectors; the orientation is decided by the
/// residual on a few columns so either behaviour is handled.
pub(crate) fn hermitian_eigh(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>), ndarray_linalg::error::LinalgError> {
    let (w, v) = h.eigh(UPLO::Lower)?;
    let probe = |v: &Array2<C64>| -> f64 {
        (0..v.ncols().min(4))
            .map(|c| {
                let col = v.column(c);
                let hv = h.dot(&col);
                hv.iter().zip(col.iter()).map(|(x, y)| (x - y * w[c]).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    if probe(&v) <= 1e-8 * (1.0 + w.iter().fold(0.0f64, |m, x| m.max(x.abs()))) {
        return Ok((w, v));
    }
    let vc = conj(&v);
    Ok((w, vc))
}

pub(crate) fn vdot_bilinear(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
