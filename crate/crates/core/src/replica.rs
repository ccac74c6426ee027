//! Single-leg replica vectors: permutation states and the observable-dressed
//! end caps used at the subsystem boundary.
//!
//! Leg digits follow the folding convention of [`crate::gates`]:
//! `(i₁, i₁′, …, i_k, i_k′)`. The permutation state is
//! `(i, i′ | σ) = ∏ⱼ δ(iⱼ′, i_{σ(j)})`, so ○ pairs every ket with its own bra.
//! All pairings of replica vectors are bilinear (no complex conjugation).

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::gates::{apply_folded, Gate};
use crate::ncperm::Permutation;

/// Digits of leg index `x` for `k` replicas: `(ket, bra)` per replica.
#[inline]
pub(crate) fn leg_digits(x: usize, d: usize, k: usize) -> Vec<(usize, usize)> {
    let mut digits = vec![0usize; 2 * k];
    let mut rest = x;
    for p in (0..2 * k).rev() {
        digits[p] = rest % d;
        rest /= d;
    }
    (0..k).map(|r| (digits[2 * r], digits[2 * r + 1])).collect()
}

pub fn leg_dim(d: usize, k: usize) -> usize {
    d.pow(2 * k as u32)
}

/// `|σ)` on one leg.
pub fn permutation_vector(sigma: &Permutation, d: usize) -> Vec<C64> {
    let k = sigma.k();
    (0..leg_dim(d, k))
        .map(|x| {
            let dg = leg_digits(x, d, k);
            let hit = (0..k).all(|j| dg[j].1 == dg[sigma.apply(j)].0);
            C64::new(if hit { 1.0 } else { 0.0 }, 0.0)
        })
        .collect()
}

/// `(a ⊗ 1)^{⊗k} |○)`: entries `∏_r a[i_r, i_r′]`.
pub fn dressed_identity(a: &Array2<C64>, k: usize) -> Vec<C64> {
    let d = a.nrows();
    (0..leg_dim(d, k))
        .map(|x| leg_digits(x, d, k).iter().map(|&(i, ip)| a[[i, ip]]).product())
        .collect()
}

/// `(□| (b ⊗ 1)^{⊗k}` as a bilinear covector: entries `∏_r b[i′_{r−1}, i_r]`.
pub fn dressed_cycle(b: &Array2<C64>, k: usize) -> Vec<C64> {
    let d = b.nrows();
    (0..leg_dim(d, k))
        .map(|x| {
            let dg = leg_digits(x, d, k);
            (0..k).map(|r| b[[dg[(r + k - 1) % k].1, dg[r].0]]).product()
        })
        .collect()
}

/// Boundary replica block
/// `X ↦ (1/d²) (σ_out|₁ (g⊗g*)^{⊗k} (X ⊗ |σ_in)₁)` on the subsystem leg:
/// site 1 enters in `σ_in` and its output is closed with `σ_out`.
pub fn boundary_block(g: &Gate, out: &Permutation, inp: &Permutation) -> Array2<C64> {
    let d = g.d();
    let k = out.k();
    let n = leg_dim(d, k);
    let vin = permutation_vector(inp, d);
    let vout = permutation_vector(out, d);
    let scale = 1.0 / (d * d) as f64;
    let mut m = Array2::zeros((n, n));
    let mut state = vec![C64::new(0.0, 0.0); n * n];
    for col in 0..n {
        state.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        state[col * n..(col + 1) * n].copy_from_slice(&vin);
        apply_folded(&mut state, d, k, 2, 0, 1, g.matrix());
        for row in 0..n {
            let acc: C64 = state[row * n..(row + 1) * n].iter().zip(&vout).map(|(x, y)| x * y).sum();
            m[[row, col]] = acc * scale;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncperm::enumerate_nc;
    use crate::tensor::vdot_bilinear;

    #[test]
    fn permutation_overlaps_count_cycles() {
        for k in 1..=3 {
            let perms = enumerate_nc(k).unwrap();
            for d in 2..=3 {
                for s in &perms {
                    for v in &perms {
                        let ov = vdot_bilinear(&permutation_vector(s, d), &permutation_vector(v, d));
                        let expect = (d as f64).powi(s.relative_cycle_count(v).unwrap() as i32);
                        assert!((ov.re - expect).abs() < 1e-12 && ov.im == 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn dressed_caps_reduce_to_traces() {
        // (■|●) = tr((ba)^k) for unit observables dressed on both ends
        let a = Array2::from_shape_fn((2, 2), |(i, j)| C64::new((i + 2 * j) as f64 - 1.0, (i as f64) - (j as f64) * 0.5));
        let b = Array2::from_shape_fn((2, 2), |(i, j)| C64::new((3 * i + j) as f64 * 0.3, 0.2 * (i + j) as f64));
        let ba = b.dot(&a);
        for k in 1..=3 {
            let mut p = Array2::<C64>::eye(2);
            for _ in 0..k {
                p = p.dot(&ba);
            }
            let tr = p[[0, 0]] + p[[1, 1]];
            let ov = vdot_bilinear(&dressed_cycle(&b, k), &dressed_identity(&a, k));
            assert!((ov - tr).norm() < 1e-12, "k={k} {ov} {tr}");
        }
    }
}
