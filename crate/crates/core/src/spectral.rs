//! Frequency kernels of exponentially decaying series and discrete-time
//! Fourier transforms.
//!
//! `J¹_γ(ω) = Σ_t e^{−γ|t|+iωt}` and `J²_γ(ω) = Σ_t |t| e^{−γ|t|+iωt}`.

use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{channel_from_gate, channel_spectrum, BoundaryConstants, ChannelError};
use crate::gates::Gate;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("decay rate must be positive, got {0}")]
    Domain(f64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

fn check(gamma: f64) -> Result<(), SpectralError> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(SpectralError::Domain(gamma))
    }
}

/// `sinh γ / (cosh γ − cos ω)`.
pub fn j1(gamma: f64, omega: f64) -> Result<f64, SpectralError> {
    check(gamma)?;
    Ok(gamma.sinh() / (gamma.cosh() - omega.cos()))
}

/// `(cos ω cosh γ − 1) / (cos ω − cosh γ)²`.
pub fn j2(gamma: f64, omega: f64) -> Result<f64, SpectralError> {
    check(gamma)?;
    let (c, ch) = (omega.cos(), gamma.cosh());
    Ok((c * ch - 1.0) / (c - ch).powi(2))
}

/// `Σ_{t=−T}^{T} s(|t|) e^{iωt}` for a series given at `t = 0..=T`; the
/// caller asserts the even extension `s(−t) = s(t)`.
pub fn dtft(series: &[C64], omegas: &[f64]) -> Vec<C64> {
    omegas
        .iter()
        .map(|&om| {
            let tail: C64 = series.iter().enumerate().skip(1).map(|(t, s)| s * (2.0 * (om * t as f64).cos())).sum();
            series.first().copied().unwrap_or_default() + tail
        })
        .collect()
}

/// `2γ/(γ² + ω²)`, the small-γ limit of `J¹`.
pub fn lorentzian(gamma: f64, omega: f64) -> f64 {
    2.0 * gamma / (gamma * gamma + omega * omega)
}

#[derive(Debug, Clone, Serialize)]
pub struct FrequencyCumulants {
    pub omegas: Vec<f64>,
    pub k2: Vec<f64>,
    pub k4: Vec<f64>,
    /// `−ln|λ|`
    pub gamma: f64,
    pub constants: BoundaryConstants,
}

/// `k₂(ω) = k₂ J¹_γ(ω)` and
/// `k₄(ω) = k₄ J¹_{2γ}(ω) + J²_{2γ}(ω)[(■|ℳ_{□○}|●)/λ² − (■|●)/d]`.
///
/// A complex `λ` is reduced to `|λ|` here (flagged in the constants); the
/// time-domain closed forms keep the phase.
pub fn analytic_freq_cumulants(g: &Gate, omegas: &[f64]) -> Result<FrequencyCumulants, SpectralError> {
    let spec = channel_spectrum(&channel_from_gate(g))?;
    let constants = BoundaryConstants::new(g, &spec.leading);
    let lam = constants.lambda.norm();
    let gamma = -lam.ln();
    check(gamma)?;
    let d = g.d() as f64;
    let bracket = (constants.m_so_overlap / (lam * lam) - constants.bb_overlap / d).re;
    let k2s = constants.k2_static.re;
    let k4s = constants.k4_static.re;
    let mut k2 = Vec::with_capacity(omegas.len());
    let mut k4 = Vec::with_capacity(omegas.len());
    for &om in omegas {
        k2.push(k2s * j1(gamma, om)?);
        k4.push(k4s * j1(2.0 * gamma, om)? + bracket * j2(2.0 * gamma, om)?);
    }
    Ok(FrequencyCumulants { omegas: omegas.to_vec(), k2, k4, gamma, constants })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::analytic_cumulants;
    use crate::eth::omega_grid;
    use crate::gates::paper_boundary_gate;
    use std::f64::consts::PI;

    #[test]
    fn kernel_special_values() {
        for g in [0.05, 0.1, 0.7, 2.0] {
            assert!((j1(g, 0.0).unwrap() - 1.0 / (g / 2.0).tanh()).abs() < 1e-10 * j1(g, 0.0).unwrap());
            assert!((j2(g, PI).unwrap() + 1.0 / (1.0 + g.cosh())).abs() < 1e-12);
        }
        assert!(matches!(j1(0.0, 1.0), Err(SpectralError::Domain(_))));
        assert!(j2(-0.3, 1.0).is_err());
    }

    #[test]
    fn j1_has_unit_mean() {
        for g in [0.1, 0.5, 1.5] {
            let n = 20000;
            let mean: f64 = omega_grid(n).iter().map(|&w| j1(g, w).unwrap()).sum::<f64>() / n as f64;
            assert!((mean - 1.0).abs() < 1e-9, "{mean}");
        }
    }

    #[test]
    fn kernels_are_even_and_periodic() {
        for &w in &[0.1, 0.9, 2.5] {
            for g in [0.2, 1.0] {
                for f in [j1, j2] {
                    let v = f(g, w).unwrap();
                    assert!((f(g, -w).unwrap() - v).abs() < 1e-12 * v.abs().max(1.0));
                    assert!((f(g, w + 2.0 * PI).unwrap() - v).abs() < 1e-10 * v.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn j2_is_minus_gamma_derivative_of_j1() {
        let h = 1e-4;
        for g in [0.1, 0.4, 1.0] {
            for w in omega_grid(64) {
                let f = |x: f64| j1(x, w).unwrap();
                // five-point central stencil
                let fd = -(f(g - 2.0 * h) - 8.0 * f(g - h) + 8.0 * f(g + h) - f(g + 2.0 * h)) / (12.0 * h);
                let exact = j2(g, w).unwrap();
                assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "g={g} w={w}");
            }
        }
    }

    #[test]
    fn truncated_dtft_matches_kernels() {
        let gamma = 0.1f64;
        let lam = (-gamma).exp();
        let grid = omega_grid(512);
        let s1: Vec<C64> = (0..=200).map(|t| C64::new(lam.powi(t), 0.0)).collect();
        let s2: Vec<C64> = (0..=200).map(|t| C64::new(t as f64 * lam.powi(t), 0.0)).collect();
        // truncation bound 2Σ_{t>T} t λ^t for the linear series
        let tail: f64 = (201..5000).map(|t| 2.0 * t as f64 * lam.powi(t)).sum();
        for ((w, a), b) in grid.iter().zip(dtft(&s1, &grid)).zip(dtft(&s2, &grid)) {
            assert!((a.re - j1(gamma, *w).unwrap()).abs() < 1e-6);
            assert!((b.re - j2(gamma, *w).unwrap()).abs() < tail * 1.01);
        }
    }

    #[test]
    fn analytic_k4_is_the_transform_of_the_time_series() {
        let (g, _) = paper_boundary_gate();
        let grid = omega_grid(128);
        let freq = analytic_freq_cumulants(&g, &grid).unwrap();
        let time = analytic_cumulants(&g, 600).unwrap();
        let k2t: Vec<C64> = time.series.iter().map(|p| p.k2).collect();
        let k4t: Vec<C64> = time.series.iter().map(|p| p.k4).collect();
        for (i, (a, b)) in dtft(&k2t, &grid).iter().zip(dtft(&k4t, &grid)).enumerate() {
            assert!((a.re - freq.k2[i]).abs() < 1e-8);
            assert!((b.re - freq.k4[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn paper_gate_frequency_shapes() {
        let (g, _) = paper_boundary_gate();
        let grid = omega_grid(256);
        let f = analytic_freq_cumulants(&g, &grid).unwrap();
        assert!(f.k2.iter().all(|&x| x > 0.0));
        for (i, &w) in grid.iter().enumerate() {
            let mirror = grid.iter().position(|&v| (v + w).abs() < 1e-9);
            if let Some(j) = mirror {
                assert!((f.k2[i] - f.k2[j]).abs() < 1e-10);
            }
        }
        let centre = analytic_freq_cumulants(&g, &[0.0]).unwrap();
        assert!(centre.k4[0] < 0.0);
    }

    #[test]
    fn small_gamma_is_lorentzian() {
        let gamma = 0.05;
        for i in 0..=60 {
            let w = -3.0 * gamma + i as f64 * 0.1 * gamma;
            let rel = (j1(gamma, w).unwrap() / lorentzian(gamma, w) - 1.0).abs();
            assert!(rel < 0.05, "w={w} rel={rel}");
        }
    }
}
