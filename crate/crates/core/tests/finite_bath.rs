//! Direct simulation of a finite bath against the space-time network built
//! from the same gates: the right end closes with Bell pairs and each bath
//! bond contributes one transfer matrix.

use scrambler::channel::{channel_from_gate, channel_spectrum};
use scrambler::circuit::{otoc_series, CircuitSpec, SweepMode, DEFAULT_FLOP_BUDGET};
use scrambler::gates::paper_boundary_gate;
use scrambler::spacetime::{bond_gates, boundary_contract_dense, cup_state, transfer_apply};
use std::f64::consts::PI;

fn finite_network(spec: &CircuitSpec, a: &ndarray::Array2<scrambler::C64>, b: &ndarray::Array2<scrambler::C64>, t: usize, k: usize) -> scrambler::C64 {
    let mut s = cup_state(t, spec.d, k).unwrap();
    for j in (0..spec.l - 1).rev() {
        s = transfer_apply(&bond_gates(&spec.right_sweep()[j], &spec.left_sweep()[j], t), &s).unwrap();
    }
    boundary_contract_dense(&spec.boundary, a, b, &s).unwrap()
}

#[test]
fn finite_bath_network_equals_direct_simulation() {
    let (g, _) = paper_boundary_gate();
    let sp = channel_spectrum(&channel_from_gate(&g)).unwrap();
    let (a, b) = (&sp.leading.a, &sp.leading.b);
    for (l, tau, mode) in [(2usize, PI / 4.0, SweepMode::Shared), (3, 0.6, SweepMode::Independent), (5, PI / 6.0, SweepMode::Shared)] {
        let spec = CircuitSpec::random_bath(l, g.clone(), tau, mode, 3 + l as u64).unwrap();
        let direct = otoc_series(&spec, a, b, &[2, 3], 3, DEFAULT_FLOP_BUDGET).unwrap();
        for t in 2..=3 {
            let c = finite_network(&spec, a, b, t, 2);
            assert!((c - direct[0][t]).norm() < 1e-10, "L={l} t={t}: {c} vs {}", direct[0][t]);
        }
        let c3 = finite_network(&spec, a, b, 2, 3);
        assert!((c3 - direct[1][2]).norm() < 1e-10, "k=3 L={l}: {c3} vs {}", direct[1][2]);
    }
}
