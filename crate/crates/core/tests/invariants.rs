mod common;

use common::{fn_rhs, rel, rk45};
use fndam::array::{build_array, MismatchSpec, PulseTarget};
use fndam::calibration::{aged_cell, calibrated_params, evaluate_regime, C_IN, REGIMES, V0};
use fndam::cell::{decay_factor_ln, synchronize, Side};
use fndam::energy::{write_energy, EnergyLedger};
use fndam::node::{apply_pulse, evolve, tunneling_current, voltage_at, NodeState, Polarity, Pulse};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn free_node_decays_and_stays_positive(v in 5.0f64..9.0, t1 in 0.0f64..1e6, dt in 1e-3f64..1e6) {
        let p = calibrated_params();
        let a = evolve(NodeState::new(&p, v).unwrap(), &p, t1);
        let b = evolve(a, &p, dt);
        prop_assert!(b.v_fg < a.v_fg || (a.v_fg - b.v_fg).abs() <= 1e-15 * a.v_fg);
        prop_assert!(b.v_fg > 0.0);
    }

    #[test]
    fn evolve_is_a_semigroup(v in 5.0f64..9.0, a in 0.0f64..1e5, b in 0.0f64..1e5) {
        let p = calibrated_params();
        let s = NodeState::new(&p, v).unwrap();
        let two = evolve(evolve(s, &p, a), &p, b).v_fg;
        let one = evolve(s, &p, a + b).v_fg;
        prop_assert!(rel(two, one) <= 1e-12, "{} vs {}", two, one);
    }

    #[test]
    fn zero_amplitude_pulse_is_evolution(v in 5.0f64..9.0, d in 1e-4f64..10.0) {
        let p = calibrated_params();
        let s = NodeState::new(&p, v).unwrap();
        let pulsed = apply_pulse(s, &p, Pulse::new(0.0, d).unwrap(), Polarity::Positive).unwrap();
        prop_assert_eq!(pulsed, evolve(s, &p, d));
    }

    #[test]
    fn closed_form_matches_ode_oracle(v in 6.0f64..8.0, horizon in 1.0f64..1e4) {
        let p = calibrated_params();
        let closed = evolve(NodeState::new(&p, v).unwrap(), &p, horizon).v_fg;
        let numeric = rk45(fn_rhs(p.k1, p.k2), 0.0, v, horizon, 1e-13, 0.0);
        prop_assert!(rel(closed, numeric) <= 1e-8);
    }

    #[test]
    fn derivative_is_minus_current_over_capacitance(v in 6.0f64..8.5, t in 0.0f64..1e4) {
        let p = calibrated_params();
        let k0 = (p.k2 / v).exp();
        let vt = voltage_at(&p, k0, t);
        // d/dt k2/ln(k1 t + k0) = -k2 k1 / ((k1 t + k0) ln^2)
        let x = p.k1 * t + k0;
        let analytic = -p.k2 * p.k1 / (x * x.ln() * x.ln());
        let from_current = -tunneling_current(&p, vt).unwrap() / p.c_total;
        prop_assert!(rel(from_current, analytic) <= 1e-10);
    }

    #[test]
    fn zero_weight_is_a_fixed_point(v in 6.0f64..8.5, dt in 0.0f64..1e5, step in -0.5f64..0.5) {
        let p = calibrated_params();
        let c = synchronize(&p, &p, v).unwrap();
        prop_assert_eq!(c.decay(dt).weight(), 0.0);
        prop_assert_eq!(c.common_mode_step(step).unwrap().weight(), 0.0);
    }

    #[test]
    fn nonzero_weight_resynchronizes(age in 0.0f64..1000.0, amp in 0.05f64..2.0, dt in 1e-3f64..1e4, reset in any::<bool>()) {
        let p = calibrated_params();
        let side = if reset { Side::Reset } else { Side::Set };
        let c = aged_cell(&p, V0, age).unwrap().pulse(side, Pulse::new(amp, 0.01).unwrap()).unwrap();
        let w = c.weight().abs();
        prop_assume!(w > 0.0);
        prop_assert!(c.decay(dt).weight().abs() < w);
    }

    #[test]
    fn set_and_reset_are_mirror_images(age in 0.0f64..1000.0, amp in 0.05f64..3.0, d in 1e-4f64..0.5) {
        let p = calibrated_params();
        let c = aged_cell(&p, V0, age).unwrap();
        let pulse = Pulse::new(amp, d).unwrap();
        let s = c.set_pulse(pulse).unwrap().weight();
        let r = c.reset_pulse(pulse).unwrap().weight();
        prop_assert!(s > 0.0);
        prop_assert!(rel(-r, s) <= 1e-9, "{} vs {}", s, r);
    }

    #[test]
    fn decay_schedule_is_positive_decreasing_and_order_one_over_n(v in 6.5f64..8.0, dt in 1e-3f64..2.0, n in 0u64..10_000_000) {
        let p = calibrated_params();
        let ln_k0 = p.k2 / v;
        let a = decay_factor_ln(&p, ln_k0, n, dt);
        let b = decay_factor_ln(&p, ln_k0, n + 1, dt);
        prop_assert!(a > 0.0 && b < a);
        let ln_x = (ln_k0.exp() + p.k1 * n as f64 * dt).ln();
        prop_assert!(n as f64 * a <= 1.0 + 2.0 / ln_x);
    }

    #[test]
    fn ledger_totals_agree_exactly(entries in prop::collection::vec((0usize..5, 0.0f64..3.0, 0u64..50), 1..200)) {
        let mut ledger = EnergyLedger::new(1e-12).unwrap();
        let mut expected = 0.0;
        for (i, (cell, amp, n)) in entries.iter().enumerate() {
            ledger.record(*cell, i as f64, *amp, 5e-4, *n);
            expected += write_energy(1e-12, *amp) * *n as f64;
        }
        prop_assert_eq!(ledger.total(), ledger.total_over_cells());
        let by_cell: f64 = ledger.cell_ids().map(|c| ledger.cell_total(c)).sum();
        prop_assert!(rel(by_cell, ledger.total()) <= 1e-12);
        prop_assert!(rel(expected, ledger.total()) <= 1e-12);
    }

    #[test]
    fn array_is_determined_by_seed_and_ops(seed in any::<u64>(), idx in 0usize..6, amp in 0.1f64..2.0, n in 1u64..20) {
        let p = calibrated_params();
        let run = || {
            let a = build_array(6, &p, V0, MismatchSpec { seed, ..Default::default() }).unwrap();
            let t = PulseTarget { index: idx, side: Side::Set, pulse: Pulse::new(amp, 5e-4).unwrap(), n_pulses: n, frequency: 1000.0 };
            a.batch_pulse(&[t], 0.05).unwrap().advance(3.0)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn disjoint_pulses_commute_and_clocks_agree(i in 0usize..4, j in 4usize..8, ai in 0.1f64..2.0, aj in 0.1f64..2.0) {
        let p = calibrated_params();
        let a = build_array(8, &p, V0, MismatchSpec { seed: 3, ..Default::default() }).unwrap();
        let ti = PulseTarget { index: i, side: Side::Set, pulse: Pulse::new(ai, 1e-3).unwrap(), n_pulses: 3, frequency: 500.0 };
        let tj = PulseTarget { index: j, side: Side::Reset, pulse: Pulse::new(aj, 1e-3).unwrap(), n_pulses: 2, frequency: 500.0 };
        let ij = a.batch_pulse(&[ti, tj], 0.01).unwrap();
        let ji = a.batch_pulse(&[tj, ti], 0.01).unwrap();
        prop_assert_eq!(&ij, &ji);
        // each cell sees only its own pulses
        let only_i = a.batch_pulse(&[ti], 0.01).unwrap();
        let only_j = a.batch_pulse(&[tj], 0.01).unwrap();
        prop_assert_eq!(&ij.cells[i], &only_i.cells[i]);
        prop_assert_eq!(&ij.cells[j], &only_j.cells[j]);
        for arr in [&ij, &only_i, &only_j] {
            for c in &arr.cells {
                prop_assert!((c.clock - arr.clock).abs() <= 1e-12);
            }
        }
        let both = ij;
        prop_assert!((both.clock - a.clock - 0.01).abs() <= 1e-12);
    }

    #[test]
    fn unpulsed_weights_decay_toward_zero(seed in any::<u64>(), dt in 0.1f64..100.0) {
        let p = calibrated_params();
        let a = build_array(4, &p, V0, MismatchSpec::none(seed)).unwrap();
        let targets: Vec<PulseTarget> = (0..4)
            .map(|k| PulseTarget { index: k, side: if k % 2 == 0 { Side::Set } else { Side::Reset }, pulse: Pulse::new(1.0, 5e-4).unwrap(), n_pulses: 5, frequency: 1000.0 })
            .collect();
        let mut a = a.batch_pulse(&targets, 0.01).unwrap();
        let mut prev: Vec<f64> = a.weights().iter().map(|w| w.abs()).collect();
        for _ in 0..5 {
            a = a.advance(dt);
            let now: Vec<f64> = a.weights().iter().map(|w| w.abs()).collect();
            for (n, p) in now.iter().zip(&prev) {
                prop_assert!(n < p);
            }
            prev = now;
        }
    }
}

#[test]
fn regimes_trade_energy_for_retention() {
    let p = calibrated_params();
    let outs: Vec<_> = REGIMES.iter().map(|r| evaluate_regime(&p, V0, C_IN, r).unwrap()).collect();
    for w in outs.windows(2) {
        assert!(w[1].energy > w[0].energy);
        assert!(w[1].retention > w[0].retention);
    }
}

#[test]
fn ode_oracle_integrates_a_known_solution() {
    let y = rk45(|_, y| -y, 0.0, 1.0, 5.0, 1e-12, 0.0);
    assert!(rel(y, (-5.0f64).exp()) < 1e-10);
}
