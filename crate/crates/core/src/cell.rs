//! Differential SET/RESET dynamic analog memory cell.
//!
//! The stored weight is `weight_scale * (W_R - W_S)`, in millivolts with the default scale.
//! A SET pulse speeds up the SET node's discharge and so raises the weight; a RESET pulse
//! does the same to the RESET node and lowers it. Left alone, the two nodes resynchronise
//! and the weight decays toward zero at the rate `(k1/k2)(2W + k2) exp(-k2/W)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::{self, FnParams, NodeState, Polarity, Pulse};
use crate::numeric::{bisect, log_add_exp};
use crate::rng::DeviceRng;

/// Millivolts per volt of node difference.
pub const DEFAULT_WEIGHT_SCALE: f64 = 1000.0;

/// Default ceiling for pre-compensated pulse amplitudes (V).
pub const DEFAULT_AMP_MAX: f64 = 32.0;

/// Which node of the pair a pulse drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Set,
    Reset,
}

impl Side {
    /// Sign of the weight change a pulse on this side produces.
    pub fn weight_sign(self) -> f64 {
        match self {
            Side::Set => 1.0,
            Side::Reset => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamCell {
    pub set_node: NodeState,
    pub reset_node: NodeState,
    pub set_params: FnParams,
    pub reset_params: FnParams,
    pub weight_scale: f64,
    /// Seconds since synchronisation.
    pub clock: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightReading {
    /// `weight_scale * (W_R - W_S)`, millivolts at the default scale.
    pub weight: f64,
    /// Cell clock at the read (s).
    pub timestamp: f64,
}

/// Rate-matched initialisation of a cell.
///
/// The SET node starts at `v0`. With identical parameters the RESET node does too; otherwise
/// its voltage is solved so that both nodes discharge at the same rate (`I_FN / C_T`).
pub fn synchronize(set_params: &FnParams, reset_params: &FnParams, v0: f64) -> Result<DamCell> {
    set_params.validate()?;
    reset_params.validate()?;
    let set_node = NodeState::new(set_params, v0).map_err(|e| Error::Initialization(e.to_string()))?;
    let reset_v = if set_params.k1 == reset_params.k1 && set_params.k2 == reset_params.k2 {
        v0
    } else {
        let target = set_params.ln_discharge_rate(v0);
        let k2 = reset_params.k2;
        // ln rate is strictly increasing on (0, k2) and tends to -inf at 0+
        let f = |v: f64| reset_params.ln_discharge_rate(v) - target;
        let lo = k2 * 1e-6;
        let (a, b) = bisect(f, lo, k2, 0.0, 400).ok_or_else(|| {
            Error::Initialization(format!(
                "rate-matching root not bracketed in (0, {k2}) for v0 = {v0}"
            ))
        })?;
        0.5 * (a + b)
    };
    let reset_node =
        NodeState::new(reset_params, reset_v).map_err(|e| Error::Initialization(e.to_string()))?;
    Ok(DamCell {
        set_node,
        reset_node,
        set_params: *set_params,
        reset_params: *reset_params,
        weight_scale: DEFAULT_WEIGHT_SCALE,
        clock: 0.0,
    })
}

impl DamCell {
    /// Raw node difference `W_R - W_S` in volts.
    pub fn differential(&self) -> f64 {
        self.reset_node.v_fg - self.set_node.v_fg
    }

    pub fn weight(&self) -> f64 {
        self.weight_scale * self.differential()
    }

    pub fn read_weight(&self) -> WeightReading {
        WeightReading {
            weight: self.weight(),
            timestamp: self.clock,
        }
    }

    /// Reading with additive Gaussian node-difference noise of `sigma` volts.
    pub fn read_weight_noisy(&self, sigma: f64, rng: &mut DeviceRng) -> WeightReading {
        let mut r = self.read_weight();
        if sigma > 0.0 {
            r.weight += self.weight_scale * sigma * rng.standard_normal();
        }
        r
    }

    fn params(&self, side: Side) -> &FnParams {
        match side {
            Side::Set => &self.set_params,
            Side::Reset => &self.reset_params,
        }
    }

    fn node(&self, side: Side) -> NodeState {
        match side {
            Side::Set => self.set_node,
            Side::Reset => self.reset_node,
        }
    }

    fn with_nodes(&self, set_node: NodeState, reset_node: NodeState, dt: f64) -> DamCell {
        DamCell {
            set_node,
            reset_node,
            clock: self.clock + dt,
            ..*self
        }
    }

    /// Pulses one side while the other side evolves unpulsed for the same time.
    pub fn pulse(&self, side: Side, pulse: Pulse) -> Result<DamCell> {
        let driven = node::apply_pulse(self.node(side), self.params(side), pulse, Polarity::Positive)?;
        Ok(self.place(side, driven, pulse.duration))
    }

    pub fn set_pulse(&self, pulse: Pulse) -> Result<DamCell> {
        self.pulse(Side::Set, pulse)
    }

    pub fn reset_pulse(&self, pulse: Pulse) -> Result<DamCell> {
        self.pulse(Side::Reset, pulse)
    }

    /// `n_pulses` pulses at `frequency` on one side; the cell clock advances by `n / f`.
    pub fn pulse_train(&self, side: Side, pulse: Pulse, n_pulses: u64, frequency: f64) -> Result<DamCell> {
        let driven = node::pulse_train(
            self.node(side),
            self.params(side),
            pulse,
            n_pulses,
            frequency,
            Polarity::Positive,
        )?;
        let elapsed = n_pulses as f64 / frequency;
        Ok(self.place(side, driven, elapsed))
    }

    fn place(&self, side: Side, driven: NodeState, elapsed: f64) -> DamCell {
        match side {
            Side::Set => {
                let idle = node::evolve(self.reset_node, &self.reset_params, elapsed);
                self.with_nodes(driven, idle, elapsed)
            }
            Side::Reset => {
                let idle = node::evolve(self.set_node, &self.set_params, elapsed);
                self.with_nodes(idle, driven, elapsed)
            }
        }
    }

    /// Free evolution of both nodes: the resynchronisation that decays the weight.
    pub fn decay(&self, dt: f64) -> DamCell {
        let dt = dt.max(0.0);
        self.with_nodes(
            node::evolve(self.set_node, &self.set_params, dt),
            node::evolve(self.reset_node, &self.reset_params, dt),
            dt,
        )
    }

    /// Same instantaneous voltage step on both nodes (a common-mode disturbance).
    pub fn common_mode_step(&self, dv: f64) -> Result<DamCell> {
        let set_node = NodeState::new(&self.set_params, self.set_node.v_fg + dv)?;
        let reset_node = NodeState::new(&self.reset_params, self.reset_node.v_fg + dv)?;
        Ok(self.with_nodes(set_node, reset_node, 0.0))
    }

    /// Step on one node only, the single-ended counterpart of [`DamCell::common_mode_step`].
    pub fn single_ended_step(&self, side: Side, dv: f64) -> Result<DamCell> {
        let moved = NodeState::new(self.params(side), self.node(side).v_fg + dv)?;
        Ok(match side {
            Side::Set => self.with_nodes(moved, self.reset_node, 0.0),
            Side::Reset => self.with_nodes(self.set_node, moved, 0.0),
        })
    }

    /// Net weight change (same units as the weight) a pulse on `side` produces relative to
    /// the same cell left to decay over the pulse duration. Positive for both sides.
    pub fn pulse_response(&self, side: Side, pulse: Pulse) -> Result<f64> {
        let pulsed = self.pulse(side, pulse)?;
        let reference = self.decay(pulse.duration);
        Ok(side.weight_sign() * (pulsed.weight() - reference.weight()))
    }

    /// Pulse amplitude whose single pulse of `duration` on `side` changes the weight by
    /// `target_dw` (magnitude, weight units), found by bisection on `[0, amp_max]`.
    pub fn precompensated_amplitude(&self, side: Side, target_dw: f64, duration: f64, amp_max: f64) -> Result<f64> {
        let target = target_dw.abs();
        if target == 0.0 {
            return Ok(0.0);
        }
        let response = |a: f64| -> f64 {
            Pulse::new(a, duration)
                .and_then(|p| self.pulse_response(side, p))
                .unwrap_or(f64::INFINITY)
        };
        let reachable = response(amp_max);
        if !(reachable >= target) {
            return Err(Error::Saturation {
                target_mv: target,
                amp_max,
                reachable_mv: reachable,
            });
        }
        // ~1e-12 V bracket: far below the 1 uV weight tolerance
        let (lo, hi) = bisect(|a| response(a) - target, 0.0, amp_max, 1e-12, 200)
            .ok_or_else(|| Error::Argument("amplitude bracket lost monotonicity".into()))?;
        Ok(0.5 * (lo + hi))
    }
}

/// Linearised one-step weight update: `(1 - deficit) w_n + scale * C_R * dv_train`, where
/// `deficit = (k1/k2)(2 W_S + k2) exp(-k2/W_S) dt`.
pub fn discrete_update(
    w_n: f64,
    w_s: f64,
    params: &FnParams,
    dt: f64,
    dv_train: f64,
    weight_scale: f64,
) -> Result<f64> {
    let deficit = decay_deficit(params, w_s, dt);
    if deficit >= 1.0 {
        return Err(Error::StepSize { deficit });
    }
    Ok((1.0 - deficit) * w_n + weight_scale * params.coupling_ratio() * dv_train)
}

/// Per-step decay deficit of the linearised update at SET-node voltage `w_s`.
pub fn decay_deficit(params: &FnParams, w_s: f64, dt: f64) -> f64 {
    params.discharge_rate_slope(w_s) * dt
}

/// Weight-decay factor of step `n` along the free trajectory fixed by `k0`:
/// `k1 (2 / ln(k1 n dt + k0) + 1) / (k1 n dt + k0) * dt`.
///
/// This is [`decay_deficit`] evaluated at `W_S = voltage_at(n dt)`.
pub fn decay_factor(params: &FnParams, k0: f64, n: u64, dt: f64) -> f64 {
    decay_factor_ln(params, k0.ln(), n, dt)
}

/// [`decay_factor`] taking `ln k0`, for trajectories whose `k0` overflows `f64`.
pub fn decay_factor_ln(params: &FnParams, ln_k0: f64, n: u64, dt: f64) -> f64 {
    let ln_x = log_add_exp(ln_k0, params.k1.ln() + (n as f64 * dt).ln());
    (2.0 / ln_x + 1.0) * (params.k1.ln() - ln_x).exp() * dt
}

/// Precomputed sequence of per-step decay factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySchedule {
    pub alpha_eta: Vec<f64>,
    pub dt_step: f64,
}

impl DecaySchedule {
    pub fn new(params: &FnParams, ln_k0: f64, dt_step: f64, n_steps: usize) -> Self {
        let alpha_eta = (0..n_steps)
            .map(|n| decay_factor_ln(params, ln_k0, n as u64, dt_step))
            .collect();
        Self { alpha_eta, dt_step }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::calibrated_params;

    fn cell() -> DamCell {
        let p = calibrated_params();
        synchronize(&p, &p, 7.5).unwrap()
    }

    #[test]
    fn identical_sync_is_zero_and_stays_zero() {
        let c = cell();
        assert_eq!(c.read_weight().weight, 0.0);
        assert_eq!(c.decay(10.0).weight(), 0.0);
        assert_eq!(c.common_mode_step(0.1).unwrap().weight(), 0.0);
    }

    #[test]
    fn mismatched_sync_matches_rates() {
        let p = calibrated_params();
        let q = FnParams { k1: p.k1 * 1.001, ..p };
        let c = synchronize(&p, &q, 7.5).unwrap();
        let rs = p.discharge_rate(c.set_node.v_fg);
        let rr = q.discharge_rate(c.reset_node.v_fg);
        assert!((rs / rr - 1.0).abs() < 1e-10);
        // offset implied by d ln r / dv: ln(1.001) / (2/v + k2/v^2)
        let v = 7.5;
        let expected = -(1.001f64).ln() / (2.0 / v + p.k2 / (v * v));
        assert!((c.differential() / expected - 1.0).abs() < 1e-3, "{}", c.differential());
    }

    #[test]
    fn sync_outside_domain_is_initialization_error() {
        let p = calibrated_params();
        assert!(matches!(synchronize(&p, &p, -1.0), Err(Error::Initialization(_))));
    }

    #[test]
    fn set_raises_and_reset_lowers() {
        let c = cell();
        let p = Pulse::new(0.1, 0.5).unwrap();
        let s = c.set_pulse(p).unwrap().weight();
        let r = c.reset_pulse(p).unwrap().weight();
        assert!(s > 0.0 && r < 0.0);
        assert!((s + r).abs() <= 1e-9 * s.abs());
        assert_eq!(c.set_pulse(p).unwrap().clock, 0.5);
    }

    #[test]
    fn decay_shrinks_weight() {
        let c = cell().set_pulse(Pulse::new(0.2, 0.5).unwrap()).unwrap();
        let mut w = c.weight();
        for k in 1..20 {
            let next = c.decay(k as f64 * 5.0).weight();
            assert!(next < w && next > 0.0);
            w = next;
        }
    }

    #[test]
    fn discrete_update_basics() {
        let p = calibrated_params();
        assert_eq!(discrete_update(0.0, 7.0, &p, 1.0, 0.0, 1000.0).unwrap(), 0.0);
        let w = discrete_update(1.0, 7.0, &p, 1.0, 0.0, 1000.0).unwrap();
        assert!(w > 0.0 && w < 1.0);
        assert!(matches!(
            discrete_update(1.0, 8.5, &p, 1.0, 0.0, 1000.0),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn decay_factor_equals_deficit_on_trajectory() {
        let p = calibrated_params();
        let ln_k0 = p.k2 / 7.5;
        for n in [0u64, 1, 10, 1000, 1_000_000] {
            let dt = 0.5;
            let ws = p.k2 / crate::node::ln_trajectory_argument(&p, ln_k0, n as f64 * dt);
            let a = decay_factor_ln(&p, ln_k0, n, dt);
            let b = decay_deficit(&p, ws, dt);
            assert!((a / b - 1.0).abs() < 1e-12, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn precompensation_hits_target() {
        let c = cell();
        assert_eq!(c.precompensated_amplitude(Side::Set, 0.0, 0.5, 32.0).unwrap(), 0.0);
        let a = c.precompensated_amplitude(Side::Set, 1.0, 0.5, 32.0).unwrap();
        let dw = c.pulse_response(Side::Set, Pulse::new(a, 0.5).unwrap()).unwrap();
        assert!((dw - 1.0).abs() < 1e-3, "{dw}");
        let a_r = c.precompensated_amplitude(Side::Reset, 1.0, 0.5, 32.0).unwrap();
        assert!((a - a_r).abs() < 1e-9);
        assert!(matches!(
            c.precompensated_amplitude(Side::Set, 1e6, 0.5, 1.0),
            Err(Error::Saturation { .. })
        ));
    }
}
