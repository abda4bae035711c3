//! A single Fowler-Nordheim tunneling floating-gate node.
//!
//! The unperturbed node follows `V(t) = k2 / ln(k1 t + k0)`. The voltage itself is the
//! whole state: `k0 = exp(k2 / V)` re-anchors the trajectory at any instant, so evolution
//! by `dt` is `V' = k2 / ln(exp(k2/V) + k1 dt)`, evaluated in the log domain because
//! `k2/V` is typically well above 100 at calibrated parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::log_add_exp;

/// Elementary charge (coulomb).
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

/// Device constants of one tunneling node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnParams {
    /// Rate constant (1/s).
    pub k1: f64,
    /// Barrier constant (V).
    pub k2: f64,
    /// Total floating-gate capacitance C_T (F).
    pub c_total: f64,
    /// Input coupling capacitance C_C (F).
    pub c_couple: f64,
    /// Quantise tunneling-induced voltage changes to whole electrons (q / C_T).
    #[serde(default)]
    pub quantize_charge: bool,
}

impl FnParams {
    pub fn new(k1: f64, k2: f64, c_total: f64, c_couple: f64) -> Result<Self> {
        let p = Self {
            k1,
            k2,
            c_total,
            c_couple,
            quantize_charge: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.k1, self.k2, self.c_total, self.c_couple]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.k1 <= 0.0 || self.k2 <= 0.0 || self.c_total <= 0.0 {
            return Err(Error::Domain(format!(
                "k1, k2 and c_total must be positive and finite (k1={}, k2={}, c_total={})",
                self.k1, self.k2, self.c_total
            )));
        }
        if !(self.c_couple > 0.0 && self.c_couple < self.c_total) {
            return Err(Error::Domain(format!(
                "coupling capacitance must satisfy 0 < c_couple < c_total (c_couple={}, c_total={})",
                self.c_couple, self.c_total
            )));
        }
        Ok(())
    }

    pub fn with_charge_quantization(mut self, on: bool) -> Self {
        self.quantize_charge = on;
        self
    }

    /// Input coupling ratio C_R = C_C / C_T.
    pub fn coupling_ratio(&self) -> f64 {
        self.c_couple / self.c_total
    }

    /// Voltage step of a single electron, q / C_T.
    pub fn charge_step(&self) -> f64 {
        ELECTRON_CHARGE / self.c_total
    }

    /// `ln` of the discharge rate `(k1/k2) v^2 exp(-k2/v)` in V/s.
    pub fn ln_discharge_rate(&self, v: f64) -> f64 {
        self.k1.ln() - self.k2.ln() + 2.0 * v.ln() - self.k2 / v
    }

    /// Discharge rate `-dV/dt = I_FN / C_T` (V/s) at gate voltage `v > 0`.
    pub fn discharge_rate(&self, v: f64) -> f64 {
        self.ln_discharge_rate(v).exp()
    }

    /// Slope of the discharge rate with respect to voltage, `(k1/k2)(2v + k2) exp(-k2/v)` (1/s).
    ///
    /// This is the resynchronisation rate of a small differential weight.
    pub fn discharge_rate_slope(&self, v: f64) -> f64 {
        (self.k1.ln() - self.k2.ln() + (2.0 * v + self.k2).ln() - self.k2 / v).exp()
    }
}

/// Instantaneous floating-gate voltage of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeState {
    pub v_fg: f64,
}

impl NodeState {
    /// Node at a positive, finite `v_fg`.
    pub fn new(_params: &FnParams, v_fg: f64) -> Result<Self> {
        check_voltage(v_fg)?;
        Ok(Self { v_fg })
    }

    /// Initial-condition constant of the trajectory through this state, `exp(k2 / v_fg)`.
    pub fn k0(&self, params: &FnParams) -> f64 {
        (params.k2 / self.v_fg).exp()
    }

    /// `ln k0 = k2 / v_fg`, finite even when `k0` itself overflows.
    pub fn ln_k0(&self, params: &FnParams) -> f64 {
        params.k2 / self.v_fg
    }
}

/// Any `v > 0` gives `k0 = exp(k2/v) > 1`, so `ln(k1 t + k0)` stays positive.
fn check_voltage(v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("gate voltage {v} V must be positive and finite")));
    }
    Ok(())
}

/// Rectangular control-gate pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Control-gate step (V), unipolar.
    pub amplitude: f64,
    /// Plateau length (s).
    pub duration: f64,
}

impl Pulse {
    pub fn new(amplitude: f64, duration: f64) -> Result<Self> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::Argument(format!("pulse amplitude {amplitude} must be >= 0")));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::Argument(format!("pulse duration {duration} must be > 0")));
        }
        Ok(Self {
            amplitude,
            duration,
        })
    }
}

/// Sign of the capacitive coupling of a pulse onto the floating gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

/// `k0 = exp(k2 / v0)`, the constant that puts the trajectory at `v0` when `t = 0`.
pub fn k0_from_initial(params: &FnParams, v0: f64) -> Result<f64> {
    check_voltage(v0)?;
    let k0 = (params.k2 / v0).exp();
    if !k0.is_finite() {
        return Err(Error::Domain(format!(
            "k0 = exp({}) overflows; use NodeState::ln_k0",
            params.k2 / v0
        )));
    }
    Ok(k0)
}

/// `ln(k1 t + k0)` computed without forming either term.
pub fn ln_trajectory_argument(params: &FnParams, ln_k0: f64, t: f64) -> f64 {
    log_add_exp(ln_k0, params.k1.ln() + t.ln())
}

/// Gate voltage `k2 / ln(k1 t + k0)` at time `t >= 0` on the trajectory fixed by `k0`.
pub fn voltage_at(params: &FnParams, k0: f64, t: f64) -> f64 {
    params.k2 / ln_trajectory_argument(params, k0.ln(), t)
}

/// Fowler-Nordheim tunneling current magnitude `C_T (k1/k2) v^2 exp(-k2/v)` (A).
///
/// The current discharges the gate: `dV/dt = -I_FN / C_T`.
pub fn tunneling_current(params: &FnParams, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!("tunneling current needs v > 0, got {v}")));
    }
    Ok(params.c_total * params.discharge_rate(v))
}

/// Free evolution of a node for `dt >= 0` seconds along its closed-form trajectory.
pub fn evolve(state: NodeState, params: &FnParams, dt: f64) -> NodeState {
    if dt <= 0.0 {
        return state;
    }
    let ln_arg = ln_trajectory_argument(params, state.ln_k0(params), dt);
    let v = params.k2 / ln_arg;
    if params.quantize_charge {
        let q = params.charge_step();
        let dv = ((v - state.v_fg) / q).round() * q;
        return NodeState {
            v_fg: state.v_fg + dv,
        };
    }
    NodeState { v_fg: v }
}

/// Applies one rectangular pulse through the coupling capacitor: the gate jumps by
/// `±C_R·amplitude`, tunnels at the elevated (or depressed) voltage for the pulse
/// duration, then jumps back.
pub fn apply_pulse(state: NodeState, params: &FnParams, pulse: Pulse, polarity: Polarity) -> Result<NodeState> {
    let shift = polarity.sign() * params.coupling_ratio() * pulse.amplitude;
    let raised = state.v_fg + shift;
    check_voltage(raised)?;
    let tunneled = evolve(NodeState { v_fg: raised }, params, pulse.duration);
    let released = tunneled.v_fg - shift;
    if !(released > 0.0) {
        return Err(Error::Domain(format!(
            "gate voltage {released} V after pulse release is not positive"
        )));
    }
    Ok(NodeState { v_fg: released })
}

/// `n_pulses` pulses whose rising edges are `1/frequency` apart; each is followed by idle
/// evolution to the end of its period, so the train lasts `n_pulses / frequency` seconds.
pub fn pulse_train(
    state: NodeState,
    params: &FnParams,
    pulse: Pulse,
    n_pulses: u64,
    frequency: f64,
    polarity: Polarity,
) -> Result<NodeState> {
    let period = check_train(pulse, n_pulses, frequency)?;
    let idle = period - pulse.duration;
    let mut s = state;
    for _ in 0..n_pulses {
        s = apply_pulse(s, params, pulse, polarity)?;
        s = evolve(s, params, idle);
    }
    Ok(s)
}

/// Validates a pulse train and returns its period.
pub(crate) fn check_train(pulse: Pulse, n_pulses: u64, frequency: f64) -> Result<f64> {
    if n_pulses == 0 {
        return Err(Error::Argument("pulse train needs at least one pulse".into()));
    }
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::Argument(format!("pulse frequency {frequency} must be > 0")));
    }
    let period = 1.0 / frequency;
    // allow for the rounding in 1/frequency when duration is exactly one period
    if pulse.duration > period * (1.0 + 1e-12) {
        return Err(Error::Argument(format!(
            "pulses overlap: duration {} s exceeds period {} s",
            pulse.duration, period
        )));
    }
    Ok(period)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> FnParams {
        FnParams::new(1e-3, 300.0, 1e-12, 1e-13).unwrap()
    }

    #[test]
    fn k0_examples() {
        let p = params();
        let k0 = k0_from_initial(&p, 7.5).unwrap();
        assert!((k0 / 2.353_852_668_370_2e17 - 1.0).abs() < 1e-12, "{k0:e}");
        let k0 = k0_from_initial(&p, 300.0 / 2f64.ln()).unwrap();
        assert!((k0 - 2.0).abs() < 1e-14);
        assert!(k0_from_initial(&p, 0.0).is_err());
        assert!(k0_from_initial(&p, -1.0).is_err());
        assert!(k0_from_initial(&p, f64::INFINITY).is_err());
    }

    #[test]
    fn voltage_round_trips_at_t0() {
        let p = params();
        for v0 in [0.5, 3.0, 7.5, 20.0, 299.0] {
            let k0 = k0_from_initial(&p, v0).unwrap();
            let v = voltage_at(&p, k0, 0.0);
            assert!((v / v0 - 1.0).abs() < 1e-12, "{v0} -> {v}");
        }
    }

    #[test]
    fn voltage_regression_anchor() {
        // 300 / ln(1e-3 * 86400 + exp(40)) = 7.49999999999999993117666... (50-digit
        // evaluation); the 6.9e-17 V drop is below half an ulp of 7.5, so f64 rounds to 7.5.
        let p = params();
        let k0 = k0_from_initial(&p, 7.5).unwrap();
        assert_eq!(voltage_at(&p, k0, 86_400.0), 7.5);
        // a larger k1 makes the same day visible
        let fast = FnParams::new(1e15, 300.0, 1e-12, 1e-13).unwrap();
        let v = voltage_at(&fast, k0, 86_400.0);
        // 300 / ln(8.64e19 + exp(40)) = 6.53477458344114... (50-digit evaluation)
        assert!((v - 6.534_774_583_441_14).abs() < 1e-12, "{v}");
    }

    #[test]
    fn current_vanishes_near_zero_and_is_monotone() {
        let p = params();
        assert!(tunneling_current(&p, 1e-3).unwrap() < 1e-300);
        let mut last = 0.0;
        for i in 1..200 {
            let c = tunneling_current(&p, i as f64 * 0.5).unwrap();
            assert!(c > last);
            last = c;
        }
        assert!(tunneling_current(&p, 0.0).is_err());
    }

    #[test]
    fn evolve_zero_is_identity_and_composes() {
        let p = FnParams::new(2e59, 1044.7, 1e-12, 2e-13).unwrap();
        let s = NodeState::new(&p, 7.5).unwrap();
        assert_eq!(evolve(s, &p, 0.0), s);
        let a = evolve(evolve(s, &p, 20.0), &p, 20.0);
        let b = evolve(s, &p, 40.0);
        assert!((a.v_fg / b.v_fg - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_current() {
        let p = FnParams::new(2e59, 1044.7, 1e-12, 2e-13).unwrap();
        let k0 = (p.k2 / 7.5_f64).exp();
        for t in [0.0, 10.0, 1e3, 1e6] {
            // analytic derivative of k2/ln(k1 t + k0)
            let ln_x = ln_trajectory_argument(&p, k0.ln(), t);
            let dvdt = -p.k2 / (ln_x * ln_x) * (p.k1.ln() - ln_x).exp();
            let v = voltage_at(&p, k0, t);
            let from_current = -tunneling_current(&p, v).unwrap() / p.c_total;
            assert!((dvdt / from_current - 1.0).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn zero_amplitude_pulse_is_plain_evolution() {
        let p = FnParams::new(2e59, 1044.7, 1e-12, 2e-13).unwrap();
        let s = NodeState::new(&p, 7.5).unwrap();
        let pulse = Pulse::new(0.0, 0.5).unwrap();
        assert_eq!(apply_pulse(s, &p, pulse, Polarity::Positive).unwrap(), evolve(s, &p, 0.5));
    }

    #[test]
    fn positive_pulse_lowers_node_and_negative_raises_it() {
        let p = FnParams::new(2e59, 1044.7, 1e-12, 2e-13).unwrap();
        let s = NodeState::new(&p, 7.5).unwrap();
        let reference = evolve(s, &p, 0.5);
        let pulse = Pulse::new(0.5, 0.5).unwrap();
        assert!(apply_pulse(s, &p, pulse, Polarity::Positive).unwrap().v_fg < reference.v_fg);
        assert!(apply_pulse(s, &p, pulse, Polarity::Negative).unwrap().v_fg > reference.v_fg);
    }

    #[test]
    fn pulse_domain_errors() {
        let p = params();
        let s = NodeState::new(&p, 0.01).unwrap();
        let pulse = Pulse::new(1.0, 0.1).unwrap();
        assert!(matches!(apply_pulse(s, &p, pulse, Polarity::Negative), Err(Error::Domain(_))));
        assert!(Pulse::new(-0.1, 1.0).is_err());
        assert!(Pulse::new(0.1, 0.0).is_err());
    }

    #[test]
    fn single_pulse_train_is_pulse_then_idle() {
        let p = FnParams::new(2e59, 1044.7, 1e-12, 2e-13).unwrap();
        let s = NodeState::new(&p, 7.5).unwrap();
        let pulse = Pulse::new(2.0, 0.0005).unwrap();
        let train = pulse_train(s, &p, pulse, 1, 1000.0, Polarity::Positive).unwrap();
        let manual = evolve(apply_pulse(s, &p, pulse, Polarity::Positive).unwrap(), &p, 0.0005);
        assert_eq!(train, manual);
        assert!(pulse_train(s, &p, pulse, 1, 3000.0, Polarity::Positive).is_err());
        assert!(pulse_train(s, &p, pulse, 0, 1000.0, Polarity::Positive).is_err());
    }

    #[test]
    fn charge_quantization_rounds_to_electrons() {
        let p = FnParams::new(2e59, 1044.7, 1e-12, 2e-13)
            .unwrap()
            .with_charge_quantization(true);
        let q = p.charge_step();
        assert!((q - 1.602_176_634e-7).abs() < 1e-20);
        let s = NodeState::new(&p, 7.5).unwrap();
        let e = evolve(s, &p, 1.0);
        let electrons = (s.v_fg - e.v_fg) / q;
        assert!((electrons - electrons.round()).abs() < 1e-6);
        assert!(electrons > 0.0);
    }
}
