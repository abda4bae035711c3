//! Chip-in-the-loop linear classifier on two DAM weights.
//!
//! `f(x) = x2 + w1 x1 + w0`, trained on the hinge loss. Each update `-lambda * G` (in weight
//! units, i.e. millivolts) becomes a count of fixed-amplitude pulses; the amplitude is the
//! one that writes a single unit step on a nominal reference cell of the array's age.

use serde::{Deserialize, Serialize};

use crate::array::{DamArray, PulseTarget};
use crate::calibration::aged_cell;
use crate::cell::{DamCell, Side};
use crate::energy::EnergyLedger;
use crate::error::{Error, Result};
use crate::node::Pulse;
use crate::rng::DeviceRng;
use crate::trainer::dataset::{check_separable, LabeledPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    /// Constant step size lambda; the decaying physics supplies the 1/n schedule.
    pub learning_rate: f64,
    pub pulse_frequency: f64,
    pub pulse_duration: f64,
    /// Wall-clock time per training point (s).
    pub sample_interval: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Weight change written by one pulse (mV).
    pub unit_step_mv: f64,
    pub amp_max: f64,
    /// Pulse cap per weight per step; defaults to what fits in one sample interval.
    pub max_pulses: Option<u64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            pulse_frequency: 1000.0,
            pulse_duration: 5e-4,
            sample_interval: 2.0,
            epochs: 5,
            seed: 0,
            unit_step_mv: 0.01,
            amp_max: crate::cell::DEFAULT_AMP_MAX,
            max_pulses: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.learning_rate,
            self.pulse_frequency,
            self.pulse_duration,
            self.sample_interval,
            self.unit_step_mv,
            self.amp_max,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.epochs == 0 {
            return Err(Error::Argument("trainer rates, durations and epochs must be positive".into()));
        }
        if self.pulse_duration * self.pulse_frequency > 1.0 + 1e-12 {
            return Err(Error::Argument("pulse duration exceeds the pulse period".into()));
        }
        if self.pulse_cap() as f64 / self.pulse_frequency > self.sample_interval * (1.0 + 1e-12) {
            return Err(Error::Argument("pulse cap does not fit in one sample interval".into()));
        }
        Ok(())
    }

    pub fn pulse_cap(&self) -> u64 {
        self.max_pulses
            .unwrap_or((self.sample_interval * self.pulse_frequency).floor() as u64)
    }
}

/// `x2 + w1 x1 + w0`.
pub fn decision_fn(x: [f64; 2], w: [f64; 2]) -> f64 {
    x[1] + w[1] * x[0] + w[0]
}

/// `max(0, 1 - y f)`.
pub fn hinge_loss(x: [f64; 2], y: f64, w: [f64; 2]) -> f64 {
    (1.0 - y * decision_fn(x, w)).max(0.0)
}

/// `(dL/dw0, dL/dw1)`; zero once `y f >= 1`, including the kink.
pub fn hinge_gradient(x: [f64; 2], y: f64, w: [f64; 2]) -> [f64; 2] {
    if y * decision_fn(x, w) >= 1.0 {
        [0.0, 0.0]
    } else {
        [-y, -y * x[0]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePlan {
    pub side: Side,
    pub n_pulses: u64,
    /// Per-pulse amplitude (V); 0 when no pulse is issued.
    pub amplitude: f64,
    /// The requested count exceeded the cap and was cut to it.
    pub clipped: bool,
}

/// Maps a weight update (mV) to pulses: SET for positive updates, RESET for negative,
/// `round(|update| / unit_step)` of them, at the amplitude that writes one unit step on
/// `reference` with a single pulse.
pub fn gradient_to_pulses(update: f64, config: &TrainerConfig, reference: &DamCell) -> Result<PulsePlan> {
    let side = if update >= 0.0 { Side::Set } else { Side::Reset };
    let wanted = (update.abs() / config.unit_step_mv).round();
    let cap = config.pulse_cap();
    let (n_pulses, clipped) = if wanted > cap as f64 { (cap, true) } else { (wanted as u64, false) };
    let amplitude = if n_pulses == 0 {
        0.0
    } else {
        reference.precompensated_amplitude(side, config.unit_step_mv, config.pulse_duration, config.amp_max)?
    };
    Ok(PulsePlan {
        side,
        n_pulses,
        amplitude,
        clipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub t_s: f64,
    pub x: [f64; 2],
    pub y: f64,
    /// Weights read before the update (mV).
    pub weights: [f64; 2],
    pub loss: f64,
    pub gradient: [f64; 2],
    pub plans: [PulsePlan; 2],
    /// Unit-step amplitude at this step (V), whether or not pulses were issued.
    pub amplitude: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub accuracy: f64,
    pub mean_abs_update: f64,
    pub energy_j: f64,
    pub pulses: u64,
    /// Weights at the end of the epoch (mV).
    pub weights: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochSummary>,
    pub ledger: EnergyLedger,
    pub final_array: DamArray,
}

impl TrainingTrace {
    pub fn final_accuracy(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.accuracy)
    }

    pub fn final_weights(&self) -> [f64; 2] {
        let w = self.final_array.weights();
        [w[0], w[1]]
    }
}

pub fn accuracy(points: &[LabeledPoint], w: [f64; 2]) -> f64 {
    let correct = points.iter().filter(|p| p.y * decision_fn(p.x, w) > 0.0).count();
    correct as f64 / points.len() as f64
}

fn read_pair(array: &DamArray) -> [f64; 2] {
    [array.cells[0].weight(), array.cells[1].weight()]
}

/// Trains `(w0, w1)` stored in cells 0 and 1 of `array`. Every point is visited once per
/// epoch in a seeded random order and takes `sample_interval` seconds of device time;
/// pulses for a step run at the start of its interval.
pub fn train_perceptron(
    points: &[LabeledPoint],
    array: &DamArray,
    config: &TrainerConfig,
    c_in: f64,
) -> Result<TrainingTrace> {
    config.validate()?;
    if array.len() < 2 {
        return Err(Error::Argument("perceptron needs an array of at least two cells".into()));
    }
    if points.is_empty() {
        return Err(Error::Argument("empty training set".into()));
    }
    check_separable(points)?;

    let mut rng = DeviceRng::new(config.seed);
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut array = array.clone();
    let mut ledger = EnergyLedger::new(c_in)?;
    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut step = 0;

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut abs_update = 0.0;
        let mut energy = 0.0;
        let mut pulses = 0;
        for &i in &order {
            let p = points[i];
            let w = read_pair(&array);
            let loss = hinge_loss(p.x, p.y, w);
            let g = hinge_gradient(p.x, p.y, w);
            let reference = aged_cell(&array.nominal, array.v0, array.clock)?;
            let unit_amp = reference.precompensated_amplitude(
                Side::Set,
                config.unit_step_mv,
                config.pulse_duration,
                config.amp_max,
            )?;
            let mut plans = [PulsePlan {
                side: Side::Set,
                n_pulses: 0,
                amplitude: 0.0,
                clipped: false,
            }; 2];
            let mut targets = Vec::new();
            let mut step_energy = 0.0;
            for k in 0..2 {
                let update = -config.learning_rate * g[k];
                abs_update += update.abs();
                plans[k] = gradient_to_pulses(update, config, &reference)?;
                if plans[k].n_pulses > 0 {
                    let pulse = Pulse::new(plans[k].amplitude, config.pulse_duration)?;
                    targets.push(PulseTarget {
                        index: k,
                        side: plans[k].side,
                        pulse,
                        n_pulses: plans[k].n_pulses,
                        frequency: config.pulse_frequency,
                    });
                    step_energy += ledger.record(k, array.clock, pulse.amplitude, pulse.duration, plans[k].n_pulses);
                    pulses += plans[k].n_pulses;
                }
            }
            steps.push(StepRecord {
                epoch,
                step,
                t_s: array.clock,
                x: p.x,
                y: p.y,
                weights: w,
                loss,
                gradient: g,
                plans,
                amplitude: unit_amp,
                energy_j: step_energy,
            });
            energy += step_energy;
            array = array.batch_pulse(&targets, config.sample_interval)?;
            step += 1;
        }
        let w = read_pair(&array);
        epochs.push(EpochSummary {
            epoch,
            accuracy: accuracy(points, w),
            mean_abs_update: abs_update / (2 * points.len()) as f64,
            energy_j: energy,
            pulses,
            weights: w,
        });
    }
    Ok(TrainingTrace {
        steps,
        epochs,
        ledger,
        final_array: array,
    })
}
