//! Indexed DAM cells with seeded per-node parameter mismatch and a versioned state file.
//!
//! State file layout (JSON):
//!
//! ```text
//! {
//!   "schema": "fndam.array-state",
//!   "version": 1,
//!   "checksum": "<sha256 hex of the compact, key-sorted JSON of `state`>",
//!   "state": {
//!     "cells": [ { "set_node": {"v_fg": ..}, "reset_node": {..}, "set_params": {..},
//!                  "reset_params": {..}, "weight_scale": .., "clock": .. }, .. ],
//!     "nominal": { "k1": .., "k2": .., "c_total": .., "c_couple": .., "quantize_charge": .. },
//!     "v0": ..,
//!     "mismatch": { "relative_sigma": .., "seed": .., "distribution": "gaussian" | "uniform" },
//!     "clock": ..,
//!     "rng": { "algorithm": "chacha8-boxmuller-v1", "seed": .., "word_pos": "<decimal u128>" }
//!   }
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so every voltage reloads bit-exactly.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell::{synchronize, DamCell, Side, WeightReading};
use crate::error::{Error, Result};
use crate::node::{FnParams, Pulse};
use crate::rng::{DeviceRng, RNG_ALGORITHM};

pub const STATE_SCHEMA: &str = "fndam.array-state";
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MismatchDistribution {
    Gaussian,
    /// Uniform on `±sqrt(3) sigma`, which has standard deviation `sigma`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchSpec {
    pub relative_sigma: f64,
    pub seed: u64,
    pub distribution: MismatchDistribution,
}

impl Default for MismatchSpec {
    fn default() -> Self {
        Self {
            relative_sigma: 0.001,
            seed: 0,
            distribution: MismatchDistribution::Gaussian,
        }
    }
}

impl MismatchSpec {
    pub fn none(seed: u64) -> Self {
        Self {
            relative_sigma: 0.0,
            seed,
            distribution: MismatchDistribution::Gaussian,
        }
    }

    fn draw(&self, rng: &mut DeviceRng) -> f64 {
        let z = match self.distribution {
            MismatchDistribution::Gaussian => rng.standard_normal(),
            MismatchDistribution::Uniform => rng.uniform_in(-3f64.sqrt(), 3f64.sqrt()),
        };
        1.0 + self.relative_sigma * z
    }
}

/// Pulse order for one cell in a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTarget {
    pub index: usize,
    pub side: Side,
    pub pulse: Pulse,
    /// Number of pulses; 1 is a single pulse.
    pub n_pulses: u64,
    /// Repetition rate for `n_pulses > 1` (Hz).
    pub frequency: f64,
}

impl PulseTarget {
    pub fn single(index: usize, side: Side, pulse: Pulse) -> Self {
        Self {
            index,
            side,
            pulse,
            n_pulses: 1,
            frequency: 1.0 / pulse.duration,
        }
    }

    /// Wall-clock time the pulses occupy.
    pub fn busy_time(&self) -> f64 {
        if self.n_pulses == 1 {
            self.pulse.duration
        } else {
            self.n_pulses as f64 / self.frequency
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamArray {
    pub cells: Vec<DamCell>,
    pub nominal: FnParams,
    pub v0: f64,
    pub mismatch: MismatchSpec,
    /// Seconds since the array was built; every cell clock equals it.
    pub clock: f64,
    /// Continues after the mismatch draws; feeds noisy reads.
    pub rng: DeviceRng,
}

/// `n` rate-matched cells whose SET and RESET nodes get independent `k1`, `k2` draws,
/// in the order set.k1, set.k2, reset.k1, reset.k2 per cell.
pub fn build_array(n: usize, nominal: &FnParams, v0: f64, mismatch: MismatchSpec) -> Result<DamArray> {
    if n == 0 {
        return Err(Error::Argument("array needs at least one cell".into()));
    }
    if !(mismatch.relative_sigma >= 0.0) || !mismatch.relative_sigma.is_finite() {
        return Err(Error::Argument(format!(
            "relative_sigma {} must be >= 0",
            mismatch.relative_sigma
        )));
    }
    nominal.validate()?;
    let mut rng = DeviceRng::new(mismatch.seed);
    let mut cells = Vec::with_capacity(n);
    let mut failed = Vec::new();
    let mut first_error = None;
    for i in 0..n {
        let set = FnParams {
            k1: nominal.k1 * mismatch.draw(&mut rng),
            k2: nominal.k2 * mismatch.draw(&mut rng),
            ..*nominal
        };
        let reset = FnParams {
            k1: nominal.k1 * mismatch.draw(&mut rng),
            k2: nominal.k2 * mismatch.draw(&mut rng),
            ..*nominal
        };
        match synchronize(&set, &reset, v0) {
            Ok(c) => cells.push(c),
            Err(e) => {
                failed.push(i);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(Error::Initialization(format!("cells {failed:?} failed to synchronize: {e}")));
    }
    Ok(DamArray {
        cells,
        nominal: *nominal,
        v0,
        mismatch,
        clock: 0.0,
        rng,
    })
}

impl DamArray {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn batch_read(&self) -> Vec<WeightReading> {
        self.cells.iter().map(DamCell::read_weight).collect()
    }

    /// Reads every cell with Gaussian node-difference noise of `sigma` volts.
    pub fn batch_read_noisy(&mut self, sigma: f64) -> Vec<WeightReading> {
        let rng = &mut self.rng;
        self.cells.iter().map(|c| c.read_weight_noisy(sigma, rng)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.cells.iter().map(DamCell::weight).collect()
    }

    pub fn advance(&self, dt: f64) -> DamArray {
        let dt = dt.max(0.0);
        DamArray {
            cells: self.cells.iter().map(|c| c.decay(dt)).collect(),
            clock: self.clock + dt,
            ..self.clone()
        }
    }

    /// Applies single pulses and pulse trains to the targeted cells within a common window
    /// of `window` seconds; every other cell, and each targeted cell once its pulses are
    /// done, evolves freely until the window closes.
    pub fn batch_pulse(&self, targets: &[PulseTarget], window: f64) -> Result<DamArray> {
        if !(window >= 0.0) || !window.is_finite() {
            return Err(Error::Argument(format!("pulse window {window} must be >= 0")));
        }
        let mut seen = BTreeSet::new();
        for t in targets {
            if t.index >= self.cells.len() {
                return Err(Error::Argument(format!(
                    "cell index {} out of range (array has {})",
                    t.index,
                    self.cells.len()
                )));
            }
            if !seen.insert(t.index) {
                return Err(Error::Argument(format!("cell {} targeted twice in one batch", t.index)));
            }
            if t.busy_time() > window * (1.0 + 1e-12) {
                return Err(Error::Argument(format!(
                    "pulses on cell {} take {} s, longer than the {window} s window",
                    t.index,
                    t.busy_time()
                )));
            }
        }
        let mut cells = self.cells.clone();
        for t in targets {
            let c = &self.cells[t.index];
            let pulsed = if t.n_pulses == 1 {
                c.pulse(t.side, t.pulse)?
            } else {
                c.pulse_train(t.side, t.pulse, t.n_pulses, t.frequency)?
            };
            let rest = (window - t.busy_time()).max(0.0);
            let mut done = pulsed.decay(rest);
            done.clock = self.clock + window;
            cells[t.index] = done;
        }
        for (i, c) in cells.iter_mut().enumerate() {
            if !seen.contains(&i) {
                *c = self.cells[i].decay(window);
            }
        }
        Ok(DamArray {
            cells,
            clock: self.clock + window,
            ..self.clone()
        })
    }

    /// Per-cell CSV: index, weight and node voltages, per-node parameters, clock.
    pub fn write_weights_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record([
            "index",
            "weight_mV",
            "set_v_fg_V",
            "reset_v_fg_V",
            "set_k1_per_s",
            "set_k2_V",
            "reset_k1_per_s",
            "reset_k2_V",
            "clock_s",
        ])?;
        for (i, c) in self.cells.iter().enumerate() {
            w.write_record([
                i.to_string(),
                c.weight().to_string(),
                c.set_node.v_fg.to_string(),
                c.reset_node.v_fg.to_string(),
                c.set_params.k1.to_string(),
                c.set_params.k2.to_string(),
                c.reset_params.k1.to_string(),
                c.reset_params.k2.to_string(),
                self.clock.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    fn to_state(&self) -> ArrayState {
        ArrayState {
            cells: self.cells.clone(),
            nominal: self.nominal,
            v0: self.v0,
            mismatch: self.mismatch,
            clock: self.clock,
            rng: RngState {
                algorithm: RNG_ALGORITHM.to_string(),
                seed: self.rng.seed(),
                word_pos: self.rng.word_pos().to_string(),
            },
        }
    }

    /// Serialises the array into the versioned, checksummed state document.
    pub fn save_state(&self) -> Result<String> {
        let state = serde_json::to_value(self.to_state()).map_err(|e| Error::Io(e.to_string()))?;
        let envelope = Envelope {
            schema: STATE_SCHEMA.to_string(),
            version: STATE_VERSION,
            checksum: checksum(&state),
            state,
        };
        let mut text = serde_json::to_string_pretty(&envelope).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn load_state(document: &str) -> Result<DamArray> {
        let de = &mut serde_json::Deserializer::from_str(document);
        let envelope: Envelope = serde_path_to_error::deserialize(de).map_err(parse_error)?;
        if envelope.schema != STATE_SCHEMA {
            return Err(Error::Parse {
                path: "schema".into(),
                message: format!("expected `{STATE_SCHEMA}`, found `{}`", envelope.schema),
            });
        }
        if envelope.version != STATE_VERSION {
            return Err(Error::Parse {
                path: "version".into(),
                message: format!("unsupported version {} (supported: {STATE_VERSION})", envelope.version),
            });
        }
        let actual = checksum(&envelope.state);
        if actual != envelope.checksum {
            return Err(Error::Parse {
                path: "checksum".into(),
                message: format!("checksum mismatch: recorded {}, computed {actual}", envelope.checksum),
            });
        }
        let state: ArrayState = serde_path_to_error::deserialize(envelope.state).map_err(|e| {
            let path = format!("state.{}", e.path());
            Error::Parse {
                path,
                message: e.into_inner().to_string(),
            }
        })?;
        state.into_array()
    }
}

fn parse_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    Error::Parse {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    }
}

fn checksum(state: &serde_json::Value) -> String {
    // Value maps are key-sorted, so this text is canonical
    let canonical = serde_json::to_string(state).unwrap_or_default();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    schema: String,
    version: u32,
    checksum: String,
    state: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RngState {
    algorithm: String,
    seed: u64,
    word_pos: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayState {
    cells: Vec<DamCell>,
    nominal: FnParams,
    v0: f64,
    mismatch: MismatchSpec,
    clock: f64,
    rng: RngState,
}

impl ArrayState {
    fn into_array(self) -> Result<DamArray> {
        if self.rng.algorithm != RNG_ALGORITHM {
            return Err(Error::Parse {
                path: "state.rng.algorithm".into(),
                message: format!("unsupported generator `{}`", self.rng.algorithm),
            });
        }
        let word_pos: u128 = self.rng.word_pos.parse().map_err(|e| Error::Parse {
            path: "state.rng.word_pos".into(),
            message: format!("{e}"),
        })?;
        if self.cells.is_empty() {
            return Err(Error::Parse {
                path: "state.cells".into(),
                message: "array has no cells".into(),
            });
        }
        for (i, c) in self.cells.iter().enumerate() {
            let bad = |field: &str, message: String| Error::Parse {
                path: format!("state.cells[{i}].{field}"),
                message,
            };
            c.set_params.validate().map_err(|e| bad("set_params", e.to_string()))?;
            c.reset_params.validate().map_err(|e| bad("reset_params", e.to_string()))?;
            if !(c.set_node.v_fg > 0.0 && c.set_node.v_fg.is_finite()) {
                return Err(bad("set_node.v_fg", "must be positive".into()));
            }
            if !(c.reset_node.v_fg > 0.0 && c.reset_node.v_fg.is_finite()) {
                return Err(bad("reset_node.v_fg", "must be positive".into()));
            }
            if c.clock != self.clock {
                return Err(bad("clock", format!("{} differs from array clock {}", c.clock, self.clock)));
            }
        }
        Ok(DamArray {
            cells: self.cells,
            nominal: self.nominal,
            v0: self.v0,
            mismatch: self.mismatch,
            clock: self.clock,
            rng: DeviceRng::at_position(self.rng.seed, word_pos),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{calibrated_params, V0};

    fn mismatched(n: usize) -> DamArray {
        build_array(n, &calibrated_params(), V0, MismatchSpec { seed: 11, ..Default::default() }).unwrap()
    }

    #[test]
    fn zero_sigma_gives_identical_zero_cells() {
        let a = build_array(5, &calibrated_params(), V0, MismatchSpec::none(1)).unwrap();
        assert!(a.cells.iter().all(|c| c == &a.cells[0]));
        assert!(a.weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn same_seed_same_array() {
        assert_eq!(mismatched(20), mismatched(20));
    }

    #[test]
    fn empty_batch_is_advance() {
        let a = mismatched(4);
        assert_eq!(a.batch_pulse(&[], 0.5).unwrap(), a.advance(0.5));
    }

    #[test]
    fn batch_rejects_duplicates_and_bad_indices() {
        let a = mismatched(3);
        let p = Pulse::new(0.2, 0.5).unwrap();
        let t = PulseTarget::single(1, Side::Set, p);
        assert!(matches!(a.batch_pulse(&[t, t], 0.5), Err(Error::Argument(_))));
        let far = PulseTarget::single(7, Side::Set, p);
        assert!(matches!(a.batch_pulse(&[far], 0.5), Err(Error::Argument(_))));
        assert!(matches!(a.batch_pulse(&[t], 0.1), Err(Error::Argument(_))));
    }

    #[test]
    fn untargeted_cells_just_decay_and_clocks_agree() {
        let a = mismatched(3);
        let p = Pulse::new(0.2, 0.5).unwrap();
        let b = a.batch_pulse(&[PulseTarget::single(0, Side::Reset, p)], 2.0).unwrap();
        assert_eq!(b.cells[2], a.cells[2].decay(2.0));
        assert!(b.cells[0].weight() < a.cells[0].decay(2.0).weight());
        assert!(b.cells.iter().all(|c| c.clock == b.clock));
    }

    #[test]
    fn state_round_trip_and_tamper_detection() {
        let mut a = mismatched(10).advance(3.25);
        a.batch_read_noisy(1e-4);
        let text = a.save_state().unwrap();
        let b = DamArray::load_state(&text).unwrap();
        assert_eq!(a, b);
        let tampered = text.replacen("\"v0\": 7.5", "\"v0\": 7.6", 1);
        assert_ne!(tampered, text);
        assert!(matches!(
            DamArray::load_state(&tampered),
            Err(Error::Parse { path, .. }) if path == "checksum"
        ));
        let wrong_version = text.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(
            DamArray::load_state(&wrong_version),
            Err(Error::Parse { path, .. }) if path == "version"
        ));
        assert!(matches!(DamArray::load_state("{\"schema\": 3}"), Err(Error::Parse { .. })));
    }
}
