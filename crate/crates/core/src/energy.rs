//! Write-energy accounting, retention against the readout noise floor, read-noise/power
//! tradeoff and programming ratio.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cell::DamCell;
use crate::error::{Error, Result};
use crate::node::{self, FnParams, NodeState};
use crate::numeric::{bisect, ExactSum};

/// Ten years, the default retention search horizon (s).
pub const DEFAULT_RETENTION_HORIZON: f64 = 10.0 * 365.25 * 86_400.0;

/// `(V_T - V_FG) / C_R`; the sign gives the polarity of the required pulse.
pub fn v_train_required(v_target: f64, v_fg: f64, c_ratio: f64) -> f64 {
    (v_target - v_fg) / c_ratio
}

/// Energy to charge the input capacitor `c_in` to `v_in`: `c_in * v_in^2 / 2`.
pub fn write_energy(c_in: f64, v_in: f64) -> f64 {
    0.5 * c_in * v_in * v_in
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub v_fg: f64,
    pub v_train: f64,
    pub energy: f64,
}

/// Per-update write energy along a free node trajectory.
///
/// The target is fixed at `V_FG(0) + target_offset`; as the gate decays the required
/// training amplitude, and with it the energy, grows. Samples are evenly spaced on
/// `[0, horizon]`.
pub fn write_energy_trajectory(
    params: &FnParams,
    initial: NodeState,
    target_offset: f64,
    c_in: f64,
    horizon: f64,
    n_samples: usize,
) -> Result<Vec<EnergySample>> {
    if !(horizon > 0.0) || n_samples < 2 {
        return Err(Error::Argument(format!(
            "energy trajectory needs horizon > 0 and at least 2 samples (got {horizon}, {n_samples})"
        )));
    }
    let c_r = params.coupling_ratio();
    Ok((0..n_samples)
        .map(|i| {
            let t = if i == 0 {
                0.0
            } else {
                horizon * i as f64 / (n_samples - 1) as f64
            };
            let v_fg = node::evolve(initial, params, t).v_fg;
            // offset kept apart from the decayed drop so that t = 0 gives offset / C_R
            // without cancellation against V_FG
            let v_train = (target_offset + (initial.v_fg - v_fg)) / c_r;
            EnergySample {
                t,
                v_fg,
                v_train,
                energy: write_energy(c_in, v_train),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEntry {
    pub cell_id: usize,
    pub t_s: f64,
    pub amplitude_v: f64,
    pub duration_s: f64,
    pub n_pulses: u64,
    pub energy_j: f64,
}

/// Append-only record of write events with exactly rounded totals.
#[derive(Debug, Clone)]
pub struct EnergyLedger {
    c_in: f64,
    entries: Vec<EnergyEntry>,
    per_cell: BTreeMap<usize, ExactSum>,
    total: ExactSum,
}

impl EnergyLedger {
    pub fn new(c_in: f64) -> Result<Self> {
        if !(c_in > 0.0) || !c_in.is_finite() {
            return Err(Error::Argument(format!("input capacitance {c_in} must be > 0")));
        }
        Ok(Self {
            c_in,
            entries: Vec::new(),
            per_cell: BTreeMap::new(),
            total: ExactSum::new(),
        })
    }

    pub fn c_in(&self) -> f64 {
        self.c_in
    }

    /// Records `n_pulses` pulses of `amplitude` on `cell_id` and returns their energy.
    pub fn record(&mut self, cell_id: usize, t_s: f64, amplitude_v: f64, duration_s: f64, n_pulses: u64) -> f64 {
        let energy_j = write_energy(self.c_in, amplitude_v) * n_pulses as f64;
        self.entries.push(EnergyEntry {
            cell_id,
            t_s,
            amplitude_v,
            duration_s,
            n_pulses,
            energy_j,
        });
        self.per_cell.entry(cell_id).or_default().add(energy_j);
        self.total.add(energy_j);
        energy_j
    }

    pub fn entries(&self) -> &[EnergyEntry] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.total.value()
    }

    pub fn cell_total(&self, cell_id: usize) -> f64 {
        self.per_cell.get(&cell_id).map_or(0.0, ExactSum::value)
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_cell.keys().copied()
    }

    /// Sum of the per-cell accumulators, for conservation checks against [`EnergyLedger::total`].
    pub fn total_over_cells(&self) -> f64 {
        let mut s = ExactSum::new();
        for acc in self.per_cell.values() {
            s.merge(acc);
        }
        s.value()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["cell_id", "t_s", "amplitude_V", "duration_s", "n_pulses", "energy_J"])?;
        for e in &self.entries {
            w.write_record([
                e.cell_id.to_string(),
                e.t_s.to_string(),
                e.amplitude_v.to_string(),
                e.duration_s.to_string(),
                e.n_pulses.to_string(),
                e.energy_j.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Readout noise floor `sigma0 + sigma_coeff * sqrt(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// V
    pub sigma0: f64,
    /// V / sqrt(s)
    pub sigma_coeff: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma0: 100e-6,
            sigma_coeff: 1.4e-6,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 >= 0.0 && self.sigma_coeff >= 0.0) {
            return Err(Error::Domain("noise coefficients must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn noise_floor(model: &NoiseModel, t: f64) -> f64 {
    model.sigma0 + model.sigma_coeff * t.max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionTime {
    pub seconds: f64,
    /// The weight was still above the floor at the search horizon.
    pub saturated: bool,
}

/// First time the decaying weight of `cell` meets the noise floor, to within
/// `max(1 s, 0.1 %)`. Uses the full two-node simulation.
pub fn retention_time(cell: &DamCell, model: &NoiseModel, horizon: f64) -> RetentionTime {
    // both sides in weight units
    let above = |t: f64| cell.decay(t).weight().abs() - cell.weight_scale * noise_floor(model, t);
    if above(0.0) <= 0.0 {
        return RetentionTime {
            seconds: 0.0,
            saturated: false,
        };
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while above(hi) > 0.0 {
        if hi >= horizon {
            return RetentionTime {
                seconds: horizon,
                saturated: true,
            };
        }
        lo = hi;
        hi = (2.0 * hi).min(horizon);
    }
    let tol = (1e-3 * hi).max(1.0);
    let (_, t) = bisect(above, lo, hi, tol, 200).unwrap_or((lo, hi));
    RetentionTime {
        seconds: t,
        saturated: false,
    }
}

/// Subthreshold readout amplifier constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadModel {
    pub u_t: f64,
    pub kappa: f64,
    pub v_dd: f64,
    pub q: f64,
}

impl Default for ReadModel {
    fn default() -> Self {
        Self {
            u_t: 0.026,
            kappa: 0.7,
            v_dd: 5.0,
            q: 1.602e-19,
        }
    }
}

impl ReadModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 1.0 && self.u_t > 0.0 && self.v_dd > 0.0 && self.q > 0.0) {
            return Err(Error::Domain(
                "read model needs 0 < kappa <= 1 and positive u_t, v_dd, q".into(),
            ));
        }
        Ok(())
    }

    /// `4 U_T^2 q V_dd / kappa`, the noise-power product (V^2 W / Hz).
    fn noise_power_product(&self) -> f64 {
        4.0 * self.u_t * self.u_t * self.q * self.v_dd / self.kappa
    }
}

/// Input-referred read noise `sqrt(4 U_T^2 q V_dd df / (kappa P))` (V rms).
pub fn read_noise(model: &ReadModel, p_read: f64, bandwidth: f64) -> f64 {
    (model.noise_power_product() * bandwidth / p_read).sqrt()
}

/// Read power at which [`read_noise`] equals `noise_floor`.
pub fn min_read_power(model: &ReadModel, noise_floor: f64, bandwidth: f64) -> f64 {
    model.noise_power_product() * bandwidth / (noise_floor * noise_floor)
}

/// `(V_T / V_FG)^2 exp(k2/V_FG - k2/V_T)`, the tunneling-current ratio between the target
/// and present gate voltages.
pub fn programming_ratio(params: &FnParams, v_target: f64, v_fg: f64) -> Result<f64> {
    if !(v_target > 0.0 && v_fg > 0.0) {
        return Err(Error::Domain(format!(
            "programming ratio needs positive voltages (v_target={v_target}, v_fg={v_fg})"
        )));
    }
    let r = v_target / v_fg;
    Ok(r * r * (params.k2 / v_fg - params.k2 / v_target).exp())
}
