//! Table builders behind the CLI subcommands, and the output writer.
//!
//! Every command returns its files fully rendered in memory; [`write_outputs`] then writes
//! them next to a `<file>.meta.json` sidecar and removes everything it wrote if any write
//! fails.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::array::{build_array, DamArray, MismatchSpec};
use crate::calibration::{self, aged_cell, evaluate_regime, fit_calibration, fit_coords, REGIMES};
use crate::cell::{synchronize, DamCell, Side};
use crate::config::{DeviceConfig, ExperimentConfig};
use crate::energy::{noise_floor, retention_time, write_energy_trajectory};
use crate::error::{Error, Result};
use crate::node::{NodeState, Pulse};
use crate::trainer::network::{make_blobs, train_network_with_dam_decay, DamBacking, Mlp, NetworkTrace};
use crate::trainer::{make_separable_dataset, train_perceptron, TrainingTrace};

pub const OUTPUT_SCHEMA: &str = "fndam.output";
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Pulse plateau used to write the initial weight of probe and retention cells (s).
const WRITE_DURATION: f64 = calibration::REGIME_PULSE_DURATION;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Column names with units, e.g. `t_s`, `weight_mV`.
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses column `name` as floats.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .column(name)
            .ok_or_else(|| Error::Argument(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| {
                r[i].parse::<f64>().map_err(|e| Error::Parse {
                    path: name.to_string(),
                    message: e.to_string(),
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { header, rows })
    }
}

/// Shortest round-trip decimal, in exponent form outside `[1e-4, 1e9)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e9).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Csv(Table),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub content: Content,
}

impl OutputFile {
    fn csv(name: &str, table: Table) -> Self {
        Self {
            name: name.to_string(),
            content: Content::Csv(table),
        }
    }

    fn text(name: &str, text: String) -> Self {
        Self {
            name: name.to_string(),
            content: Content::Text(text),
        }
    }

    pub fn bytes(&self) -> Result<Vec<u8>> {
        match &self.content {
            Content::Csv(t) => t.to_csv(),
            Content::Text(s) => Ok(s.clone().into_bytes()),
        }
    }

    pub fn table(&self) -> Option<&Table> {
        match &self.content {
            Content::Csv(t) => Some(t),
            Content::Text(_) => None,
        }
    }
}

/// Rendered result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub command: String,
    pub files: Vec<OutputFile>,
}

impl CommandOutput {
    pub fn file(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.file(name).and_then(OutputFile::table)
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    schema: &'a str,
    schema_version: u32,
    tool: &'a str,
    tool_version: &'a str,
    command: &'a str,
    file: &'a str,
    sha256: String,
    config_sha256: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    columns: Option<&'a [String]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the resolved configuration recorded in every sidecar.
pub fn config_hash(config: &ExperimentConfig) -> String {
    sha256_hex(config.canonical_json().as_bytes())
}

/// Writes every file and its sidecar into `dir`; on failure nothing written here remains.
pub fn write_outputs(dir: &Path, output: &CommandOutput, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let hash = config_hash(config);
    let mut rendered = Vec::with_capacity(2 * output.files.len());
    for f in &output.files {
        let bytes = f.bytes()?;
        let table = f.table();
        let meta = Sidecar {
            schema: OUTPUT_SCHEMA,
            schema_version: OUTPUT_SCHEMA_VERSION,
            tool: "fndam",
            tool_version: TOOL_VERSION,
            command: &output.command,
            file: &f.name,
            sha256: sha256_hex(&bytes),
            config_sha256: &hash,
            columns: table.map(|t| t.header.as_slice()),
            rows: table.map(|t| t.rows.len()),
        };
        let mut meta_text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
        meta_text.push('\n');
        rendered.push((dir.join(&f.name), bytes));
        rendered.push((dir.join(format!("{}.meta.json", f.name)), meta_text.into_bytes()));
    }

    let created_dir = !dir.exists();
    let mut written = Vec::new();
    let result = (|| -> Result<()> {
        fs::create_dir_all(dir)?;
        for (path, bytes) in &rendered {
            // recorded before the write so a half-written file is also cleaned up
            written.push(path.clone());
            fs::write(path, bytes)?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        if created_dir {
            let _ = fs::remove_dir(dir);
        }
        return Err(e);
    }
    Ok(written)
}

fn params(config: &ExperimentConfig) -> crate::node::FnParams {
    config.device.params()
}

// ---------------------------------------------------------------- calibrate

/// Refits the device constants starting from the configured device block.
pub fn cmd_calibrate(config: &ExperimentConfig) -> Result<CommandOutput> {
    let d = &config.device;
    let fit = fit_calibration(fit_coords(&d.params(), d.v0), d.v0, d.c_in);
    if !fit.cost.is_finite() {
        return Err(Error::Domain("calibration fit left the model domain".into()));
    }
    let names = [
        "retention_high_bias",
        "amplitude_high_bias",
        "retention_mid_bias",
        "amplitude_mid_bias",
        "retention_low_bias",
        "amplitude_low_bias",
        "energy_after_horizon",
    ];
    let mut targets = Table::new(&["target", "scaled_residual"]);
    for (name, r) in names.iter().zip(fit.residuals) {
        targets.push(vec![name.to_string(), num(r)]);
    }
    let mut regimes = Table::new(&[
        "regime",
        "age_s",
        "bias_V",
        "amplitude_V",
        "nominal_amplitude_V",
        "retention_40s",
        "target_retention",
        "energy_J",
    ]);
    for r in &REGIMES {
        let o = evaluate_regime(&fit.params, d.v0, d.c_in, r)?;
        regimes.push(vec![
            r.name.to_string(),
            num(r.age),
            num(o.bias_voltage),
            num(o.amplitude),
            num(r.nominal_amplitude),
            num(o.retention),
            num(r.target_retention),
            num(o.energy),
        ]);
    }
    let mut summary = Table::new(&["k1_per_s", "k2_V", "coupling_ratio", "cost", "iterations"]);
    summary.push(vec![
        num(fit.params.k1),
        num(fit.params.k2),
        num(fit.params.coupling_ratio()),
        num(fit.cost),
        fit.iterations.to_string(),
    ]);
    let fitted = ExperimentConfig {
        device: DeviceConfig::from_params(&fit.params, d.c_in, d.v0),
        ..config.clone()
    };
    Ok(CommandOutput {
        command: "calibrate".into(),
        files: vec![
            OutputFile::csv("calibration_fit.csv", summary),
            OutputFile::csv("calibration_targets.csv", targets),
            OutputFile::csv("calibration_regimes.csv", regimes),
            OutputFile::text("device.toml", fitted.device_toml()?),
        ],
    })
}

// ---------------------------------------------------------------- characterize

/// Weight change of a pulse train relative to the same cell left alone for the same time.
fn train_response(cell: &DamCell, side: Side, pulse: Pulse, n: u64, frequency: f64) -> Result<f64> {
    let pulsed = cell.pulse_train(side, pulse, n, frequency)?;
    let idle = cell.decay(n as f64 / frequency);
    Ok(pulsed.weight() - idle.weight())
}

fn probe_cell(config: &ExperimentConfig) -> Result<DamCell> {
    aged_cell(&params(config), config.device.v0, config.experiment.probe_age_s)
}

fn time_grid(end: f64, step: f64) -> Vec<f64> {
    let n = (end / step).round() as usize;
    (0..=n).map(|i| (i as f64 * step).min(end)).collect()
}

pub fn regime_traces(config: &ExperimentConfig) -> Result<Table> {
    let p = params(config);
    let d = &config.device;
    let mut t = Table::new(&["regime", "age_s", "bias_V", "amplitude_V", "t_s", "weight_mV", "retention"]);
    for r in &REGIMES {
        let o = evaluate_regime(&p, d.v0, d.c_in, r)?;
        let written = aged_cell(&p, d.v0, r.age)?.set_pulse(Pulse::new(o.amplitude, WRITE_DURATION)?)?;
        for s in time_grid(calibration::RETENTION_WINDOW, config.experiment.trace_step_s) {
            let w = written.decay(s).weight();
            t.push(vec![
                r.name.to_string(),
                num(r.age),
                num(o.bias_voltage),
                num(o.amplitude),
                num(s),
                num(w),
                num(w / o.weight),
            ]);
        }
    }
    Ok(t)
}

/// SET, RESET, SET blocks of fixed-amplitude pulses, one per trace step.
pub fn bidirectional_sequence(config: &ExperimentConfig) -> Result<Table> {
    let e = &config.experiment;
    let mut cell = probe_cell(config)?;
    let duration = e.count_sweep_duration_s;
    let amplitude = cell.precompensated_amplitude(Side::Set, e.bidirectional_step_mv, duration, e.amp_max)?;
    let pulse = Pulse::new(amplitude, duration)?;
    let n = e.bidirectional_block;
    let sides = std::iter::repeat_n(Side::Set, n)
        .chain(std::iter::repeat_n(Side::Reset, 2 * n))
        .chain(std::iter::repeat_n(Side::Set, n));
    let mut t = Table::new(&["step", "t_s", "side", "amplitude_V", "weight_mV"]);
    let t0 = cell.clock;
    t.push(vec!["0".into(), num(0.0), "none".into(), num(0.0), num(cell.weight())]);
    for (i, side) in sides.enumerate() {
        cell = cell.pulse(side, pulse)?.decay(e.trace_step_s - duration);
        let name = match side {
            Side::Set => "set",
            Side::Reset => "reset",
        };
        t.push(vec![
            (i + 1).to_string(),
            num(cell.clock - t0),
            name.into(),
            num(amplitude),
            num(cell.weight()),
        ]);
    }
    Ok(t)
}

/// Equal total on-time split into 1, 2, 4, ... pulses inside the same wall-clock window.
pub fn pulse_splitting(config: &ExperimentConfig) -> Result<Table> {
    let e = &config.experiment;
    let cell = probe_cell(config)?;
    let window = 2.0 * e.split_on_time_s;
    let mut t = Table::new(&[
        "n_pulses",
        "pulse_duration_s",
        "on_time_s",
        "window_s",
        "amplitude_V",
        "delta_w_mV",
        "relative_to_single",
    ]);
    let mut reference = None;
    for &n in &e.split_counts {
        if n == 0 {
            return Err(Error::Argument("split counts must be positive".into()));
        }
        let pulse = Pulse::new(e.split_amplitude_v, e.split_on_time_s / n as f64)?;
        let dw = train_response(&cell, Side::Set, pulse, n, n as f64 / window)?;
        let base = *reference.get_or_insert(dw);
        t.push(vec![
            n.to_string(),
            num(pulse.duration),
            num(e.split_on_time_s),
            num(window),
            num(e.split_amplitude_v),
            num(dw),
            num(dw / base),
        ]);
    }
    Ok(t)
}

pub fn amplitude_sweep(config: &ExperimentConfig) -> Result<Table> {
    let e = &config.experiment;
    let cell = probe_cell(config)?;
    let mut t = Table::new(&["amplitude_V", "duration_s", "delta_w_mV", "ln_delta_w"]);
    for &a in &e.amplitude_sweep_v {
        let dw = cell.pulse_response(Side::Set, Pulse::new(a, e.amplitude_sweep_duration_s)?)?;
        t.push(vec![num(a), num(e.amplitude_sweep_duration_s), num(dw), num(dw.ln())]);
    }
    Ok(t)
}

pub fn count_sweep(config: &ExperimentConfig) -> Result<Table> {
    let e = &config.experiment;
    let cell = probe_cell(config)?;
    let pulse = Pulse::new(e.count_sweep_amplitude_v, e.count_sweep_duration_s)?;
    let mut t = Table::new(&["n_pulses", "amplitude_V", "duration_s", "frequency_Hz", "delta_w_mV"]);
    for n in 1..=e.count_sweep_max {
        let dw = train_response(&cell, Side::Set, pulse, n, e.count_sweep_frequency_hz)?;
        t.push(vec![
            n.to_string(),
            num(e.count_sweep_amplitude_v),
            num(e.count_sweep_duration_s),
            num(e.count_sweep_frequency_hz),
            num(dw),
        ]);
    }
    Ok(t)
}

/// A cell holding `common_mode_weight_mV` receives the same step on both nodes, or on the
/// SET node only, and is followed for the retention window next to an undisturbed copy.
pub fn common_mode_trace(config: &ExperimentConfig) -> Result<Table> {
    let e = &config.experiment;
    let cell = probe_cell(config)?;
    let amplitude = cell.precompensated_amplitude(Side::Set, e.common_mode_weight_mv, WRITE_DURATION, e.amp_max)?;
    let base = cell.set_pulse(Pulse::new(amplitude, WRITE_DURATION)?)?;
    let common = base.common_mode_step(e.common_mode_step_v)?;
    let single = base.single_ended_step(Side::Set, e.common_mode_step_v)?;
    let mut t = Table::new(&[
        "t_s",
        "baseline_mV",
        "common_mode_mV",
        "single_ended_mV",
        "common_mode_error_mV",
        "single_ended_error_mV",
    ]);
    for s in time_grid(calibration::RETENTION_WINDOW, e.trace_step_s) {
        let (b, c, si) = (base.decay(s).weight(), common.decay(s).weight(), single.decay(s).weight());
        t.push(vec![num(s), num(b), num(c), num(si), num(c - b), num(si - b)]);
    }
    Ok(t)
}

pub fn cmd_characterize(config: &ExperimentConfig) -> Result<CommandOutput> {
    Ok(CommandOutput {
        command: "characterize".into(),
        files: vec![
            OutputFile::csv("regime_traces.csv", regime_traces(config)?),
            OutputFile::csv("bidirectional_pulses.csv", bidirectional_sequence(config)?),
            OutputFile::csv("pulse_splitting.csv", pulse_splitting(config)?),
            OutputFile::csv("amplitude_sweep.csv", amplitude_sweep(config)?),
            OutputFile::csv("count_sweep.csv", count_sweep(config)?),
            OutputFile::csv("common_mode.csv", common_mode_trace(config)?),
        ],
    })
}

// ---------------------------------------------------------------- energy-report

pub fn cmd_energy_report(config: &ExperimentConfig) -> Result<CommandOutput> {
    let p = params(config);
    let d = &config.device;
    let e = &config.experiment;
    let start = NodeState::new(&p, d.v0)?;
    let samples = write_energy_trajectory(
        &p,
        start,
        calibration::ENERGY_INPUT_OFFSET * p.coupling_ratio(),
        d.c_in,
        e.energy_horizon_s,
        e.energy_samples,
    )?;
    let first = samples[0].energy;
    let mut t = Table::new(&[
        "t_s",
        "t_days",
        "v_fg_V",
        "v_train_V",
        "energy_J",
        "energy_over_initial",
        "energy_over_target",
    ]);
    for s in &samples {
        t.push(vec![
            num(s.t),
            num(s.t / 86_400.0),
            num(s.v_fg),
            num(s.v_train),
            num(s.energy),
            num(s.energy / first),
            num(s.energy / calibration::ENERGY_TARGET_J),
        ]);
    }
    Ok(CommandOutput {
        command: "energy-report".into(),
        files: vec![OutputFile::csv("energy_trajectory.csv", t)],
    })
}

// ---------------------------------------------------------------- retention-report

/// `cell` after a SET pulse writing `weight_mv`, or `cell` itself for a zero weight.
fn written_cell(cell: &DamCell, weight_mv: f64, amp_max: f64) -> Result<(DamCell, f64)> {
    if weight_mv == 0.0 {
        return Ok((*cell, 0.0));
    }
    let a = cell.precompensated_amplitude(Side::Set, weight_mv, WRITE_DURATION, amp_max)?;
    Ok((cell.set_pulse(Pulse::new(a, WRITE_DURATION)?)?, a))
}

pub fn retention_vs_bias(config: &ExperimentConfig) -> Result<Table> {
    let p = params(config);
    let e = &config.experiment;
    let mut t = Table::new(&["bias_V", "weight_mV", "amplitude_V", "retention_s", "saturated"]);
    for &w in &e.retention_weights_mv {
        for &bias in &e.retention_bias_v {
            let (cell, a) = written_cell(&synchronize(&p, &p, bias)?, w, e.amp_max)?;
            let r = retention_time(&cell, &config.noise, e.retention_horizon_s);
            t.push(vec![num(bias), num(w), num(a), num(r.seconds), r.saturated.to_string()]);
        }
    }
    Ok(t)
}

pub fn retention_vs_age(config: &ExperimentConfig) -> Result<Table> {
    let p = params(config);
    let d = &config.device;
    let e = &config.experiment;
    let mut t = Table::new(&["age_s", "bias_V", "weight_mV", "amplitude_V", "retention_s", "saturated"]);
    for &w in &e.retention_weights_mv {
        for &age in &e.retention_ages_s {
            let aged = aged_cell(&p, d.v0, age)?;
            let (cell, a) = written_cell(&aged, w, e.amp_max)?;
            let r = retention_time(&cell, &config.noise, e.retention_horizon_s);
            t.push(vec![
                num(age),
                num(aged.set_node.v_fg),
                num(w),
                num(a),
                num(r.seconds),
                r.saturated.to_string(),
            ]);
        }
    }
    Ok(t)
}

pub fn cmd_retention_report(config: &ExperimentConfig) -> Result<CommandOutput> {
    let mut floor = Table::new(&["t_s", "noise_floor_V"]);
    for &s in &[0.0, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8] {
        floor.push(vec![num(s), num(noise_floor(&config.noise, s))]);
    }
    Ok(CommandOutput {
        command: "retention-report".into(),
        files: vec![
            OutputFile::csv("retention_vs_bias.csv", retention_vs_bias(config)?),
            OutputFile::csv("retention_vs_age.csv", retention_vs_age(config)?),
            OutputFile::csv("noise_floor.csv", floor),
        ],
    })
}

// ---------------------------------------------------------------- train

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Set => "set",
        Side::Reset => "reset",
    }
}

/// Array the perceptron starts from: the configured state file, or a fresh synchronised pair.
pub fn perceptron_start(config: &ExperimentConfig) -> Result<DamArray> {
    match &config.experiment.perceptron.initial_state {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config {
                path: "experiment.perceptron.initial_state".into(),
                message: format!("{path}: {e}"),
            })?;
            DamArray::load_state(&text)
        }
        None => build_array(
            2,
            &params(config),
            config.device.v0,
            MismatchSpec::none(config.experiment.seed),
        ),
    }
}

pub fn run_perceptron(config: &ExperimentConfig) -> Result<(crate::trainer::SeparableDataset, TrainingTrace)> {
    let e = &config.experiment;
    let data = make_separable_dataset(e.perceptron.n_points, e.perceptron.margin, e.seed)?;
    let array = perceptron_start(config)?;
    let trace = train_perceptron(&data.points, &array, &e.perceptron.trainer, config.device.c_in)?;
    Ok((data, trace))
}

fn perceptron_outputs(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let (data, trace) = run_perceptron(config)?;
    let mut steps = Table::new(&[
        "epoch",
        "step",
        "t_s",
        "x1",
        "x2",
        "y",
        "w0_mV",
        "w1_mV",
        "loss",
        "grad_w0",
        "grad_w1",
        "side_w0",
        "pulses_w0",
        "side_w1",
        "pulses_w1",
        "unit_step_amplitude_V",
        "energy_J",
    ]);
    for s in &trace.steps {
        steps.push(vec![
            s.epoch.to_string(),
            s.step.to_string(),
            num(s.t_s),
            num(s.x[0]),
            num(s.x[1]),
            num(s.y),
            num(s.weights[0]),
            num(s.weights[1]),
            num(s.loss),
            num(s.gradient[0]),
            num(s.gradient[1]),
            side_name(s.plans[0].side).into(),
            s.plans[0].n_pulses.to_string(),
            side_name(s.plans[1].side).into(),
            s.plans[1].n_pulses.to_string(),
            num(s.amplitude),
            num(s.energy_j),
        ]);
    }
    let mut epochs = Table::new(&["epoch", "accuracy", "mean_abs_update_mV", "energy_J", "pulses", "w0_mV", "w1_mV"]);
    for ep in &trace.epochs {
        epochs.push(vec![
            ep.epoch.to_string(),
            num(ep.accuracy),
            num(ep.mean_abs_update),
            num(ep.energy_j),
            ep.pulses.to_string(),
            num(ep.weights[0]),
            num(ep.weights[1]),
        ]);
    }
    let mut energy = Vec::new();
    trace.ledger.write_csv(&mut energy)?;
    let energy = Table::from_csv(&energy)?;
    let w = trace.final_weights();
    let mut boundary = Table::new(&["source", "w0", "w1", "accuracy", "total_energy_J"]);
    boundary.push(vec![
        "truth".into(),
        num(data.truth[0]),
        num(data.truth[1]),
        num(crate::trainer::perceptron::accuracy(&data.points, data.truth)),
        num(0.0),
    ]);
    boundary.push(vec![
        "learned".into(),
        num(w[0]),
        num(w[1]),
        num(trace.final_accuracy()),
        num(trace.ledger.total()),
    ]);
    let mut points = Table::new(&["x1", "x2", "y"]);
    for p in &data.points {
        points.push(vec![num(p.x[0]), num(p.x[1]), num(p.y)]);
    }
    Ok(vec![
        OutputFile::csv("perceptron_dataset.csv", points),
        OutputFile::csv("perceptron_steps.csv", steps),
        OutputFile::csv("perceptron_epochs.csv", epochs),
        OutputFile::csv("perceptron_energy.csv", energy),
        OutputFile::csv("perceptron_boundary.csv", boundary),
        OutputFile::text("perceptron_state.json", trace.final_array.save_state()?),
    ])
}

/// The three arms of the decay study: plain SGDM, matched FN-DAM decay, and decay on
/// cells with parameter mismatch.
pub const NETWORK_ARMS: [&str; 3] = ["sgdm", "fn_dam", "fn_dam_mismatch"];

pub fn run_network(config: &ExperimentConfig) -> Result<Vec<(&'static str, NetworkTrace)>> {
    let e = &config.experiment;
    let net = &e.network;
    let data = make_blobs(&net.blobs)?;
    let n = Mlp::parameter_count(data.n_features, net.training.hidden, data.n_classes);
    let p = params(config);
    let matched = build_array(n, &p, config.device.v0, MismatchSpec::none(e.seed))?;
    let mismatched = build_array(
        n,
        &p,
        config.device.v0,
        MismatchSpec {
            relative_sigma: e.mismatch_sigma,
            seed: e.seed,
            ..Default::default()
        },
    )?;
    let mut out = Vec::with_capacity(3);
    out.push(("sgdm", train_network_with_dam_decay(&data, None, &net.training)?));
    for (name, array) in [("fn_dam", matched), ("fn_dam_mismatch", mismatched)] {
        let backing = DamBacking {
            array,
            factor_override: None,
        };
        out.push((name, train_network_with_dam_decay(&data, Some(&backing), &net.training)?));
    }
    Ok(out)
}

fn network_outputs(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let arms = run_network(config)?;
    let mut epochs = Table::new(&[
        "arm",
        "epoch",
        "decay_only",
        "train_loss",
        "train_accuracy",
        "test_accuracy",
        "mean_abs_weight",
        "device_time_s",
    ]);
    let mut summary = Table::new(&["arm", "test_accuracy_pct", "before_decay_epoch_pct"]);
    let data = make_blobs(&config.experiment.network.blobs)?;
    let mut files = Vec::new();
    for (name, trace) in &arms {
        for ep in &trace.epochs {
            epochs.push(vec![
                name.to_string(),
                ep.epoch.to_string(),
                ep.decay_only.to_string(),
                num(ep.train_loss),
                num(ep.train_accuracy),
                num(ep.test_accuracy),
                num(ep.mean_abs_weight),
                num(ep.device_time_s),
            ]);
        }
        let before = Mlp {
            params: trace.params_before_decay_epoch.clone(),
            ..trace.model.clone()
        };
        summary.push(vec![
            name.to_string(),
            num(100.0 * trace.final_test_accuracy()),
            num(100.0 * before.accuracy(&data.test)),
        ]);
        if let Some(a) = &trace.final_array {
            files.push(OutputFile::text(&format!("network_{name}_state.json"), a.save_state()?));
        }
    }
    let mut all = vec![
        OutputFile::csv("network_epochs.csv", epochs),
        OutputFile::csv("network_summary.csv", summary),
    ];
    all.extend(files);
    Ok(all)
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<CommandOutput> {
    let files = match config.experiment.name.as_deref().unwrap_or("perceptron") {
        "perceptron" => perceptron_outputs(config)?,
        "network" => network_outputs(config)?,
        other => {
            return Err(Error::Config {
                path: "experiment.name".into(),
                message: format!("unknown experiment `{other}`"),
            })
        }
    };
    Ok(CommandOutput {
        command: "train".into(),
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linear_fit;

    #[test]
    fn numbers_round_trip_in_both_notations() {
        for x in [0.0, 1.0, -2.5, 1e-12, 5.0534e58, 0.1 + 0.2, -3.3e-5, 1e9] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1e-12), "1e-12");
        assert_eq!(num(0.25), "0.25");
    }

    #[test]
    fn table_csv_round_trips_with_quoting() {
        let mut t = Table::new(&["name", "value_V"]);
        t.push(vec!["a,b".into(), num(1.5)]);
        t.push(vec!["q\"x".into(), num(-2e-20)]);
        let bytes = t.to_csv().unwrap();
        assert!(!bytes.contains(&b'\r'));
        assert_eq!(Table::from_csv(&bytes).unwrap(), t);
        assert_eq!(t.floats("value_V").unwrap(), vec![1.5, -2e-20]);
    }

    #[test]
    fn sidecars_name_their_file_and_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        let out = cmd_energy_report(&cfg).unwrap();
        let written = write_outputs(dir.path(), &out, &cfg).unwrap();
        assert_eq!(written.len(), 2);
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("energy_trajectory.csv.meta.json")).unwrap())
                .unwrap();
        assert_eq!(meta["config_sha256"], config_hash(&cfg));
        let bytes = fs::read(dir.path().join("energy_trajectory.csv")).unwrap();
        assert_eq!(meta["sha256"], sha256_hex(&bytes));
        assert_eq!(meta["rows"], cfg.experiment.energy_samples);
    }

    #[test]
    fn short_pulse_count_response_is_linear() {
        let t = count_sweep(&ExperimentConfig::default()).unwrap();
        let n = t.floats("n_pulses").unwrap();
        let dw = t.floats("delta_w_mV").unwrap();
        assert_eq!(n.len(), 20);
        assert!(dw.windows(2).all(|w| w[1] > w[0]));
        assert!(linear_fit(&n, &dw).r_squared > 0.99);
    }

    #[test]
    fn bidirectional_sequence_moves_both_ways() {
        let t = bidirectional_sequence(&ExperimentConfig::default()).unwrap();
        let w = t.floats("weight_mV").unwrap();
        let n = ExperimentConfig::default().experiment.bidirectional_block;
        assert!(w[1..=n].windows(2).all(|p| p[1] > p[0]));
        assert!(w[n + 1..=3 * n].windows(2).all(|p| p[1] < p[0]));
        assert!(w[3 * n] < 0.0);
    }

    #[test]
    fn retention_grids_report_zero_for_zero_weight_and_grow_with_age() {
        let cfg = ExperimentConfig::default();
        let t = retention_vs_age(&cfg).unwrap();
        let w = t.floats("weight_mV").unwrap();
        let r = t.floats("retention_s").unwrap();
        let mut by_weight: std::collections::BTreeMap<u64, Vec<f64>> = Default::default();
        for (wi, ri) in w.iter().zip(&r) {
            by_weight.entry(wi.to_bits()).or_default().push(*ri);
        }
        for (bits, times) in by_weight {
            if f64::from_bits(bits) == 0.0 {
                assert!(times.iter().all(|x| *x == 0.0));
            } else {
                assert!(times.windows(2).all(|p| p[1] > p[0]), "{times:?}");
            }
        }
    }
}
