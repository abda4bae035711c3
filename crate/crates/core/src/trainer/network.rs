//! Small MLP trained with SGD + momentum, optionally with every parameter backed by a DAM
//! cell whose physics supplies the weight decay.
//!
//! Per iteration `n` (device time `n * dt`) a DAM-backed parameter is updated as
//! `w <- w (1 - a_n) + d_n` after the gradient step, where `a_n` is the decay factor of its
//! cell and `d_n` is the change of the cell's intrinsic weight over the iteration: exactly
//! zero for matched SET/RESET nodes, a slow drift under mismatch. Weights map to cells at
//! `mv_per_unit` millivolts per unit.

use serde::{Deserialize, Serialize};

use crate::array::DamArray;
use crate::cell::decay_factor_ln;
use crate::error::{Error, Result};
use crate::rng::DeviceRng;

/// Upper bound on DAM-backed parameters.
pub const MAX_PARAMETERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobData {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub n_features: usize,
    pub n_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobSpec {
    pub n_classes: usize,
    pub n_features: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Standard deviation of the class centres; samples have unit spread around them.
    pub center_spread: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            n_classes: 4,
            n_features: 8,
            train_per_class: 200,
            test_per_class: 250,
            center_spread: 1.5,
            seed: 2,
        }
    }
}

/// Gaussian class blobs with seeded centres.
pub fn make_blobs(spec: &BlobSpec) -> Result<BlobData> {
    if spec.n_classes < 2 || spec.n_features == 0 || spec.train_per_class == 0 || spec.test_per_class == 0 {
        return Err(Error::Argument("blobs need >= 2 classes, >= 1 feature and samples".into()));
    }
    let mut rng = DeviceRng::new(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| (0..spec.n_features).map(|_| spec.center_spread * rng.standard_normal()).collect())
        .collect();
    let draw = |per_class: usize, rng: &mut DeviceRng| -> Vec<Sample> {
        let mut out = Vec::with_capacity(per_class * spec.n_classes);
        for _ in 0..per_class {
            for (class, c) in centers.iter().enumerate() {
                out.push(Sample {
                    x: c.iter().map(|m| m + rng.standard_normal()).collect(),
                    class,
                });
            }
        }
        out
    };
    let train = draw(spec.train_per_class, &mut rng);
    let test = draw(spec.test_per_class, &mut rng);
    Ok(BlobData {
        train,
        test,
        n_features: spec.n_features,
        n_classes: spec.n_classes,
    })
}

/// Two-layer ReLU network, parameters in one flat vector: `W1 (h x d)`, `b1`, `W2 (k x h)`, `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn parameter_count(n_in: usize, n_hidden: usize, n_out: usize) -> usize {
        n_hidden * n_in + n_hidden + n_out * n_hidden + n_out
    }

    /// He-uniform weights, zero biases.
    pub fn init(n_in: usize, n_hidden: usize, n_out: usize, rng: &mut DeviceRng) -> Self {
        let mut params = vec![0.0; Self::parameter_count(n_in, n_hidden, n_out)];
        let l1 = (6.0 / n_in as f64).sqrt();
        for p in &mut params[..n_hidden * n_in] {
            *p = rng.uniform_in(-l1, l1);
        }
        let o2 = n_hidden * n_in + n_hidden;
        let l2 = (6.0 / n_hidden as f64).sqrt();
        for p in &mut params[o2..o2 + n_out * n_hidden] {
            *p = rng.uniform_in(-l2, l2);
        }
        Self {
            n_in,
            n_hidden,
            n_out,
            params,
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.n_hidden * self.n_in;
        let w2 = b1 + self.n_hidden;
        let b2 = w2 + self.n_out * self.n_hidden;
        (b1, w2, b2)
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let (b1, _, _) = self.offsets();
        (0..self.n_hidden)
            .map(|j| {
                let row = &self.params[j * self.n_in..(j + 1) * self.n_in];
                let z = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.params[b1 + j];
                z.max(0.0)
            })
            .collect()
    }

    fn logits_from_hidden(&self, h: &[f64]) -> Vec<f64> {
        let (_, w2, b2) = self.offsets();
        (0..self.n_out)
            .map(|k| {
                let row = &self.params[w2 + k * self.n_hidden..w2 + (k + 1) * self.n_hidden];
                row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.params[b2 + k]
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits_from_hidden(&self.hidden(x));
        let mut best = 0;
        for k in 1..z.len() {
            if z[k] > z[best] {
                best = k;
            }
        }
        best
    }

    pub fn accuracy(&self, data: &[Sample]) -> f64 {
        let ok = data.iter().filter(|s| self.predict(&s.x) == s.class).count();
        ok as f64 / data.len() as f64
    }

    /// Mean softmax cross-entropy over `batch` and its gradient.
    pub fn loss_and_gradient(&self, batch: &[&Sample]) -> (f64, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for s in batch {
            let h = self.hidden(&s.x);
            let z = self.logits_from_hidden(&h);
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
            let sum: f64 = e.iter().sum();
            loss += scale * (sum.ln() + zmax - z[s.class]);
            let dz: Vec<f64> = e
                .iter()
                .enumerate()
                .map(|(k, v)| scale * (v / sum - if k == s.class { 1.0 } else { 0.0 }))
                .collect();
            let mut dh = vec![0.0; self.n_hidden];
            for k in 0..self.n_out {
                grad[b2 + k] += dz[k];
                for j in 0..self.n_hidden {
                    grad[w2 + k * self.n_hidden + j] += dz[k] * h[j];
                    dh[j] += dz[k] * self.params[w2 + k * self.n_hidden + j];
                }
            }
            for j in 0..self.n_hidden {
                if h[j] <= 0.0 {
                    continue;
                }
                grad[b1 + j] += dh[j];
                for i in 0..self.n_in {
                    grad[j * self.n_in + i] += dh[j] * s.x[i];
                }
            }
        }
        (loss, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub hidden: usize,
    /// Total epochs; the last one applies decay only.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Device time per iteration (s).
    pub seconds_per_iteration: f64,
    /// Cell weight representing one unit of network weight (mV).
    pub mv_per_unit: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            epochs: 10,
            batch_size: 16,
            learning_rate: 0.05,
            momentum: 0.9,
            seconds_per_iteration: 0.2,
            mv_per_unit: 0.05,
            seed: 2,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.hidden > 0
            && self.epochs >= 1
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.seconds_per_iteration > 0.0
            && self.mv_per_unit > 0.0;
        if !ok {
            return Err(Error::Argument("invalid network training configuration".into()));
        }
        Ok(())
    }
}

/// DAM backing for every network parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct DamBacking {
    /// One cell per parameter, in parameter order.
    pub array: DamArray,
    /// Replaces every decay factor when set; `Some(0.0)` switches the physics decay off.
    pub factor_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEpoch {
    pub epoch: usize,
    pub decay_only: bool,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub mean_abs_weight: f64,
    pub device_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTrace {
    pub epochs: Vec<NetworkEpoch>,
    pub model: Mlp,
    /// Parameters just before the decay-only epoch.
    pub params_before_decay_epoch: Vec<f64>,
    pub final_array: Option<DamArray>,
}

impl NetworkTrace {
    pub fn final_test_accuracy(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.test_accuracy)
    }
}

struct Backing {
    array: DamArray,
    ln_k0: Vec<f64>,
    intrinsic: Vec<f64>,
    factor_override: Option<f64>,
    mv_per_unit: f64,
    dt: f64,
}

impl Backing {
    fn new(b: &DamBacking, n_params: usize, config: &NetworkConfig) -> Result<Self> {
        if b.array.len() != n_params {
            return Err(Error::Argument(format!(
                "DAM array has {} cells for {n_params} parameters",
                b.array.len()
            )));
        }
        let ln_k0 = b.array.cells.iter().map(|c| c.set_node.ln_k0(&c.set_params)).collect();
        Ok(Self {
            intrinsic: b.array.weights(),
            array: b.array.clone(),
            ln_k0,
            factor_override: b.factor_override,
            mv_per_unit: config.mv_per_unit,
            dt: config.seconds_per_iteration,
        })
    }

    /// Decays `params` over iteration `n` and advances the cells by one iteration.
    fn step(&mut self, params: &mut [f64], n: u64) {
        self.array = self.array.advance(self.dt);
        for (i, w) in params.iter_mut().enumerate() {
            let cell = &self.array.cells[i];
            let a = self
                .factor_override
                .unwrap_or_else(|| decay_factor_ln(&cell.set_params, self.ln_k0[i], n, self.dt));
            *w *= 1.0 - a;
            let now = cell.weight();
            let drift = now - self.intrinsic[i];
            self.intrinsic[i] = now;
            if drift != 0.0 {
                *w += drift / self.mv_per_unit;
            }
        }
    }
}

/// Trains an MLP on `data` with SGDM. With `backing`, every parameter also undergoes its
/// cell's decay (and intrinsic drift) each iteration. The last epoch applies no gradient
/// updates, only the per-iteration decay.
pub fn train_network_with_dam_decay(
    data: &BlobData,
    backing: Option<&DamBacking>,
    config: &NetworkConfig,
) -> Result<NetworkTrace> {
    config.validate()?;
    let n_params = Mlp::parameter_count(data.n_features, config.hidden, data.n_classes);
    if n_params > MAX_PARAMETERS {
        return Err(Error::Argument(format!(
            "{n_params} parameters exceed the {MAX_PARAMETERS}-cell limit"
        )));
    }
    let mut rng = DeviceRng::new(config.seed);
    let mut model = Mlp::init(data.n_features, config.hidden, data.n_classes, &mut rng);
    let mut velocity = vec![0.0; n_params];
    let mut dam = match backing {
        Some(b) => Some(Backing::new(b, n_params, config)?),
        None => None,
    };
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut params_before_decay_epoch = model.params.clone();
    let mut n: u64 = 0;

    for epoch in 0..config.epochs {
        let decay_only = epoch + 1 == config.epochs;
        if decay_only {
            params_before_decay_epoch = model.params.clone();
        }
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            if !decay_only {
                let batch: Vec<&Sample> = chunk.iter().map(|&i| &data.train[i]).collect();
                let (loss, grad) = model.loss_and_gradient(&batch);
                loss_sum += loss;
                for ((w, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                    *v = config.momentum * *v - config.learning_rate * g;
                    *w += *v;
                }
            }
            batches += 1;
            if let Some(d) = dam.as_mut() {
                d.step(&mut model.params, n);
            }
            n += 1;
        }
        let mean_abs_weight = model.params.iter().map(|w| w.abs()).sum::<f64>() / n_params as f64;
        epochs.push(NetworkEpoch {
            epoch,
            decay_only,
            train_loss: if decay_only { f64::NAN } else { loss_sum / batches as f64 },
            train_accuracy: model.accuracy(&data.train),
            test_accuracy: model.accuracy(&data.test),
            mean_abs_weight,
            device_time_s: n as f64 * config.seconds_per_iteration,
        });
    }
    Ok(NetworkTrace {
        epochs,
        model,
        params_before_decay_epoch,
        final_array: dam.map(|d| d.array),
    })
}
