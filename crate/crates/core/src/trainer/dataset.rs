//! Seeded two-class point sets with a guaranteed margin around a known line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::DeviceRng;

/// Half-width of the feature box.
pub const FEATURE_RANGE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: [f64; 2],
    /// +1 or -1.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableDataset {
    pub points: Vec<LabeledPoint>,
    /// Ground-truth `(w0, w1)` of the line `x2 + w1 x1 + w0 = 0`.
    pub truth: [f64; 2],
    pub margin: f64,
}

/// `n` points in `[-4, 4]^2`, alternating labels, each at least `margin` away from the
/// ground-truth line in decision-function units (`|x2 + w1 x1 + w0| >= margin`).
/// The truth is drawn from the seed with `w0` uniform in `[-2, 2]` and `w1` in `[-1, 1]`.
pub fn make_separable_dataset(n: usize, margin: f64, seed: u64) -> Result<SeparableDataset> {
    let mut rng = DeviceRng::new(seed);
    let truth = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-1.0, 1.0)];
    sample_around(n, margin, truth, &mut rng)
}

/// Same as [`make_separable_dataset`] with a caller-chosen truth line.
pub fn make_dataset_with_truth(n: usize, margin: f64, truth: [f64; 2], seed: u64) -> Result<SeparableDataset> {
    let mut rng = DeviceRng::new(seed);
    sample_around(n, margin, truth, &mut rng)
}

fn sample_around(n: usize, margin: f64, truth: [f64; 2], rng: &mut DeviceRng) -> Result<SeparableDataset> {
    if n < 2 {
        return Err(Error::Argument(format!("dataset needs n >= 2, got {n}")));
    }
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(Error::Argument(format!("margin {margin} must be > 0")));
    }
    // each label needs a slab of the box at least `margin` from the line
    for y in [1.0, -1.0] {
        let best = [-FEATURE_RANGE, FEATURE_RANGE]
            .iter()
            .flat_map(|&a| [-FEATURE_RANGE, FEATURE_RANGE].map(|b| y * (b + truth[1] * a + truth[0])))
            .fold(f64::NEG_INFINITY, f64::max);
        if best < margin {
            return Err(Error::Argument(format!(
                "margin {margin} leaves no room for label {y} inside the feature box"
            )));
        }
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        loop {
            let x = [
                rng.uniform_in(-FEATURE_RANGE, FEATURE_RANGE),
                rng.uniform_in(-FEATURE_RANGE, FEATURE_RANGE),
            ];
            if y * (x[1] + truth[1] * x[0] + truth[0]) >= margin {
                points.push(LabeledPoint { x, y });
                break;
            }
        }
    }
    Ok(SeparableDataset { points, truth, margin })
}

/// Largest worst-case gap `min_i y_i (x2 + w1 x1 + w0)` reachable by some `(w0, w1)`,
/// with the `w1` maximising it. Positive means a separating line of the trained form exists.
pub fn separation_gap(points: &[LabeledPoint]) -> (f64, f64) {
    // for fixed w1, w0 is limited by the tightest point of each class; the resulting gap
    // is concave in w1, so a ternary search finds its maximum
    let gap = |w1: f64| -> f64 {
        let mut lo = f64::NEG_INFINITY; // w0 must exceed this for y = +1
        let mut hi = f64::INFINITY; // and stay below this for y = -1
        for p in points {
            let c = -(p.x[1] + w1 * p.x[0]);
            if p.y > 0.0 {
                lo = lo.max(c);
            } else {
                hi = hi.min(c);
            }
        }
        0.5 * (hi - lo)
    };
    let (mut a, mut b) = (-1e3, 1e3);
    for _ in 0..300 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if gap(m1) < gap(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let w1 = 0.5 * (a + b);
    (gap(w1), w1)
}

pub fn check_separable(points: &[LabeledPoint]) -> Result<()> {
    let has_pos = points.iter().any(|p| p.y > 0.0);
    let has_neg = points.iter().any(|p| p.y < 0.0);
    if !(has_pos && has_neg) {
        return Ok(());
    }
    let (gap, w1) = separation_gap(points);
    if gap <= 0.0 {
        return Err(Error::NotSeparable(format!(
            "no line x2 + w1 x1 + w0 = 0 separates the classes (best gap {gap:.3e} at w1 = {w1:.4})"
        )));
    }
    Ok(())
}
