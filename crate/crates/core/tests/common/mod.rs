//! Test-side oracles that share no code with the library.
#![allow(dead_code)]

/// Adaptive Dormand-Prince 5(4) integration of the scalar ODE `y' = f(t, y)` from `t0` to
/// `t1`, with local error control `|err| <= atol + rtol |y|`.
pub fn rk45<F: Fn(f64, f64) -> f64>(f: F, t0: f64, y0: f64, t1: f64, rtol: f64, atol: f64) -> f64 {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let (mut t, mut y) = (t0, y0);
    let mut h = ((t1 - t0) * 1e-6).max(1e-9);
    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        let mut k = [0.0; 7];
        for i in 0..7 {
            let yi = y + h * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
            k[i] = f(t + C[i] * h, yi);
        }
        let y5 = y + h * (0..7).map(|i| B5[i] * k[i]).sum::<f64>();
        let y4 = y + h * (0..7).map(|i| B4[i] * k[i]).sum::<f64>();
        let scale = atol + rtol * y.abs().max(y5.abs());
        let err = ((y5 - y4) / scale).abs();
        // an overshoot past the domain gives NaN; treat it as a rejected step
        let err = if err.is_finite() { err } else { f64::MAX };
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

/// `dV/dt = -(k1/k2) V^2 exp(-k2/V)`.
pub fn fn_rhs(k1: f64, k2: f64) -> impl Fn(f64, f64) -> f64 {
    move |_t, v| -(k1 / k2) * v * v * (-k2 / v).exp()
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy * sxy / (sxx * syy)
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

