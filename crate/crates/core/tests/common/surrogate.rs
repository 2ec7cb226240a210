//! Second, independently written surrogate: a textbook Fritsch-Carlson PCHIP
//! evaluated in power form, and a rasterization-free grid objective.

/// Slopes: zero where adjacent secants disagree in sign, weighted harmonic
/// mean otherwise; shape-preserving non-centred three-point ends.
pub fn reference_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = (0..n - 1).map(|k| x[k + 1] - x[k]).collect();
    let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        return vec![del[0], del[0]];
    }
    for k in 1..n - 1 {
        let same_sign = (del[k - 1] > 0.0 && del[k] > 0.0) || (del[k - 1] < 0.0 && del[k] < 0.0);
        if same_sign {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    let end = |h1: f64, h2: f64, del1: f64, del2: f64| {
        let d = ((2.0 * h1 + h2) * del1 - h1 * del2) / (h1 + h2);
        if d.signum() != del1.signum() || d == 0.0 || del1 == 0.0 {
            0.0
        } else if del1.signum() != del2.signum() && d.abs() > (3.0 * del1).abs() {
            3.0 * del1
        } else {
            d
        }
    };
    d[0] = end(h[0], h[1], del[0], del[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

pub fn reference_pchip(x: &[f64], y: &[f64], q: f64) -> f64 {
    let d = reference_slopes(x, y);
    let mut k = 0;
    while k + 2 < x.len() && q >= x[k + 1] {
        k += 1;
    }
    let h = x[k + 1] - x[k];
    let del = (y[k + 1] - y[k]) / h;
    let c = (3.0 * del - 2.0 * d[k] - d[k + 1]) / h;
    let b = (d[k] - 2.0 * del + d[k + 1]) / (h * h);
    let s = q - x[k];
    y[k] + s * (d[k] + s * (c + s * b))
}

pub const KNOTS: [f64; 4] = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];

/// Growth factor `G0 (1 + alpha * sum |dP| / (3 dy))` with `dy = 1/3`.
pub fn amplification(p: [f64; 4], g0: f64, alpha: f64) -> f64 {
    let tv: f64 = (0..3).map(|k| (p[k + 1] - p[k]).abs()).sum();
    g0 * (1.0 + alpha * tv / (3.0 * (1.0 / 3.0)))
}

/// Interface positions at node-centred rows `j / (n - 1)`.
pub fn interface(p: [f64; 4], n: usize) -> Vec<f64> {
    let s: Vec<f64> = (0..n)
        .map(|j| reference_pchip(&KNOTS, &p, j as f64 / (n - 1) as f64))
        .collect();
    let mean = s.iter().sum::<f64>() / n as f64;
    let m = amplification(p, 2.0, 0.1);
    s.iter().map(|v| m * (v - mean)).collect()
}

/// Jet length the grid scan must report, computed by counting copper cells
/// per row instead of building the field: cell `i` (centre
/// `-1 + (i + 1/2) dx`) is copper iff its centre is at or left of the
/// interface, and the transition sits at the right edge of the last one.
pub fn grid_objective(p: [f64; 4], n: usize) -> f64 {
    let dx = 2.0 / n as f64;
    let edges: Vec<f64> = interface(p, n)
        .into_iter()
        .map(|x| {
            let copper = (0..n).filter(|&i| -1.0 + (i as f64 + 0.5) * dx <= x).count();
            -1.0 + copper as f64 * dx
        })
        .collect();
    let hi = edges.iter().cloned().fold(f64::MIN, f64::max);
    let lo = edges.iter().cloned().fold(f64::MAX, f64::min);
    hi - lo
}

/// Continuous jet length `M (max s - min s)` over the rows.
pub fn analytic_objective(p: [f64; 4], n: usize) -> f64 {
    let xf = interface(p, n);
    let hi = xf.iter().cloned().fold(f64::MIN, f64::max);
    let lo = xf.iter().cloned().fold(f64::MAX, f64::min);
    hi - lo
}

/// The 9-level lattice `{-0.25, -0.1875, ..., 0.25}` per coordinate.
pub fn lattice() -> Vec<f64> {
    (0..9).map(|i| -0.25 + 0.0625 * i as f64).collect()
}

/// Every lattice design attaining the maximum grid objective, and the value.
pub fn grid_argmax(n: usize) -> (Vec<[f64; 4]>, f64) {
    let levels = lattice();
    let mut best = f64::MIN;
    let mut arg = Vec::new();
    for &a in &levels {
        for &b in &levels {
            for &c in &levels {
                for &d in &levels {
                    let p = [a, b, c, d];
                    let v = grid_objective(p, n);
                    if v > best {
                        best = v;
                        arg = vec![p];
                    } else if v == best {
                        arg.push(p);
                    }
                }
            }
        }
    }
    (arg, best)
}
