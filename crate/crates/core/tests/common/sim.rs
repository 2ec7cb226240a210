//! Fine-grid reference for the mock solver's energy moments.

/// `(A, E)` by composite Simpson's rule on `n` (even) panels, written
/// independently of the solver's midpoint sum.
pub fn moments_simpson(a1: f64, a2: f64, a3: f64, a4: f64, n: usize) -> (f64, f64) {
    assert!(n % 2 == 0);
    let two_pi = 2.0 * std::f64::consts::PI;
    let e = |x: f64| {
        let v = 0.1 + a1 * (two_pi * a2 * x + a3).sin() + a4;
        if v < 0.0 {
            0.0
        } else {
            v
        }
    };
    let h = 1.0 / n as f64;
    let (mut sa, mut se) = (0.0, 0.0);
    for i in 0..=n {
        let x = i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        se += w * e(x);
        sa += w * e(x) * (two_pi * x).sin();
    }
    (sa * h / 3.0, se * h / 3.0)
}

/// QoI written out term by term from the tracer model.
pub fn qoi_reference(a: f64, e: f64) -> f64 {
    let x1 = 0.05 * a;
    let x2 = 0.05 * a + 0.8 * a * a;
    let x3 = x1;
    let v = -0.5 * e;
    let x_outer = (x1 + x3) / 2.0;
    let v_ave = (v + v + v) / 3.0;
    0.5 * 30.0 * (x2 - x_outer) * (x2 - x_outer) + 4.0 / (1.0 + v_ave.abs())
}
