//! Shape-preserving piecewise cubic Hermite interpolation.
//!
//! Interior slopes use the weighted harmonic mean of adjacent secants (zero
//! at sign changes); end slopes use the three-point formula, clipped so the
//! interpolant never overshoots the first or last interval.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PchipError {
    #[error("need at least two knots with matching values, got {knots} knots and {values} values")]
    BadShape { knots: usize, values: usize },
    #[error("knots must be strictly increasing (knot {index})")]
    NonMonotoneKnots { index: usize },
    #[error("query {query} outside [{lo}, {hi}]")]
    QueryOutOfRange { query: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if sign(d) != sign(m0) {
        0.0
    } else if sign(m0) != sign(m1) && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self, PchipError> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(PchipError::BadShape {
                knots: n,
                values: y.len(),
            });
        }
        if let Some(i) = (1..n).find(|&i| !(x[i] > x[i - 1])) {
            return Err(PchipError::NonMonotoneKnots { index: i });
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if m[k - 1] * m[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        })
    }

    pub fn slopes(&self) -> &[f64] {
        &self.d
    }

    pub fn eval(&self, q: f64) -> Result<f64, PchipError> {
        let (lo, hi) = (self.x[0], self.x[self.x.len() - 1]);
        if !(lo..=hi).contains(&q) {
            return Err(PchipError::QueryOutOfRange { query: q, lo, hi });
        }
        let k = match self.x.partition_point(|&v| v <= q) {
            0 => 0,
            i => (i - 1).min(self.x.len() - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let t = (q - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        // h00 = 1 - h01, folded in so flat intervals return y[k] exactly.
        Ok(self.y[k] + h01 * (self.y[k + 1] - self.y[k]) + h * (h10 * self.d[k] + h11 * self.d[k + 1]))
    }
}

pub fn pchip_interpolate(knots: &[f64], values: &[f64], query: f64) -> Result<f64, PchipError> {
    Pchip::new(knots, values)?.eval(query)
}
