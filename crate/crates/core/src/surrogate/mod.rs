//! Closed-form stand-in for a learned jet-formation surrogate.
//!
//! A four-point spline perturbation of a copper/air interface is amplified by
//! a slope-dependent growth factor and rasterized into a sharp two-density
//! field; the jet length is read back off the field by scanning each row for
//! its copper/air transition.
//!
//! ```text
//! s(y)        PCHIP through (y_k, P_k)
//! M(p)      = G0 * (1 + alpha * sum |P_{k+1} - P_k| / (3 * dy_knot))
//! x_final(y)= M(p) * (s(y) - mean_rows(s))
//! ```
//!
//! Rows are node-centred (`y_j = j / (ny - 1)`) so the knot values at both
//! ends are sampled exactly. A cell is copper when its centre lies at or left
//! of `x_final`.

pub mod pchip;
pub mod tools;

use serde::{Deserialize, Serialize};

pub use pchip::{pchip_interpolate, Pchip, PchipError};
pub use tools::surrogate_server;

use crate::design::Direction;

pub const RHO_CU: f64 = 8.93;
pub const RHO_AIR: f64 = 0.001;
pub const P_BOUND: f64 = 0.25;
pub const DEFAULT_RESOLUTION: usize = 128;
pub const MIN_RESOLUTION: usize = 64;
/// The field spans `x` in `[X_ORIGIN, X_ORIGIN + X_EXTENT]`.
pub const X_ORIGIN: f64 = -1.0;
pub const X_EXTENT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurrogateError {
    #[error("control value P{} = {value} outside [-{bound}, {bound}]", index + 1)]
    OutOfBounds { index: usize, value: f64, bound: f64 },
    #[error("expected {expected} control values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("resolution {0} below minimum {MIN_RESOLUTION}")]
    ResolutionTooLow(usize),
    #[error("row {row} has {transitions} copper/air transitions, expected 1")]
    NoInterface { row: usize, transitions: usize },
    #[error(transparent)]
    Spline(#[from] PchipError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineDesign {
    pub p: [f64; 4],
}

impl SplineDesign {
    pub fn new(p: [f64; 4]) -> Result<Self, SurrogateError> {
        let d = Self { p };
        d.check_bounds()?;
        Ok(d)
    }

    pub fn from_slice(v: &[f64]) -> Result<Self, SurrogateError> {
        let p: [f64; 4] = v.try_into().map_err(|_| SurrogateError::WrongLength {
            expected: 4,
            got: v.len(),
        })?;
        Self::new(p)
    }

    pub fn check_bounds(&self) -> Result<(), SurrogateError> {
        for (index, &value) in self.p.iter().enumerate() {
            if !(-P_BOUND..=P_BOUND).contains(&value) {
                return Err(SurrogateError::OutOfBounds {
                    index,
                    value,
                    bound: P_BOUND,
                });
            }
        }
        Ok(())
    }

    /// Sum of absolute jumps between consecutive control values.
    pub fn total_variation(&self) -> f64 {
        self.p.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthModel {
    pub g0: f64,
    pub alpha: f64,
}

impl Default for GrowthModel {
    fn default() -> Self {
        Self { g0: 2.0, alpha: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub knots: [f64; 4],
    pub model: GrowthModel,
    pub nx: usize,
    pub ny: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self::with_resolution(DEFAULT_RESOLUTION)
    }
}

impl SurrogateConfig {
    pub fn with_resolution(n: usize) -> Self {
        Self {
            knots: [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
            model: GrowthModel::default(),
            nx: n,
            ny: n,
        }
    }

    pub fn amplification(&self, d: &SplineDesign) -> f64 {
        let mut slope = 0.0;
        for k in 0..3 {
            slope += (d.p[k + 1] - d.p[k]).abs() / (3.0 * (self.knots[k + 1] - self.knots[k]));
        }
        self.model.g0 * (1.0 + self.model.alpha * slope)
    }

    pub fn row_y(&self, j: usize) -> f64 {
        let (y0, y1) = (self.knots[0], self.knots[3]);
        y0 + (y1 - y0) * j as f64 / (self.ny - 1) as f64
    }

    /// Interface position for every row.
    pub fn interface(&self, d: &SplineDesign) -> Result<Vec<f64>, SurrogateError> {
        d.check_bounds()?;
        if self.nx.min(self.ny) < MIN_RESOLUTION {
            return Err(SurrogateError::ResolutionTooLow(self.nx.min(self.ny)));
        }
        let spline = Pchip::new(&self.knots, &d.p)?;
        let s: Vec<f64> = (0..self.ny)
            .map(|j| spline.eval(self.row_y(j)))
            .collect::<Result<_, _>>()?;
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let m = self.amplification(d);
        Ok(s.into_iter().map(|v| m * (v - mean)).collect())
    }
}

/// Row-major sharp-interface density field; also the export format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x_origin: f64,
    pub data: Vec<f64>,
}

impl DensityField {
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.nx..(j + 1) * self.nx]
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        self.x_origin + (i as f64 + 0.5) * self.dx
    }

    /// x-coordinate of each row's copper/air transition.
    pub fn transitions(&self) -> Result<Vec<f64>, SurrogateError> {
        (0..self.ny)
            .map(|j| {
                let row = self.row(j);
                let is_cu = |v: f64| v == RHO_CU;
                let changes = row.windows(2).filter(|w| is_cu(w[0]) != is_cu(w[1])).count();
                let k = row.iter().take_while(|v| is_cu(**v)).count();
                if changes != 1 || k == 0 || k == self.nx {
                    return Err(SurrogateError::NoInterface {
                        row: j,
                        transitions: changes,
                    });
                }
                Ok(self.x_origin + k as f64 * self.dx)
            })
            .collect()
    }
}

pub fn predict_field(d: &SplineDesign, cfg: &SurrogateConfig) -> Result<DensityField, SurrogateError> {
    let xf = cfg.interface(d)?;
    let dx = X_EXTENT / cfg.nx as f64;
    let mut field = DensityField {
        nx: cfg.nx,
        ny: cfg.ny,
        dx,
        dy: (cfg.knots[3] - cfg.knots[0]) / (cfg.ny - 1) as f64,
        x_origin: X_ORIGIN,
        data: Vec::with_capacity(cfg.nx * cfg.ny),
    };
    for x in xf {
        for i in 0..cfg.nx {
            let c = X_ORIGIN + (i as f64 + 0.5) * dx;
            field.data.push(if c <= x { RHO_CU } else { RHO_AIR });
        }
    }
    Ok(field)
}

/// Spread of the interface transition across rows; 0 for a flat interface.
pub fn jet_length(field: &DensityField) -> Result<f64, SurrogateError> {
    let t = field.transitions()?;
    let max = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = t.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// The unrasterized interface spread `max x_final - min x_final`; a smooth
/// function of the design that the grid scan approximates to within one cell.
pub fn analytic_jet_length(d: &SplineDesign, cfg: &SurrogateConfig) -> Result<f64, SurrogateError> {
    let xf = cfg.interface(d)?;
    let max = xf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xf.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Jet length of the predicted field. `direction` is carried for the caller;
/// it never flips the sign here.
pub fn get_objective(d: &SplineDesign, _direction: Direction, cfg: &SurrogateConfig) -> Result<f64, SurrogateError> {
    jet_length(&predict_field(d, cfg)?)
}
