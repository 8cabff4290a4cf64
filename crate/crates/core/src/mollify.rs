//! Closed-form evaluation of the smoothed paths.
//!
//! For the extended polyline `f̄` and `φ_ε` the kernel scaled to support `[-ε, ε]`:
//!
//! * conventional: `F_ε = f̄ * φ_ε`
//! * directional term: `D_ε = Df̄ * (id·φ_ε)`
//! * directional: `F̂_ε = F_ε + D_ε`
//! * combined family: `G_ε^γ = F_ε + γ·D_ε`
//!
//! Every convolution splits at the breakpoints inside the kernel window. On each piece
//! the polyline is affine, so the integrals reduce to differences of the kernel CDF `Φ`,
//! its first-moment primitive `M`, and point values of `φ_ε` and its derivatives.
//! Derivatives of `D_ε` follow `D_ε⁽ᵐ⁾ = m·(Df̄ * φ_ε⁽ᵐ⁻¹⁾) + Df̄ * (id·φ_ε⁽ᵐ⁾)`, with the
//! second convolution integrated by parts.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::curvature_from_derivatives;
use crate::kernel::Kernel;
use crate::polyline::Polyline;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MollifyError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("gamma must be finite, got {0}")]
    InvalidGamma(f64),
    #[error("sample grid needs t_start < t_end (finite) and at least 2 samples, got [{t_start}, {t_end}] with {count}")]
    InvalidGrid {
        t_start: f64,
        t_end: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Conventional,
    Directional,
    Combined,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Conventional => "conventional",
            Method::Directional => "directional",
            Method::Combined => "combined",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conventional" => Ok(Method::Conventional),
            "directional" => Ok(Method::Directional),
            "combined" => Ok(Method::Combined),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Smoothing parameters: support radius `eps`, family weight `gamma`, and method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub eps: f64,
    pub gamma: f64,
    pub method: Method,
}

impl SmoothingConfig {
    /// `gamma` is ignored for the conventional method and forced to 1 for the
    /// directional one.
    pub fn new(method: Method, eps: f64, gamma: f64) -> Result<Self, MollifyError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(MollifyError::InvalidEpsilon(eps));
        }
        let gamma = match method {
            Method::Conventional => 0.0,
            Method::Directional => 1.0,
            Method::Combined if gamma.is_finite() => gamma,
            Method::Combined => return Err(MollifyError::InvalidGamma(gamma)),
        };
        Ok(Self { eps, gamma, method })
    }

    pub fn conventional(eps: f64) -> Result<Self, MollifyError> {
        Self::new(Method::Conventional, eps, 0.0)
    }

    pub fn directional(eps: f64) -> Result<Self, MollifyError> {
        Self::new(Method::Directional, eps, 1.0)
    }

    pub fn combined(eps: f64, gamma: f64) -> Result<Self, MollifyError> {
        Self::new(Method::Combined, eps, gamma)
    }

    /// Weight applied to `D_ε`.
    pub fn effective_gamma(&self) -> f64 {
        match self.method {
            Method::Conventional => 0.0,
            Method::Directional => 1.0,
            Method::Combined => self.gamma,
        }
    }
}

/// Closed-form evaluator bound to one polyline, kernel and `ε`.
#[derive(Debug, Clone, Copy)]
pub struct Mollifier<'a> {
    polyline: &'a Polyline,
    kernel: &'a Kernel,
    eps: f64,
}

impl<'a> Mollifier<'a> {
    pub fn new(polyline: &'a Polyline, kernel: &'a Kernel, eps: f64) -> Result<Self, MollifyError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(MollifyError::InvalidEpsilon(eps));
        }
        Ok(Self {
            polyline,
            kernel,
            eps,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn polyline(&self) -> &'a Polyline {
        self.polyline
    }

    pub fn kernel(&self) -> &'a Kernel {
        self.kernel
    }

    /// Writes `F_ε⁽ᵒʳᵈᵉʳ⁾(t)` into `conv` and `D_ε⁽ᵒʳᵈᵉʳ⁾(t)` into `dir`.
    pub fn terms_into(&self, t: f64, order: usize, conv: &mut [f64], dir: &mut [f64]) {
        conv.fill(0.0);
        dir.fill(0.0);
        let pl = self.polyline;
        let k = self.kernel;
        let eps = self.eps;
        let p = pl.segment_count();
        let first = pl.segment_index(t - eps);
        let last = pl.segment_index(t + eps);
        let mut line = vec![0.0; pl.dimension()];
        for i in first..=last {
            let a = if i == 0 { f64::NEG_INFINITY } else { i as f64 };
            let b = if i + 1 == p {
                f64::INFINITY
            } else {
                (i + 1) as f64
            };
            // τ = t − s ranges over (t − b, t − a), clipped to the kernel support.
            let lo = (t - b).clamp(-eps, eps);
            let hi = (t - a).clamp(-eps, eps);
            if !(hi > lo) {
                continue;
            }
            let slope = pl.segment(i);
            match order {
                0 => {
                    let mass = k.cdf(hi / eps) - k.cdf(lo / eps);
                    let first_moment = eps * (k.moment(hi / eps) - k.moment(lo / eps));
                    pl.segment_line(i, t, &mut line);
                    for j in 0..slope.len() {
                        conv[j] += line[j] * mass - slope[j] * first_moment;
                        dir[j] += slope[j] * first_moment;
                    }
                }
                1 => {
                    let mass = k.cdf(hi / eps) - k.cdf(lo / eps);
                    let boundary = hi * k.scaled(eps, hi, 0) - lo * k.scaled(eps, lo, 0);
                    for j in 0..slope.len() {
                        conv[j] += slope[j] * mass;
                        dir[j] += slope[j] * boundary;
                    }
                }
                m => {
                    let c = k.scaled(eps, hi, m - 2) - k.scaled(eps, lo, m - 2);
                    let w = (m - 1) as f64;
                    let at =
                        |tau: f64| w * k.scaled(eps, tau, m - 2) + tau * k.scaled(eps, tau, m - 1);
                    let d = at(hi) - at(lo);
                    for j in 0..slope.len() {
                        conv[j] += slope[j] * c;
                        dir[j] += slope[j] * d;
                    }
                }
            }
        }
    }

    pub fn conventional(&self, t: f64, order: usize) -> Vec<f64> {
        self.combined(t, order, 0.0)
    }

    pub fn directional_term(&self, t: f64, order: usize) -> Vec<f64> {
        let n = self.polyline.dimension();
        let (mut conv, mut dir) = (vec![0.0; n], vec![0.0; n]);
        self.terms_into(t, order, &mut conv, &mut dir);
        dir
    }

    pub fn directional(&self, t: f64, order: usize) -> Vec<f64> {
        self.combined(t, order, 1.0)
    }

    /// `F_ε⁽ᵒʳᵈᵉʳ⁾(t) + γ·D_ε⁽ᵒʳᵈᵉʳ⁾(t)`. At `γ = 0` the result is bit-identical to the
    /// conventional value.
    pub fn combined(&self, t: f64, order: usize, gamma: f64) -> Vec<f64> {
        let n = self.polyline.dimension();
        let (mut conv, mut dir) = (vec![0.0; n], vec![0.0; n]);
        self.terms_into(t, order, &mut conv, &mut dir);
        if gamma != 0.0 {
            for (c, d) in conv.iter_mut().zip(&dir) {
                *c += gamma * d;
            }
        }
        conv
    }
}

fn evaluator<'a>(pl: &'a Polyline, k: &'a Kernel, eps: f64) -> Mollifier<'a> {
    Mollifier::new(pl, k, eps).unwrap_or_else(|e| panic!("{e}"))
}

/// `F_ε⁽ᵒʳᵈᵉʳ⁾(t)`.
///
/// # Panics
/// If `eps` is not positive and finite.
pub fn conventional_eval(pl: &Polyline, k: &Kernel, eps: f64, t: f64, order: usize) -> Vec<f64> {
    evaluator(pl, k, eps).conventional(t, order)
}

/// `D_ε⁽ᵒʳᵈᵉʳ⁾(t)`. Panics like [`conventional_eval`].
pub fn directional_term_eval(
    pl: &Polyline,
    k: &Kernel,
    eps: f64,
    t: f64,
    order: usize,
) -> Vec<f64> {
    evaluator(pl, k, eps).directional_term(t, order)
}

/// `F̂_ε⁽ᵒʳᵈᵉʳ⁾(t)`. Panics like [`conventional_eval`].
pub fn directional_eval(pl: &Polyline, k: &Kernel, eps: f64, t: f64, order: usize) -> Vec<f64> {
    evaluator(pl, k, eps).directional(t, order)
}

/// `G_ε^γ⁽ᵒʳᵈᵉʳ⁾(t)` for the method and weight in `cfg`.
pub fn combined_eval(
    pl: &Polyline,
    k: &Kernel,
    cfg: &SmoothingConfig,
    t: f64,
    order: usize,
) -> Vec<f64> {
    evaluator(pl, k, cfg.eps).combined(t, order, cfg.effective_gamma())
}

/// Smoothed path sampled on a uniform parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledPath {
    pub parameters: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<f64>>,
    /// NaN where the first derivative vanishes.
    pub curvature: Vec<f64>,
}

impl SampledPath {
    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    /// Sum of chord lengths between consecutive positions.
    pub fn chord_length(&self) -> f64 {
        chord_length(&self.positions)
    }

    /// Largest finite curvature sample.
    pub fn max_curvature(&self) -> f64 {
        self.curvature
            .iter()
            .copied()
            .filter(|k| k.is_finite())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn chord_length(points: &[Vec<f64>]) -> f64 {
    points
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Uniform grid `t_j = t_start + (t_end − t_start)·j/(count−1)`; the last point is `t_end` exactly.
pub fn uniform_grid(t_start: f64, t_end: f64, count: usize) -> Vec<f64> {
    let span = t_end - t_start;
    let last = count - 1;
    (0..count)
        .map(|j| {
            if j == last {
                t_end
            } else {
                t_start + span * j as f64 / last as f64
            }
        })
        .collect()
}

pub fn sample(
    pl: &Polyline,
    k: &Kernel,
    cfg: &SmoothingConfig,
    t_start: f64,
    t_end: f64,
    count: usize,
) -> Result<SampledPath, MollifyError> {
    if count < 2 || !(t_start < t_end) || !t_start.is_finite() || !t_end.is_finite() {
        return Err(MollifyError::InvalidGrid {
            t_start,
            t_end,
            count,
        });
    }
    let m = Mollifier::new(pl, k, cfg.eps)?;
    let gamma = cfg.effective_gamma();
    let parameters = uniform_grid(t_start, t_end, count);
    type Row = (Vec<f64>, Vec<f64>, Vec<f64>, f64);
    let rows: Vec<Row> = parameters
        .par_iter()
        .map(|&t| {
            let x = m.combined(t, 0, gamma);
            let d1 = m.combined(t, 1, gamma);
            let d2 = m.combined(t, 2, gamma);
            let kappa = curvature_from_derivatives(&d1, &d2).unwrap_or(f64::NAN);
            (x, d1, d2, kappa)
        })
        .collect();
    let mut out = SampledPath {
        parameters,
        positions: Vec::with_capacity(count),
        d1: Vec::with_capacity(count),
        d2: Vec::with_capacity(count),
        curvature: Vec::with_capacity(count),
    };
    for (x, d1, d2, kappa) in rows {
        out.positions.push(x);
        out.d1.push(d1);
        out.d2.push(d2);
        out.curvature.push(kappa);
    }
    Ok(out)
}
