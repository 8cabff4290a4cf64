//! Curvature of smoothed corners: exact three-point values, closed-form bounds and
//! ε-selection against a curvature budget.
//!
//! A corner is described by its incoming and outgoing segment vectors `P̃₁`, `P̃₂`, with
//! the corner itself at parameter `t = 1`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kernel::Kernel;
use crate::mollify::{sample, MollifyError, SmoothingConfig};
use crate::polyline::{norm, Polyline};

/// ε reported when every corner is collinear and no bound constrains the choice.
pub const COLLINEAR_DEFAULT_EPS: f64 = 0.25;

/// Upper end of the ε range in which coincidence windows exist and corners do not interact.
pub const WINDOW_CLAMP_EPS: f64 = 0.499;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurvatureError {
    #[error("vectors have different dimensions ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("curvature undefined: zero speed")]
    ZeroSpeed,
    #[error("curvature bound unbounded: speed lower bound is zero")]
    Unbounded,
    #[error("segment {index} has zero length")]
    DegenerateSegment { index: usize },
    #[error("polyline has no interior corner")]
    NoCorners,
    #[error("curvature budget must be positive and finite, got {0}")]
    InvalidBudget(f64),
    #[error("invalid smoothing parameters: {0}")]
    Smoothing(#[from] MollifyError),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖a ∧ b‖ = sqrt(‖a‖²‖b‖² − ⟨a,b⟩²)`.
pub fn wedge_norm(a: &[f64], b: &[f64]) -> Result<f64, CurvatureError> {
    if a.len() != b.len() {
        return Err(CurvatureError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(wedge_unchecked(a, b))
}

fn wedge_unchecked(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 2 {
        return (a[0] * b[1] - a[1] * b[0]).abs();
    }
    // Sum of squared 2×2 minors equals ‖a‖²‖b‖² − ⟨a,b⟩² without the cancellation.
    let mut sum = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let m = a[i] * b[j] - a[j] * b[i];
            sum += m * m;
        }
    }
    sum.sqrt()
}

/// `‖d2 ∧ d1‖ / ‖d1‖³`.
pub fn curvature_from_derivatives(d1: &[f64], d2: &[f64]) -> Result<f64, CurvatureError> {
    let w = wedge_norm(d2, d1)?;
    let speed = norm(d1);
    if speed == 0.0 {
        return Err(CurvatureError::ZeroSpeed);
    }
    Ok(w / (speed * speed * speed))
}

/// Geometric constants of a corner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerGeometry {
    pub p_tilde_1: Vec<f64>,
    pub p_tilde_2: Vec<f64>,
    /// Minimizer of `‖sP̃₁ + (1−s)P̃₂‖` over ℝ.
    pub s_bar: f64,
    pub wedge_norm: f64,
    /// `‖s̄P̃₁ + (1−s̄)P̃₂‖`.
    pub denom: f64,
}

impl CornerGeometry {
    pub fn new(p_tilde_1: &[f64], p_tilde_2: &[f64]) -> Result<Self, CurvatureError> {
        if p_tilde_1.len() != p_tilde_2.len() {
            return Err(CurvatureError::DimensionMismatch {
                left: p_tilde_1.len(),
                right: p_tilde_2.len(),
            });
        }
        let diff: Vec<f64> = p_tilde_2
            .iter()
            .zip(p_tilde_1)
            .map(|(b, a)| b - a)
            .collect();
        let dd = dot(&diff, &diff);
        // Equal segments: every s gives the same norm.
        let s_bar = if dd > 0.0 {
            dot(&diff, p_tilde_2) / dd
        } else {
            0.5
        };
        let at_min: Vec<f64> = p_tilde_1
            .iter()
            .zip(p_tilde_2)
            .map(|(a, b)| s_bar * a + (1.0 - s_bar) * b)
            .collect();
        Ok(Self {
            p_tilde_1: p_tilde_1.to_vec(),
            p_tilde_2: p_tilde_2.to_vec(),
            s_bar,
            wedge_norm: wedge_unchecked(p_tilde_2, p_tilde_1),
            denom: norm(&at_min),
        })
    }

    /// Corner at interior waypoint `k` (1 ≤ k ≤ p−1). Zero-length adjacent segments are rejected.
    pub fn at_waypoint(pl: &Polyline, k: usize) -> Result<Self, CurvatureError> {
        if k == 0 || k >= pl.segment_count() {
            return Err(CurvatureError::NoCorners);
        }
        for index in [k - 1, k] {
            if norm(pl.segment(index)) == 0.0 {
                return Err(CurvatureError::DegenerateSegment { index });
            }
        }
        Self::new(pl.segment(k - 1), pl.segment(k))
    }

    pub fn is_collinear(&self) -> bool {
        self.wedge_norm == 0.0
    }

    /// `wedge / denom³`, the geometric factor shared by all bounds.
    fn factor(&self) -> Result<f64, CurvatureError> {
        if self.wedge_norm == 0.0 {
            return Ok(0.0);
        }
        if !(self.denom > 0.0) {
            return Err(CurvatureError::Unbounded);
        }
        Ok(self.wedge_norm / (self.denom * self.denom * self.denom))
    }

    /// First derivative of `G_ε^γ` for the three-point path built on this corner.
    pub fn velocity(&self, k: &Kernel, eps: f64, gamma: f64, t: f64) -> Vec<f64> {
        let tau = t - 1.0;
        let a2 = k.cdf(tau / eps);
        let a1 = 1.0 - a2;
        let shift = gamma * tau * k.scaled(eps, tau, 0);
        self.p_tilde_1
            .iter()
            .zip(&self.p_tilde_2)
            .map(|(p1, p2)| p1 * (a1 - shift) + p2 * (a2 + shift))
            .collect()
    }

    /// Scalar `c(t)` with `G_ε^γ″(t) = c(t)·(P̃₂ − P̃₁)` for the three-point path.
    pub fn acceleration_weight(&self, k: &Kernel, eps: f64, gamma: f64, t: f64) -> f64 {
        let tau = t - 1.0;
        (1.0 + gamma) * k.scaled(eps, tau, 0) + gamma * tau * k.scaled(eps, tau, 1)
    }
}

/// Exact curvature of `F̂_ε` at `t` for the three-point path built on `geom`.
pub fn exact_corner_curvature(
    geom: &CornerGeometry,
    k: &Kernel,
    eps: f64,
    t: f64,
) -> Result<f64, CurvatureError> {
    exact_corner_curvature_gamma(geom, k, eps, 1.0, t)
}

/// Exact curvature of `G_ε^γ` at `t`: `|c(t)|·‖P̃₂ ∧ P̃₁‖ / ‖G′(t)‖³`.
pub fn exact_corner_curvature_gamma(
    geom: &CornerGeometry,
    k: &Kernel,
    eps: f64,
    gamma: f64,
    t: f64,
) -> Result<f64, CurvatureError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(MollifyError::InvalidEpsilon(eps).into());
    }
    let v = geom.velocity(k, eps, gamma, t);
    let speed = norm(&v);
    if speed == 0.0 {
        return Err(CurvatureError::ZeroSpeed);
    }
    let c = geom.acceleration_weight(k, eps, gamma, t);
    Ok(c.abs() * geom.wedge_norm / (speed * speed * speed))
}

/// `‖φ′‖∞/ε² · wedge/denom³`. Zero for collinear corners.
pub fn bound_directional(
    geom: &CornerGeometry,
    k: &Kernel,
    eps: f64,
) -> Result<f64, CurvatureError> {
    Ok(k.sup_phi_prime() / (eps * eps) * geom.factor()?)
}

/// `(|γ|‖φ′‖∞/ε² + |1−γ|‖φ‖∞/ε) · wedge/denom³`.
pub fn bound_combined(
    geom: &CornerGeometry,
    k: &Kernel,
    eps: f64,
    gamma: f64,
) -> Result<f64, CurvatureError> {
    let factor = geom.factor()?;
    let (a, b) = bound_coefficients(k, gamma);
    Ok((a / (eps * eps) + b / eps) * factor)
}

fn bound_coefficients(k: &Kernel, gamma: f64) -> (f64, f64) {
    (
        gamma.abs() * k.sup_phi_prime(),
        (1.0 - gamma).abs() * k.sup_phi(),
    )
}

/// Reference bound for the conventional mollification, where the speed minimum is taken
/// over `s ∈ [0, 1]` only. Kept for comparison with [`bound_combined`] at `γ = 0`.
pub fn conventional_reference_bound(
    geom: &CornerGeometry,
    k: &Kernel,
    eps: f64,
) -> Result<f64, CurvatureError> {
    if geom.wedge_norm == 0.0 {
        return Ok(0.0);
    }
    let m = if (0.0..=1.0).contains(&geom.s_bar) {
        geom.denom.powi(-3)
    } else {
        norm(&geom.p_tilde_1)
            .powi(-3)
            .max(norm(&geom.p_tilde_2).powi(-3))
    };
    if !m.is_finite() {
        return Err(CurvatureError::Unbounded);
    }
    Ok(k.sup_phi() / eps * geom.wedge_norm * m)
}

/// Smallest ε with `bound_combined(geom, ε, γ) ≤ kappa_max`; zero for collinear corners.
pub fn corner_epsilon(
    geom: &CornerGeometry,
    k: &Kernel,
    kappa_max: f64,
    gamma: f64,
) -> Result<f64, CurvatureError> {
    let factor = geom.factor()?;
    if factor == 0.0 {
        return Ok(0.0);
    }
    let (a, b) = bound_coefficients(k, gamma);
    let (a, b) = (a * factor, b * factor);
    // a·x² + b·x = κ with x = 1/ε, positive root written for ε directly.
    Ok((b + (b * b + 4.0 * a * kappa_max).sqrt()) / (2.0 * kappa_max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerReport {
    /// Waypoint index of the corner.
    pub corner: usize,
    pub geometry: CornerGeometry,
    /// Bound evaluated at the selected ε.
    pub bound: f64,
    /// ε at which this corner's bound meets the budget.
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub per_corner: Vec<CornerReport>,
    pub selected_eps: f64,
    pub kappa_max: f64,
    pub gamma: f64,
    pub clamped: bool,
    /// Largest curvature sampled on `[0, p]` at `selected_eps`.
    pub sampled_max_kappa: f64,
    pub samples: usize,
    /// False when the sampled curvature exceeds the budget.
    pub feasible: bool,
    /// Smallest ε found by bisection whose sampled curvature stays within budget.
    pub refined_eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectOptions {
    pub samples_per_segment: usize,
    pub refine: bool,
    pub refine_iterations: usize,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            samples_per_segment: 500,
            refine: false,
            refine_iterations: 40,
        }
    }
}

pub fn select_epsilon(
    pl: &Polyline,
    k: &Kernel,
    kappa_max: f64,
    gamma: f64,
) -> Result<CurvatureReport, CurvatureError> {
    select_epsilon_with(pl, k, kappa_max, gamma, &SelectOptions::default())
}

pub fn select_epsilon_with(
    pl: &Polyline,
    k: &Kernel,
    kappa_max: f64,
    gamma: f64,
    opts: &SelectOptions,
) -> Result<CurvatureReport, CurvatureError> {
    if !(kappa_max > 0.0 && kappa_max.is_finite()) {
        return Err(CurvatureError::InvalidBudget(kappa_max));
    }
    if !gamma.is_finite() {
        return Err(MollifyError::InvalidGamma(gamma).into());
    }
    let p = pl.segment_count();
    if p < 2 {
        return Err(CurvatureError::NoCorners);
    }
    let corners: Vec<(usize, CornerGeometry, f64)> = (1..p)
        .into_par_iter()
        .map(|c| {
            let geom = CornerGeometry::at_waypoint(pl, c)?;
            let eps = corner_epsilon(&geom, k, kappa_max, gamma)?;
            Ok((c, geom, eps))
        })
        .collect::<Result<_, CurvatureError>>()?;

    let widest = corners.iter().map(|c| c.2).fold(0.0, f64::max);
    let (selected_eps, clamped) = if widest == 0.0 {
        (COLLINEAR_DEFAULT_EPS, false)
    } else if widest > WINDOW_CLAMP_EPS {
        (WINDOW_CLAMP_EPS, true)
    } else {
        (widest, false)
    };

    let per_corner = corners
        .into_iter()
        .map(|(corner, geometry, eps)| {
            let bound = bound_combined(&geometry, k, selected_eps, gamma)?;
            Ok(CornerReport {
                corner,
                geometry,
                bound,
                eps,
            })
        })
        .collect::<Result<Vec<_>, CurvatureError>>()?;

    let samples = opts.samples_per_segment.max(1) * p + 1;
    let sampled_max_kappa = sampled_max_curvature(pl, k, selected_eps, gamma, samples)?;
    let feasible = sampled_max_kappa <= kappa_max;

    let refined_eps = if opts.refine && feasible {
        Some(refine(
            pl,
            k,
            kappa_max,
            gamma,
            selected_eps,
            samples,
            opts.refine_iterations,
        )?)
    } else {
        None
    };

    Ok(CurvatureReport {
        per_corner,
        selected_eps,
        kappa_max,
        gamma,
        clamped,
        sampled_max_kappa,
        samples,
        feasible,
        refined_eps,
    })
}

/// Largest sampled curvature of `G_ε^γ` on `[0, p]`; zero-speed samples count as infinite.
pub fn sampled_max_curvature(
    pl: &Polyline,
    k: &Kernel,
    eps: f64,
    gamma: f64,
    samples: usize,
) -> Result<f64, CurvatureError> {
    let cfg = SmoothingConfig::combined(eps, gamma)?;
    let path = sample(pl, k, &cfg, 0.0, pl.end_parameter(), samples)?;
    Ok(path
        .curvature
        .iter()
        .map(|&c| if c.is_nan() { f64::INFINITY } else { c })
        .fold(0.0, f64::max))
}

fn refine(
    pl: &Polyline,
    k: &Kernel,
    kappa_max: f64,
    gamma: f64,
    feasible_eps: f64,
    samples: usize,
    iterations: usize,
) -> Result<f64, CurvatureError> {
    let mut hi = feasible_eps;
    let mut lo = feasible_eps * 1e-3;
    if sampled_max_curvature(pl, k, lo, gamma, samples)? <= kappa_max {
        return Ok(lo);
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if sampled_max_curvature(pl, k, mid, gamma, samples)? <= kappa_max {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollify::Mollifier;
    use std::sync::OnceLock;

    fn kernel() -> &'static Kernel {
        static K: OnceLock<Kernel> = OnceLock::new();
        K.get_or_init(|| Kernel::bump(1e-12).unwrap())
    }

    fn abs_corner() -> CornerGeometry {
        CornerGeometry::new(&[1.0, -1.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn wedge_examples() {
        assert_eq!(wedge_norm(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(wedge_norm(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(wedge_norm(&[1.0, -1.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert!((wedge_norm(&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            wedge_norm(&[1.0], &[1.0, 2.0]),
            Err(CurvatureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn curvature_examples() {
        assert_eq!(
            curvature_from_derivatives(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            1.0
        );
        // ‖(0,4) ∧ (2,0)‖ = 8 and ‖(2,0)‖³ = 8.
        assert_eq!(
            curvature_from_derivatives(&[2.0, 0.0], &[0.0, 4.0]).unwrap(),
            1.0
        );
        assert_eq!(
            curvature_from_derivatives(&[1.0, 2.0], &[2.0, 4.0]).unwrap(),
            0.0
        );
        assert_eq!(
            curvature_from_derivatives(&[0.0, 0.0], &[1.0, 0.0]),
            Err(CurvatureError::ZeroSpeed)
        );
    }

    #[test]
    fn abs_corner_geometry_and_bounds() {
        let g = abs_corner();
        assert_eq!(g.s_bar, 0.5);
        assert_eq!(g.denom, 1.0);
        assert_eq!(g.wedge_norm, 2.0);
        let k = kernel();
        let b = bound_directional(&g, k, 0.5).unwrap();
        assert!((b - 8.0 * k.sup_phi_prime()).abs() < 1e-12);
        assert!((b - 14.386).abs() < 1e-3);
        assert!((bound_directional(&g, k, 0.25).unwrap() - 4.0 * b).abs() < 1e-12);
        assert_eq!(bound_combined(&g, k, 0.5, 1.0).unwrap(), b);
        let b0 = bound_combined(&g, k, 0.5, 0.0).unwrap();
        assert!((b0 - 4.0 * k.sup_phi()).abs() < 1e-12);
        assert!((b0 - 3.314).abs() < 1e-3);
        let reference = conventional_reference_bound(&g, k, 0.5).unwrap();
        assert!((reference - b0).abs() < 1e-12);
    }

    #[test]
    fn collinear_corner_has_zero_bound() {
        let g = CornerGeometry::new(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert!(g.is_collinear());
        assert_eq!(bound_directional(&g, kernel(), 0.3).unwrap(), 0.0);
        assert_eq!(corner_epsilon(&g, kernel(), 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn exact_curvature_matches_closed_form_derivatives() {
        let k = kernel();
        let pl = Polyline::new(vec![vec![-1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let g = abs_corner();
        let m = Mollifier::new(&pl, k, 0.5).unwrap();
        for &t in &[0.6, 0.9, 1.0, 1.2, 1.45] {
            let exact = exact_corner_curvature(&g, k, 0.5, t).unwrap();
            let sampled =
                curvature_from_derivatives(&m.directional(t, 1), &m.directional(t, 2)).unwrap();
            assert!(
                (exact - sampled).abs() <= 1e-10 * sampled.max(1.0),
                "t={t}: {exact} vs {sampled}"
            );
        }
        let at_corner = exact_corner_curvature(&g, k, 0.5, 1.0).unwrap();
        assert!((at_corner - 2.0 * k.scaled(0.5, 0.0, 0) * 2.0).abs() < 1e-12);
        assert_eq!(exact_corner_curvature(&g, k, 0.5, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn sampled_abs_curvature_respects_bound() {
        let k = kernel();
        let pl = Polyline::new(vec![vec![-1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let s = sample(&pl, k, &SmoothingConfig::directional(0.5).unwrap(), 0.0, 2.0, 1001).unwrap();
        let bound = bound_directional(&abs_corner(), k, 0.5).unwrap();
        assert!(s.max_curvature() <= bound);
    }

    #[test]
    fn select_epsilon_on_abs_path() {
        let k = kernel();
        let pl = Polyline::new(vec![vec![-1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let budget = bound_directional(&abs_corner(), k, 0.4).unwrap();
        let r = select_epsilon(&pl, k, budget, 1.0).unwrap();
        assert!((r.selected_eps - 0.4).abs() < 1e-12);
        assert!(!r.clamped);
        assert!(r.feasible);
        assert!(r.per_corner[0].bound <= budget * (1.0 + 1e-12));
    }

    #[test]
    fn select_epsilon_edge_cases() {
        let k = kernel();
        let line = Polyline::new(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap();
        let r = select_epsilon(&line, k, 2.0, 1.0).unwrap();
        assert_eq!(r.selected_eps, COLLINEAR_DEFAULT_EPS);
        assert!(r.per_corner.iter().all(|c| c.bound == 0.0));
        let seg = Polyline::new(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(
            select_epsilon(&seg, k, 1.0, 1.0),
            Err(CurvatureError::NoCorners)
        );
        let degenerate =
            Polyline::new(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(
            select_epsilon(&degenerate, k, 1.0, 1.0),
            Err(CurvatureError::DegenerateSegment { index: 0 })
        );
        assert!(matches!(
            select_epsilon(&line, k, 0.0, 1.0),
            Err(CurvatureError::InvalidBudget(_))
        ));
    }

    #[test]
    fn sharp_corner_dominates_selection() {
        let k = kernel();
        let pl = Polyline::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![2.0, 0.1],
            vec![2.1, -0.9],
        ])
        .unwrap();
        let r = select_epsilon(&pl, k, 40.0, 1.0).unwrap();
        let sharp = r.per_corner.iter().map(|c| c.eps).fold(0.0, f64::max);
        assert_eq!(r.per_corner[1].eps, sharp);
        assert_eq!(r.selected_eps, sharp.min(WINDOW_CLAMP_EPS));
    }

    #[test]
    fn hairpin_with_tiny_budget_is_infeasible() {
        let k = kernel();
        let pl = Polyline::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.05]]).unwrap();
        let r = select_epsilon(&pl, k, 0.1, 1.0).unwrap();
        assert!(r.clamped);
        assert!(!r.feasible);
    }

    #[test]
    fn refinement_stays_within_budget() {
        let k = kernel();
        let pl = Polyline::new(vec![vec![-1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let opts = SelectOptions {
            samples_per_segment: 200,
            refine: true,
            refine_iterations: 20,
        };
        let r = select_epsilon_with(&pl, k, 10.0, 1.0, &opts).unwrap();
        let refined = r.refined_eps.unwrap();
        assert!(refined <= r.selected_eps);
        assert!(sampled_max_curvature(&pl, k, refined, 1.0, r.samples).unwrap() <= 10.0);
    }
}
