//! Independent quadrature oracle and executable property checks.
//!
//! Every check returns a [`CheckReport`] whose `worst_violation` is a signed margin:
//! positive or zero when the property holds with room to spare, negative when it is
//! violated. A report passes when `worst_violation ≥ −tolerance`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::curvature::{
    bound_combined, curvature_from_derivatives, exact_corner_curvature_gamma,
    sampled_max_curvature, select_epsilon, CornerGeometry, CurvatureError,
};
use crate::kernel::Kernel;
use crate::mollify::{chord_length, uniform_grid, Mollifier, MollifyError};
use crate::polyline::{norm, Polyline, PolylineError};
use crate::quadrature::{adaptive_simpson_vec, QuadratureError, SimpsonOptions};

/// Seed used by the random suites unless overridden.
pub const DEFAULT_SEED: u64 = 0x6d6f_6c6c;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("oracle failed: {0}")]
    Oracle(#[from] QuadratureError),
    #[error(transparent)]
    Mollify(#[from] MollifyError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Polyline(#[from] PolylineError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detail {
    pub point: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check_id: String,
    pub passed: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub evaluations: usize,
    /// The worst entry followed by every failing entry (capped).
    pub details: Vec<Detail>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports contain only finite or null numbers")
    }
}

const MAX_FAILING_DETAILS: usize = 20;

/// Accumulates margins. Entries with their own tolerance are rescaled to the report
/// tolerance so that `passed ⇔ worst ≥ −tolerance` holds entry by entry.
struct Tracker {
    id: String,
    tolerance: f64,
    worst: f64,
    worst_detail: Option<Detail>,
    failing: Vec<Detail>,
    evaluations: usize,
    note: Option<String>,
}

impl Tracker {
    fn new(id: impl Into<String>, tolerance: f64) -> Self {
        Self {
            id: id.into(),
            tolerance,
            worst: f64::INFINITY,
            worst_detail: None,
            failing: Vec::new(),
            evaluations: 0,
            note: None,
        }
    }

    fn record(
        &mut self,
        point: impl FnOnce() -> String,
        observed: f64,
        expected: f64,
        margin: f64,
        tolerance: f64,
    ) {
        self.evaluations += 1;
        let scaled = if margin.is_nan() {
            f64::NEG_INFINITY
        } else if tolerance == self.tolerance {
            margin
        } else {
            margin * (self.tolerance / tolerance)
        };
        let failing = !(scaled >= -self.tolerance);
        let new_worst = self.worst_detail.is_none() || scaled < self.worst;
        if !(failing || new_worst) {
            return;
        }
        let detail = Detail {
            point: point(),
            observed,
            expected,
            tolerance,
        };
        if failing && self.failing.len() < MAX_FAILING_DETAILS {
            self.failing.push(detail.clone());
        }
        if new_worst {
            self.worst = scaled;
            self.worst_detail = Some(detail);
        }
    }

    /// `|observed − expected| ≤ tolerance`.
    fn close(
        &mut self,
        point: impl FnOnce() -> String,
        observed: f64,
        expected: f64,
        tolerance: f64,
    ) {
        self.record(
            point,
            observed,
            expected,
            -(observed - expected).abs(),
            tolerance,
        );
    }

    /// `observed ≤ limit + tolerance`.
    fn at_most(
        &mut self,
        point: impl FnOnce() -> String,
        observed: f64,
        limit: f64,
        tolerance: f64,
    ) {
        self.record(point, observed, limit, limit - observed, tolerance);
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn finish(self) -> CheckReport {
        let worst = if self.worst.is_finite() {
            self.worst
        } else if self.worst == f64::NEG_INFINITY {
            f64::MIN
        } else {
            0.0
        };
        let mut details: Vec<Detail> = self.worst_detail.into_iter().collect();
        let rest: Vec<Detail> = self
            .failing
            .into_iter()
            .filter(|d| Some(d) != details.first())
            .collect();
        details.extend(rest);
        CheckReport {
            check_id: self.id,
            passed: worst >= -self.tolerance,
            worst_violation: worst,
            tolerance: self.tolerance,
            evaluations: self.evaluations,
            details,
            note: self.note,
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `G_ε^γ⁽ᵒʳᵈᵉʳ⁾(t)` by direct adaptive Simpson quadrature of both convolution integrals.
///
/// With `u` the kernel variable,
/// `F⁽ᵐ⁾(t) = ε^(−m) ∫ f̄(t−εu) φ⁽ᵐ⁾(u) du` and
/// `D⁽ᵐ⁾(t) = ε^(1−m) ∫ Df̄(t−εu) [m·φ⁽ᵐ⁻¹⁾(u) + u·φ⁽ᵐ⁾(u)] du`,
/// integrated piecewise between the breakpoints that fall inside `[−1, 1]`. Only kernel
/// point values are shared with the closed-form evaluator.
pub fn quadrature_oracle(
    pl: &Polyline,
    k: &Kernel,
    eps: f64,
    gamma: f64,
    t: f64,
    order: usize,
) -> Result<Vec<f64>, VerifyError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(MollifyError::InvalidEpsilon(eps).into());
    }
    if !t.is_finite() || !gamma.is_finite() {
        return Err(VerifyError::Precondition(format!(
            "t={t} and gamma={gamma} must be finite"
        )));
    }
    let n = pl.dimension();
    let p = pl.segment_count();
    // Interior breakpoints s = k map to u = (t − k)/ε; f̄ is affine between them.
    let mut cuts = vec![-1.0, 1.0];
    for b in 1..p {
        let u = (t - b as f64) / eps;
        if u > -1.0 && u < 1.0 {
            cuts.push(u);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces = (cuts.len() - 1) as f64;
    let m = order as i32;
    let f_scale = eps.powi(-m);
    let d_scale = eps.powi(1 - m);
    let opts = SimpsonOptions {
        tolerance: 1e-11 / (pieces * f_scale.max(gamma.abs() * d_scale).max(1.0)),
        max_depth: 50,
        min_depth: 5,
    };
    let mut acc_f = vec![0.0; n];
    let mut acc_d = vec![0.0; n];
    let mut line = vec![0.0; n];
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // Segment covering this piece, taken from its midpoint so endpoints never pick a neighbour.
        let seg = pl.segment_index(t - eps * 0.5 * (a + b));
        let slope = pl.segment(seg).to_vec();
        let origin = pl.waypoint(seg).to_vec();
        let integral = adaptive_simpson_vec(
            |u, out| {
                let s = t - eps * u;
                let phi_m = k.phi_deriv(u, order);
                let weight = if order == 0 {
                    u * phi_m
                } else {
                    order as f64 * k.phi_deriv(u, order - 1) + u * phi_m
                };
                for j in 0..n {
                    line[j] = origin[j] + slope[j] * (s - seg as f64);
                    out[j] = line[j] * phi_m;
                    out[n + j] = slope[j] * weight;
                }
            },
            2 * n,
            a,
            b,
            opts,
        )?;
        for j in 0..n {
            acc_f[j] += integral[j];
            acc_d[j] += integral[n + j];
        }
    }
    Ok((0..n)
        .map(|j| {
            let f = f_scale * acc_f[j];
            if gamma == 0.0 {
                f
            } else {
                f + gamma * d_scale * acc_d[j]
            }
        })
        .collect())
}

fn require_eps(eps: f64, upper: f64, what: &str) -> Result<(), VerifyError> {
    if eps > 0.0 && eps < upper {
        Ok(())
    } else {
        Err(VerifyError::Precondition(format!(
            "{what} needs 0 < eps < {upper}, got {eps}"
        )))
    }
}

/// `‖F̂_ε(k) − P_k‖ ≤ 1e−9` at every interior waypoint.
pub fn check_waypoint_preservation(
    pl: &Polyline,
    k: &Kernel,
    eps: f64,
) -> Result<CheckReport, VerifyError> {
    require_eps(eps, 1.0, "waypoint preservation")?;
    let m = Mollifier::new(pl, k, eps)?;
    let mut tr = Tracker::new(format!("waypoint_preservation[eps={eps}]"), 1e-9);
    for c in 1..pl.segment_count() {
        let v = m.directional(c as f64, 0);
        tr.at_most(|| format!("k={c}"), dist(&v, pl.waypoint(c)), 0.0, 1e-9);
    }
    Ok(tr.finish())
}

/// `‖G_ε^γ(t) − f(t)‖ ≤ 1e−9` on a 101-point grid over every `V_r = [r−1+ε, r−ε]`.
pub fn check_coincidence_windows(
    pl: &Polyline,
    k: &Kernel,
    eps: f64,
    gamma: f64,
) -> Result<CheckReport, VerifyError> {
    require_eps(eps, 0.5, "coincidence windows")?;
    let m = Mollifier::new(pl, k, eps)?;
    let mut tr = Tracker::new(
        format!("coincidence_windows[eps={eps},gamma={gamma}]"),
        1e-9,
    );
    for r in 0..pl.segment_count() {
        let (a, b) = (r as f64 + eps, (r + 1) as f64 - eps);
        for t in uniform_grid(a, b, 101) {
            let err = dist(&m.combined(t, 0, gamma), &pl.eval(t));
            tr.at_most(|| format!("segment={r},t={t}"), err, 0.0, 1e-9);
        }
    }
    Ok(tr.finish())
}

/// Continuity of value, slope and second derivative of the path that follows `G^γa`
/// before the midpoint of segment `r` and `G^γb` after it, by one-sided finite differences.
pub fn check_switching_smoothness(
    pl: &Polyline,
    k: &Kernel,
    eps: f64,
    gamma_a: f64,
    gamma_b: f64,
    r: usize,
) -> Result<CheckReport, VerifyError> {
    require_eps(eps, 0.5, "switching smoothness")?;
    if r >= pl.segment_count() {
        return Err(VerifyError::Precondition(format!(
            "segment {r} out of range"
        )));
    }
    let m = Mollifier::new(pl, k, eps)?;
    let switch = r as f64 + 0.5;
    let h = 1e-2_f64.min((1.0 - 2.0 * eps) / 8.0);
    let hybrid = |t: f64| {
        if t < switch {
            m.combined(t, 0, gamma_a)
        } else {
            m.combined(t, 0, gamma_b)
        }
    };
    let x: Vec<Vec<f64>> = (-3..=3).map(|i| hybrid(switch + i as f64 * h)).collect();
    let at = |i: i32| &x[(i + 3) as usize];
    let mut tr = Tracker::new(
        format!("switching_smoothness[eps={eps},gamma={gamma_a}->{gamma_b},segment={r}]"),
        1e-6,
    );
    for j in 0..pl.dimension() {
        let c = |i: i32| at(i)[j];
        let value_left = 2.0 * c(-1) - c(-2);
        tr.close(|| format!("value,coord={j}"), c(0), value_left, 1e-6);
        let d1_center = (c(1) - c(-1)) / (2.0 * h);
        let d1_left = (c(-1) - c(-2)) / h;
        let d1_right = (c(2) - c(1)) / h;
        tr.close(|| format!("d1_left,coord={j}"), d1_left, d1_center, 1e-6);
        tr.close(|| format!("d1_right,coord={j}"), d1_right, d1_center, 1e-6);
        let d2_center = (c(1) - 2.0 * c(0) + c(-1)) / (h * h);
        let d2_left = (c(-1) - 2.0 * c(-2) + c(-3)) / (h * h);
        let d2_right = (c(3) - 2.0 * c(2) + c(1)) / (h * h);
        tr.close(|| format!("d2_left,coord={j}"), d2_left, d2_center, 1e-6);
        tr.close(|| format!("d2_right,coord={j}"), d2_right, d2_center, 1e-6);
    }
    Ok(tr.finish())
}

/// Grid of at least `min_samples` points over `[0, p]` that contains every integer.
fn integer_aligned_grid(p: usize, min_samples: usize) -> Vec<f64> {
    let per_segment = (min_samples.saturating_sub(1)).div_ceil(p).max(1);
    uniform_grid(0.0, p as f64, per_segment * p + 1)
}

/// Chord lengths `(L(F_ε), L(F̂_ε))` over `[0, p]`.
pub fn sampled_lengths(
    pl: &Polyline,
    k: &Kernel,
    eps: f64,
    min_samples: usize,
) -> Result<(f64, f64), VerifyError> {
    let m = Mollifier::new(pl, k, eps)?;
    let grid = integer_aligned_grid(pl.segment_count(), min_samples);
    let (conv, dir): (Vec<Vec<f64>>, Vec<Vec<f64>>) = grid
        .iter()
        .map(|&t| {
            let n = pl.dimension();
            let (mut c, mut d) = (vec![0.0; n], vec![0.0; n]);
            m.terms_into(t, 0, &mut c, &mut d);
            let hat: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + b).collect();
            (c, hat)
        })
        .unzip();
    Ok((chord_length(&conv), chord_length(&dir)))
}

/// `L(F_ε) ≤ L(f) ≤ L(F̂_ε)` with chord lengths over 10⁴ samples and 1e−6 slack.
pub fn check_length_ordering(
    pl: &Polyline,
    k: &Kernel,
    eps: f64,
) -> Result<CheckReport, VerifyError> {
    require_eps(eps, 1.0, "length ordering")?;
    let (lc, ld) = sampled_lengths(pl, k, eps, 10_000)?;
    let lf = pl.length();
    let mut tr = Tracker::new(format!("length_ordering[eps={eps}]"), 1e-6);
    tr.at_most(|| "L(F) <= L(f)".into(), lc, lf, 1e-6);
    tr.at_most(|| "L(f) <= L(F_hat)".into(), lf, ld, 1e-6);
    Ok(tr.finish())
}

/// Closed convex hull of planar points, counter-clockwise, without collinear vertices.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0
            {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// Signed distance from `q` to a convex polygon: positive outside (lower bound on the true
/// distance), non-positive inside.
pub fn hull_excess(hull: &[[f64; 2]], q: [f64; 2]) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => dist(&hull[0], &q),
        2 => segment_distance(hull[0], hull[1], q),
        n => (0..n)
            .map(|i| {
                let a = hull[i];
                let b = hull[(i + 1) % n];
                let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                // Outward normal of a counter-clockwise edge is (ey, −ex).
                ((q[0] - a[0]) * ey - (q[1] - a[1]) * ex) / ex.hypot(ey)
            })
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

fn segment_distance(a: [f64; 2], b: [f64; 2], q: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (q[0] - a[0] - s * dx).hypot(q[1] - a[1] - s * dy)
}

fn planar(points: impl Iterator<Item = Vec<f64>>) -> Vec<[f64; 2]> {
    points.map(|p| [p[0], p[1]]).collect()
}

/// `(2 + cos 2t)(cos t, sin t)` sampled at `samples` points over `[0, 2π]`.
pub fn flower_polyline(samples: usize) -> Polyline {
    let waypoints = (0..samples)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / (samples - 1) as f64;
            let r = 2.0 + (2.0 * t).cos();
            vec![r * t.cos(), r * t.sin()]
        })
        .collect();
    Polyline::new(waypoints).expect("flower samples are finite and planar")
}

pub const FLOWER_SAMPLES: usize = 2000;

/// Converts a support radius given in the flower's `[0, 2π]` parametrization into the
/// polyline's unit-per-segment parametrization.
pub fn flower_eps(eps_curve: f64, pl: &Polyline) -> f64 {
    eps_curve * pl.segment_count() as f64 / (2.0 * PI)
}

struct FlowerMeasures {
    length_f: f64,
    length_hat: f64,
    /// Largest signed distance of a waypoint from co(F̂_ε).
    hull_excess: f64,
    outside: usize,
}

fn flower_measures(pl: &Polyline, k: &Kernel, eps: f64) -> Result<FlowerMeasures, VerifyError> {
    let m = Mollifier::new(pl, k, eps)?;
    let grid = integer_aligned_grid(pl.segment_count(), 4 * pl.segment_count() + 1);
    let hat: Vec<Vec<f64>> = grid.iter().map(|&t| m.directional(t, 0)).collect();
    let hull = convex_hull_2d(&planar(hat.iter().cloned()));
    let excess: Vec<f64> = pl
        .waypoints()
        .map(|w| hull_excess(&hull, [w[0], w[1]]))
        .collect();
    Ok(FlowerMeasures {
        length_f: pl.length(),
        length_hat: chord_length(&hat),
        hull_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        outside: excess.iter().filter(|&&e| e > 0.0).count(),
    })
}

/// Known failures of the conventional guarantees for `F̂_ε`, one report each:
///
/// * the flower curve `(2 + cos 2t)(cos t, sin t)` with ε = 5 in its own `[0, 2π]`
///   parameter has `L(F̂_ε) < L(f)` and waypoints outside `co(F̂_ε)`;
/// * the same curve with ε = 1.25 keeps both properties;
/// * the kink with slopes 1 and 30 at ε = 0.5 gives a non-monotone `F̂_ε`.
pub fn check_counterexamples(k: &Kernel) -> Result<Vec<CheckReport>, VerifyError> {
    let flower = flower_polyline(FLOWER_SAMPLES);
    let scaling = format!(
        "flower: {FLOWER_SAMPLES} samples over [0, 2pi], eps = eps_curve * {} / (2pi)",
        flower.segment_count()
    );

    let large = flower_measures(&flower, k, flower_eps(5.0, &flower))?;
    let mut tr = Tracker::new("counterexample_flower_eps5_violation", 0.0).note(format!(
        "{scaling}; L(f)={:.6}, L(F_hat)={:.6}, waypoints outside co(F_hat)={}",
        large.length_f, large.length_hat, large.outside
    ));
    tr.record(
        || "L(F_hat) < L(f)".into(),
        large.length_hat,
        large.length_f,
        large.length_f - large.length_hat,
        0.0,
    );
    tr.record(
        || "waypoint outside co(F_hat)".into(),
        large.hull_excess,
        0.0,
        large.hull_excess,
        0.0,
    );
    let flower_large = tr.finish();

    let small = flower_measures(&flower, k, flower_eps(1.25, &flower))?;
    let mut tr = Tracker::new("counterexample_flower_eps1.25_holds", 1e-9).note(format!(
        "{scaling}; L(f)={:.6}, L(F_hat)={:.6}, waypoints outside co(F_hat)={}",
        small.length_f, small.length_hat, small.outside
    ));
    tr.at_most(
        || "L(f) <= L(F_hat)".into(),
        small.length_f,
        small.length_hat,
        1e-9,
    );
    tr.at_most(|| "f inside co(F_hat)".into(), small.hull_excess, 0.0, 1e-9);
    let flower_small = tr.finish();

    let kink = Polyline::new(vec![vec![-1.0], vec![0.0], vec![30.0]])?;
    let m = Mollifier::new(&kink, k, 0.5)?;
    let grid = uniform_grid(0.0, 2.0, 2001);
    let values: Vec<f64> = grid.iter().map(|&t| m.directional(t, 0)[0]).collect();
    let (mut min_slope, mut at) = (f64::INFINITY, 0.0);
    for (w, t) in values.windows(2).zip(&grid) {
        let slope = (w[1] - w[0]) / (grid[1] - grid[0]);
        if slope < min_slope {
            min_slope = slope;
            at = *t;
        }
    }
    let mut tr = Tracker::new("counterexample_kink_non_monotone", 0.0)
        .note("f(x) = x for x < 0, 30x for x >= 0, waypoints at x = -1, 0, 1, eps = 0.5");
    tr.record(
        || format!("min finite-difference slope at t={at}"),
        min_slope,
        0.0,
        -min_slope,
        0.0,
    );
    let kink_report = tr.finish();

    Ok(vec![flower_large, flower_small, kink_report])
}

/// Corner identities for the scalar V-shape `(y₀, y₁, y₂)`: `D_ε′(1) = 0`,
/// `D_ε″(1) = φ_ε(0)(y₀+y₂−2y₁)`, and convexity (or concavity) of `F̂_ε` below (above)
/// `f` on a window around the corner.
pub fn check_corner_convexity(
    y: [f64; 3],
    k: &Kernel,
    eps: f64,
) -> Result<CheckReport, VerifyError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(MollifyError::InvalidEpsilon(eps).into());
    }
    let pl = Polyline::new(y.iter().map(|&v| vec![v]).collect())?;
    let m = Mollifier::new(&pl, k, eps)?;
    let jump = y[0] + y[2] - 2.0 * y[1];
    let mut tr = Tracker::new(format!("corner_convexity[y={y:?},eps={eps}]"), 1e-9);
    let d1 = m.directional_term(1.0, 1)[0];
    tr.close(|| "D'(1)".into(), d1, 0.0, 1e-9);
    let d2 = m.directional_term(1.0, 2)[0];
    let expected = k.scaled(eps, 0.0, 0) * jump;
    tr.close(|| "D''(1)".into(), d2, expected, 1e-8);

    let sign = if jump >= 0.0 { 1.0 } else { -1.0 };
    let f_hat = |t: f64| m.directional(t, 0)[0];
    // Shrink the window until second differences have the corner's sign throughout.
    let mut half_width = eps;
    let grid_points = 201;
    let window = loop {
        let grid = uniform_grid(1.0 - half_width, 1.0 + half_width, grid_points);
        let ok = grid
            .windows(3)
            .all(|w| sign * (f_hat(w[0]) - 2.0 * f_hat(w[1]) + f_hat(w[2])) >= -1e-9);
        if ok || half_width < eps / 1024.0 {
            break grid;
        }
        half_width *= 0.5;
    };
    let h = window[1] - window[0];
    for w in window.windows(3) {
        let second = sign * (f_hat(w[0]) - 2.0 * f_hat(w[1]) + f_hat(w[2]));
        tr.record(
            || format!("second difference at t={}", w[1]),
            second,
            0.0,
            second,
            1e-9,
        );
    }
    for &t in &window {
        let gap = sign * (pl.eval(t)[0] - f_hat(t));
        tr.record(|| format!("F_hat vs f at t={t}"), gap, 0.0, gap, 1e-9);
    }
    let mut report = tr.finish();
    report.note = Some(format!(
        "window half-width {}, grid spacing {h}",
        half_width
    ));
    Ok(report)
}

/// Builds the three-point path `0, P̃₁, P̃₁+P̃₂` of a corner.
pub fn three_point_path(geom: &CornerGeometry) -> Polyline {
    let n = geom.p_tilde_1.len();
    let p1 = geom.p_tilde_1.clone();
    let p2: Vec<f64> = p1.iter().zip(&geom.p_tilde_2).map(|(a, b)| a + b).collect();
    Polyline::new(vec![vec![0.0; n], p1, p2]).expect("corner vectors are finite")
}

/// On each corner's three-point path: sampled curvature of `G_ε^γ` stays below the
/// closed-form bound (relative slack 1e−6), and the exact corner formula agrees with the
/// derivative-based curvature within 1e−8 relative where the speed exceeds 1e−6.
pub fn check_curvature_bounds(
    corners: &[CornerGeometry],
    k: &Kernel,
    eps_values: &[f64],
    gammas: &[f64],
    samples: usize,
) -> Result<Vec<CheckReport>, VerifyError> {
    let mut bound_tr = Tracker::new("curvature_bound", 1e-6);
    let mut exact_tr = Tracker::new("curvature_exact_formula", 1e-8);
    for (ci, geom) in corners.iter().enumerate() {
        let pl = three_point_path(geom);
        for &eps in eps_values {
            let m = Mollifier::new(&pl, k, eps)?;
            for &gamma in gammas {
                let bound = bound_combined(geom, k, eps, gamma)?;
                let mut worst = 0.0_f64;
                for t in uniform_grid(1.0 - eps, 1.0 + eps, samples) {
                    let d1 = m.combined(t, 1, gamma);
                    let d2 = m.combined(t, 2, gamma);
                    let speed = norm(&d1);
                    let kappa = curvature_from_derivatives(&d1, &d2).unwrap_or(f64::INFINITY);
                    worst = worst.max(kappa);
                    if speed > 1e-6 {
                        let exact = exact_corner_curvature_gamma(geom, k, eps, gamma, t)?;
                        let scale = kappa.abs().max(exact.abs()).max(f64::MIN_POSITIVE);
                        exact_tr.record(
                            || format!("corner={ci},eps={eps},gamma={gamma},t={t}"),
                            exact,
                            kappa,
                            -(exact - kappa).abs() / scale,
                            1e-8,
                        );
                    }
                }
                bound_tr.record(
                    || format!("corner={ci},eps={eps},gamma={gamma}"),
                    worst,
                    bound,
                    if bound > 0.0 {
                        (bound - worst) / bound
                    } else {
                        -worst
                    },
                    1e-6,
                );
            }
        }
    }
    Ok(vec![bound_tr.finish(), exact_tr.finish()])
}

/// Sup over `t ∈ [0, p]` of `‖F̂_ε(t) − f(t)‖`: a uniform grid plus per-corner grids,
/// refined by golden-section search around the best sample.
pub fn sup_error(pl: &Polyline, k: &Kernel, eps: f64) -> Result<f64, VerifyError> {
    let m = Mollifier::new(pl, k, eps)?;
    let p = pl.segment_count();
    let err = |t: f64| dist(&m.directional(t, 0), &pl.eval(t));
    let mut grid = uniform_grid(0.0, p as f64, 501);
    let local = (eps).min(1.0);
    for c in 1..p {
        grid.extend(uniform_grid(c as f64 - local, c as f64 + local, 201));
    }
    grid.retain(|t| (0.0..=p as f64).contains(t));
    grid.sort_by(f64::total_cmp);
    let values: Vec<f64> = grid.iter().map(|&t| err(t)).collect();
    let mut best = values.iter().copied().fold(0.0, f64::max);
    for i in 0..grid.len() {
        let left = if i > 0 {
            values[i - 1]
        } else {
            f64::NEG_INFINITY
        };
        let right = if i + 1 < grid.len() {
            values[i + 1]
        } else {
            f64::NEG_INFINITY
        };
        if values[i] < left || values[i] < right {
            continue;
        }
        let lo = if i > 0 { grid[i - 1] } else { grid[i] };
        let hi = if i + 1 < grid.len() {
            grid[i + 1]
        } else {
            grid[i]
        };
        best = best.max(golden_max(&err, lo, hi));
    }
    Ok(best)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if b - a <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// For decreasing `eps_values`: sup error ≤ 2·(max segment length)·ε, and the error at
/// least halves from each ε to the next one when ε halves (1e−9 relative rounding slack).
pub fn check_convergence(
    pl: &Polyline,
    k: &Kernel,
    eps_values: &[f64],
) -> Result<CheckReport, VerifyError> {
    let lmax = pl.max_segment_length();
    let errors: Vec<f64> = eps_values
        .iter()
        .map(|&e| sup_error(pl, k, e))
        .collect::<Result<_, _>>()?;
    let mut tr = Tracker::new("convergence", 1e-9);
    for (&e, &err) in eps_values.iter().zip(&errors) {
        let limit = 2.0 * lmax * e;
        tr.record(
            || format!("sup error at eps={e}"),
            err,
            limit,
            (limit - err) / limit,
            1e-9,
        );
    }
    for (w, es) in errors.windows(2).zip(eps_values.windows(2)) {
        let limit = w[0] * (es[1] / es[0]);
        tr.record(
            || format!("error ratio eps={}->{}", es[0], es[1]),
            w[1],
            limit,
            (limit - w[1]) / limit.max(f64::MIN_POSITIVE),
            1e-9,
        );
    }
    let mut report = tr.finish();
    report.note = Some(format!(
        "sup errors: {}",
        errors
            .iter()
            .map(|e| format!("{e:.6e}"))
            .collect::<Vec<_>>()
            .join(", ")
    ));
    Ok(report)
}

/// For a convex scalar input: `F_ε ≥ f − 1e−10` and `F̂_ε ≤ f + 1e−10` on a dense grid.
pub fn check_order_relations(
    pl: &Polyline,
    k: &Kernel,
    eps: f64,
    samples: usize,
) -> Result<CheckReport, VerifyError> {
    if pl.dimension() != 1 {
        return Err(VerifyError::Precondition(
            "order relations need a scalar polyline".into(),
        ));
    }
    let convex = (1..pl.segment_count()).all(|c| pl.segment(c)[0] >= pl.segment(c - 1)[0]);
    if !convex {
        return Err(VerifyError::Precondition(
            "order relations need a convex polyline".into(),
        ));
    }
    let m = Mollifier::new(pl, k, eps)?;
    let mut tr = Tracker::new(format!("order_relations[eps={eps}]"), 1e-10);
    let (mut conv, mut dir) = (vec![0.0], vec![0.0]);
    for t in uniform_grid(0.0, pl.end_parameter(), samples) {
        m.terms_into(t, 0, &mut conv, &mut dir);
        let f = pl.eval(t)[0];
        let hat = conv[0] + dir[0];
        tr.at_most(|| format!("F >= f at t={t}"), f, conv[0], 1e-10);
        tr.at_most(|| format!("F_hat <= f at t={t}"), hat, f, 1e-10);
    }
    Ok(tr.finish())
}

/// Samples of `F_ε` on `[0, p]` lie in the convex hull of the (planar) waypoints.
pub fn check_hull_containment(
    pl: &Polyline,
    k: &Kernel,
    eps: f64,
    samples: usize,
) -> Result<CheckReport, VerifyError> {
    if pl.dimension() != 2 {
        return Err(VerifyError::Precondition(
            "hull containment is checked for planar polylines".into(),
        ));
    }
    let hull = convex_hull_2d(&planar(pl.waypoints().map(<[f64]>::to_vec)));
    let m = Mollifier::new(pl, k, eps)?;
    let mut tr = Tracker::new(format!("hull_containment[eps={eps}]"), 1e-9);
    for t in uniform_grid(0.0, pl.end_parameter(), samples) {
        let x = m.conventional(t, 0);
        tr.at_most(
            || format!("t={t}"),
            hull_excess(&hull, [x[0], x[1]]),
            0.0,
            1e-9,
        );
    }
    Ok(tr.finish())
}

/// Closed form versus [`quadrature_oracle`] on seeded random inputs, 1e−8 absolute.
pub fn check_oracle_equivalence(
    k: &Kernel,
    seed: u64,
    cases: usize,
) -> Result<CheckReport, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tr = Tracker::new(format!("oracle_equivalence[cases={cases}]"), 1e-8);
    for case in 0..cases {
        let p = rng.gen_range(1..=8);
        let n = rng.gen_range(1..=4);
        let pl = random_polyline(&mut rng, p, n);
        let eps = rng.gen_range(0.05..2.0);
        let gamma = rng.gen_range(-2.0..=2.0);
        let order = rng.gen_range(0..=2);
        let t = rng.gen_range(-1.0..p as f64 + 1.0);
        let closed = Mollifier::new(&pl, k, eps)?.combined(t, order, gamma);
        let oracle = quadrature_oracle(&pl, k, eps, gamma, t, order)?;
        tr.at_most(
            || format!("case={case},p={p},n={n},eps={eps},gamma={gamma},order={order},t={t}"),
            max_abs_diff(&closed, &oracle),
            0.0,
            1e-8,
        );
    }
    Ok(tr.finish())
}

/// Random polyline with `p` segments in ℝⁿ, coordinates in `[−2, 2]`, segments no
/// shorter than 0.05.
pub fn random_polyline(rng: &mut impl Rng, p: usize, n: usize) -> Polyline {
    let mut pts: Vec<Vec<f64>> = vec![(0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()];
    while pts.len() <= p {
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        if dist(&q, pts.last().expect("non-empty")) >= 0.05 {
            pts.push(q);
        }
    }
    Polyline::new(pts).expect("random coordinates are finite")
}

/// Random convex scalar polyline: sorted slopes integrated from a random start.
pub fn random_convex_scalar(rng: &mut impl Rng, p: usize) -> Polyline {
    let mut slopes: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
    slopes.sort_by(f64::total_cmp);
    let mut y = rng.gen_range(-1.0..1.0);
    let mut pts = vec![vec![y]];
    for s in slopes {
        y += s;
        pts.push(vec![y]);
    }
    Polyline::new(pts).expect("finite")
}

/// Random planar corner with both segments of length at least 0.1.
pub fn random_corner(rng: &mut impl Rng) -> CornerGeometry {
    loop {
        let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let b = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if norm(&a) >= 0.1 && norm(&b) >= 0.1 {
            if let Ok(g) = CornerGeometry::new(&a, &b) {
                if g.wedge_norm > 1e-6 {
                    return g;
                }
            }
        }
    }
}

/// Named example paths.
pub fn corpus() -> Vec<(&'static str, Polyline)> {
    let make = |pts: &[[f64; 2]]| {
        Polyline::new(pts.iter().map(|p| p.to_vec()).collect()).expect("valid corpus path")
    };
    vec![
        ("abs", make(&[[-1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])),
        ("three_point", make(&[[0.0, 0.0], [2.0, 1.0], [3.0, -1.0]])),
        (
            "six_point",
            make(&[
                [0.0, 0.0],
                [1.0, 1.0],
                [2.0, 0.5],
                [3.0, 1.5],
                [4.0, 0.0],
                [5.0, 1.0],
            ]),
        ),
        (
            "seven_point",
            make(&[
                [0.0, 0.0],
                [1.0, 0.0],
                [1.5, 1.0],
                [2.5, 1.0],
                [3.0, 0.0],
                [4.0, 0.5],
                [5.0, -0.5],
            ]),
        ),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Waypoints,
    Windows,
    Lengths,
    Curvature,
    Counterexamples,
    Convexity,
    Oracle,
    Convergence,
    Order,
}

impl Suite {
    pub const NAMES: [&'static str; 10] = [
        "all",
        "waypoints",
        "windows",
        "lengths",
        "curvature",
        "counterexamples",
        "convexity",
        "oracle",
        "convergence",
        "order",
    ];

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "all" => Suite::All,
            "waypoints" => Suite::Waypoints,
            "windows" => Suite::Windows,
            "lengths" => Suite::Lengths,
            "curvature" => Suite::Curvature,
            "counterexamples" => Suite::Counterexamples,
            "convexity" => Suite::Convexity,
            "oracle" => Suite::Oracle,
            "convergence" => Suite::Convergence,
            "order" => Suite::Order,
            _ => return None,
        })
    }

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

pub const SAMPLE_GAMMAS: [f64; 5] = [-1.0, 0.0, 0.5, 1.0, 2.0];

/// Runs a suite over the bundled corpus plus seeded random inputs.
pub fn run_suite(suite: Suite, k: &Kernel, seed: u64) -> Result<Vec<CheckReport>, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = corpus();
    let mut out = Vec::new();
    let tag = |mut r: CheckReport, name: &str| {
        r.check_id = format!("{name}/{}", r.check_id);
        r
    };
    if suite.includes(Suite::Waypoints) {
        for (name, pl) in &corpus {
            for eps in [0.1, 0.3, 0.5, 0.9] {
                out.push(tag(check_waypoint_preservation(pl, k, eps)?, name));
            }
        }
    }
    if suite.includes(Suite::Windows) {
        for (name, pl) in &corpus {
            for eps in [0.1, 0.25, 0.4] {
                for gamma in SAMPLE_GAMMAS {
                    out.push(tag(check_coincidence_windows(pl, k, eps, gamma)?, name));
                }
            }
            let r = pl.segment_count() / 2;
            for (ga, gb) in [(0.0, 1.0), (1.0, -1.0), (0.5, 0.5)] {
                out.push(tag(
                    check_switching_smoothness(pl, k, 0.4, ga, gb, r)?,
                    name,
                ));
            }
        }
    }
    if suite.includes(Suite::Lengths) {
        for (name, pl) in &corpus {
            for eps in [0.1, 0.25, 0.49] {
                out.push(tag(check_length_ordering(pl, k, eps)?, name));
            }
        }
        for i in 0..10 {
            let p = rng.gen_range(2..=6);
            let pl = random_polyline(&mut rng, p, 2);
            let eps = rng.gen_range(0.01..0.49);
            out.push(tag(
                check_length_ordering(&pl, k, eps)?,
                &format!("random{i}"),
            ));
        }
    }
    if suite.includes(Suite::Curvature) {
        let mut corners: Vec<CornerGeometry> = corpus
            .iter()
            .flat_map(|(_, pl)| (1..pl.segment_count()).map(|c| CornerGeometry::at_waypoint(pl, c)))
            .collect::<Result<_, _>>()?;
        corners.extend((0..20).map(|_| random_corner(&mut rng)));
        out.extend(check_curvature_bounds(
            &corners,
            k,
            &[0.1, 0.25, 0.5],
            &SAMPLE_GAMMAS,
            2001,
        )?);
        out.push(check_select_epsilon_abs(k)?);
    }
    if suite.includes(Suite::Counterexamples) {
        out.extend(check_counterexamples(k)?);
    }
    if suite.includes(Suite::Convexity) {
        for y in [[1.0, 0.0, 1.0], [0.0, 2.0, 1.0], [2.0, -1.0, 0.5]] {
            for eps in [0.25, 0.5] {
                out.push(check_corner_convexity(y, k, eps)?);
            }
        }
    }
    if suite.includes(Suite::Oracle) {
        out.push(check_oracle_equivalence(k, seed, 50)?);
    }
    if suite.includes(Suite::Convergence) {
        let pl = random_polyline(&mut rng, 5, 2);
        out.push(check_convergence(&pl, k, &[0.4, 0.2, 0.1, 0.05])?);
    }
    if suite.includes(Suite::Order) {
        for i in 0..5 {
            let p = rng.gen_range(2..=6);
            let pl = random_convex_scalar(&mut rng, p);
            for eps in [0.1, 0.3, 0.7] {
                out.push(tag(
                    check_order_relations(&pl, k, eps, 2001)?,
                    &format!("convex{i}"),
                ));
            }
        }
        for (name, pl) in &corpus {
            out.push(tag(check_hull_containment(pl, k, 0.49, 2001)?, name));
        }
    }
    Ok(out)
}

/// For the abs corner with the budget set to the directional bound at ε = 0.5: the selected
/// ε is within 1% of 0.5 and the sampled curvature respects the budget.
pub fn check_select_epsilon_abs(k: &Kernel) -> Result<CheckReport, VerifyError> {
    let pl = Polyline::new(vec![vec![-1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]])?;
    let geom = CornerGeometry::at_waypoint(&pl, 1)?;
    let budget = bound_combined(&geom, k, 0.5, 1.0)?;
    let report = select_epsilon(&pl, k, budget, 1.0)?;
    let sampled = sampled_max_curvature(&pl, k, report.selected_eps, 1.0, 2001)?;
    let mut tr = Tracker::new("select_epsilon_abs", 1e-2);
    tr.close(
        || "selected_eps relative to 0.5".into(),
        report.selected_eps / 0.5,
        1.0,
        1e-2,
    );
    tr.at_most(
        || "sampled max curvature".into(),
        sampled,
        budget,
        1e-2 * budget,
    );
    let mut r = tr.finish();
    r.note = Some(format!(
        "budget={budget}, selected_eps={}, clamped={}, sampled_max_kappa={sampled}",
        report.selected_eps, report.clamped
    ));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn kernel() -> &'static Kernel {
        static K: OnceLock<Kernel> = OnceLock::new();
        K.get_or_init(|| Kernel::bump(1e-12).unwrap())
    }

    #[test]
    fn oracle_on_affine_and_abs() {
        let k = kernel();
        let line = Polyline::new(vec![vec![0.0, 1.0], vec![1.0, 3.0], vec![2.0, 5.0]]).unwrap();
        for &t in &[-0.5, 0.3, 1.0, 2.7] {
            let v = quadrature_oracle(&line, k, 0.7, 1.0, t, 0).unwrap();
            assert!(max_abs_diff(&v, &line.eval(t)) < 1e-10);
        }
        let abs = &corpus()[0].1;
        let v = quadrature_oracle(abs, k, 0.5, 1.0, 1.0, 0).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-9), "{v:?}");
    }

    #[test]
    fn oracle_matches_closed_form_on_a_few_cases() {
        let r = check_oracle_equivalence(kernel(), 7, 20).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn tracker_semantics() {
        let mut tr = Tracker::new("x", 1e-9);
        tr.close(|| "a".into(), 1.0, 1.0 + 5e-10, 1e-9);
        tr.close(|| "b".into(), 1.0, 1.0 + 5e-9, 1e-8);
        let r = tr.finish();
        assert!(r.passed);
        assert!((r.worst_violation + 5e-10).abs() < 1e-15);
        let mut tr = Tracker::new("y", 1e-9);
        tr.at_most(|| "c".into(), 2.0, 1.0, 1e-9);
        let r = tr.finish();
        assert!(!r.passed);
        assert_eq!(r.details.len(), 1);
        assert!(r.to_json_line().contains("\"passed\":false"));
    }

    #[test]
    fn hull_basics() {
        let sq = convex_hull_2d(&[
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.5, 0.0],
        ]);
        assert_eq!(sq.len(), 4);
        assert!(hull_excess(&sq, [0.5, 0.5]) < 0.0);
        assert!((hull_excess(&sq, [2.0, 0.5]) - 1.0).abs() < 1e-15);
        assert_eq!(hull_excess(&sq, [1.0, 0.5]), 0.0);
    }

    #[test]
    fn preconditions_are_enforced() {
        let abs = &corpus()[0].1;
        assert!(matches!(
            check_coincidence_windows(abs, kernel(), 0.5, 1.0),
            Err(VerifyError::Precondition(_))
        ));
        assert!(matches!(
            check_waypoint_preservation(abs, kernel(), 1.0),
            Err(VerifyError::Precondition(_))
        ));
        assert!(matches!(
            check_order_relations(abs, kernel(), 0.3, 11),
            Err(VerifyError::Precondition(_))
        ));
    }

    #[test]
    fn corpus_waypoints_and_windows() {
        for (_, pl) in corpus() {
            assert!(
                check_waypoint_preservation(&pl, kernel(), 0.9)
                    .unwrap()
                    .passed
            );
            assert!(
                check_coincidence_windows(&pl, kernel(), 0.4, -1.0)
                    .unwrap()
                    .passed
            );
        }
    }

    #[test]
    fn single_segment_coincides_everywhere() {
        let pl = Polyline::new(vec![vec![0.0, 0.0], vec![1.0, 2.0]]).unwrap();
        let r = check_coincidence_windows(&pl, kernel(), 0.45, 2.0).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn convexity_examples() {
        let r = check_corner_convexity([1.0, 0.0, 1.0], kernel(), 0.5).unwrap();
        assert!(r.passed, "{r:?}");
        let d2 = Mollifier::new(
            &Polyline::new(vec![vec![1.0], vec![0.0], vec![1.0]]).unwrap(),
            kernel(),
            0.5,
        )
        .unwrap()
        .directional_term(1.0, 2)[0];
        assert!((d2 - 3.314).abs() < 1e-3);
        assert!(
            check_corner_convexity([-1.0, 0.0, -1.0], kernel(), 0.5)
                .unwrap()
                .passed
        );
    }
}
