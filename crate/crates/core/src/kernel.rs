//! The mollifier kernel: a smooth, even, compactly supported bump on `[-1, 1]`.
//!
//! [`Kernel`] wraps a [`KernelProfile`] (the unnormalized shape and its analytic
//! derivatives) and precomputes everything the closed-form path evaluation needs:
//! the normalization constant, lookup tables for the CDF `Φ(x) = ∫₋₁ˣ φ` and the first
//! moment primitive `M(x) = ∫₋₁ˣ u·φ(u) du`, and the sup-norms `‖φ‖∞`, `‖φ′‖∞`.
//!
//! Only even, nonnegative profiles supported on `[-1, 1]` are accepted.

use std::fmt;

use thiserror::Error;

use crate::quadrature::GaussLegendre;

/// Points with `|x|` above this are treated as outside the support.
pub const SUPPORT_EDGE: f64 = 1.0 - 1e-12;

const GL_ORDER: usize = 12;
const INITIAL_TABLE_INTERVALS: usize = 256;
const MAX_TABLE_INTERVALS: usize = 1 << 18;
const SUP_SCAN_POINTS: usize = 4001;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("kernel tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("kernel profile `{0}` is not even")]
    NotEven(String),
    #[error("kernel profile `{name}` is negative at x = {x}")]
    Negative { name: String, x: f64 },
    #[error(
        "kernel profile `{name}` does not vanish outside [-1, 1] (value {value:e} at x = {x})"
    )]
    SupportViolation { name: String, x: f64, value: f64 },
    #[error("kernel profile `{0}` has zero or non-finite integral")]
    Degenerate(String),
    #[error("kernel quadrature did not reach tolerance {tolerance:e} within {limit} intervals")]
    Quadrature { tolerance: f64, limit: usize },
}

/// The unnormalized shape of a mollifier on `[-1, 1]`.
pub trait KernelProfile: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// `order`-th derivative of the unnormalized profile. Must return exactly zero
    /// outside `(-1, 1)`.
    fn derivative(&self, x: f64, order: usize) -> f64;

    fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// Declared symmetry. Checked numerically at construction as well.
    fn is_even(&self) -> bool;
}

/// `exp(-1/(1-x²))` on `(-1, 1)`, zero elsewhere.
///
/// Derivatives use `dᵐ/dxᵐ exp(-1/(1-x²)) = exp(-1/(1-x²))·Pₘ(x)/(1-x²)^{2m}` with the
/// polynomial recurrence `Pₘ₊₁ = Pₘ′(1-x²)² + 4m·x·Pₘ(1-x²) - 2x·Pₘ`.
#[derive(Debug, Clone)]
pub struct BumpProfile {
    polys: Vec<Vec<f64>>,
}

const BUMP_CACHED_ORDERS: usize = 8;

impl BumpProfile {
    pub fn new() -> Self {
        let mut polys = vec![vec![1.0]];
        for m in 0..BUMP_CACHED_ORDERS {
            let next = bump_next_poly(&polys[m], m);
            polys.push(next);
        }
        Self { polys }
    }

    fn poly(&self, order: usize) -> std::borrow::Cow<'_, [f64]> {
        if let Some(p) = self.polys.get(order) {
            return std::borrow::Cow::Borrowed(p);
        }
        let mut p = self.polys.last().cloned().unwrap_or_else(|| vec![1.0]);
        for m in self.polys.len() - 1..order {
            p = bump_next_poly(&p, m);
        }
        std::borrow::Cow::Owned(p)
    }
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self::new()
    }
}

impl KernelProfile for BumpProfile {
    fn name(&self) -> &str {
        "bump"
    }

    fn derivative(&self, x: f64, order: usize) -> f64 {
        if !(x.abs() <= SUPPORT_EDGE) {
            return 0.0;
        }
        let q = 1.0 - x * x;
        let e = (-1.0 / q).exp();
        match order {
            0 => e,
            1 => e * (-2.0 * x) / (q * q),
            2 => e * (6.0 * x.powi(4) - 2.0) / q.powi(4),
            _ => {
                let p = self.poly(order);
                e * horner(&p, x) / q.powi(2 * order as i32)
            }
        }
    }

    fn is_even(&self) -> bool {
        true
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

// Polynomials are stored with ascending coefficients.
fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, &c) in b.iter().enumerate() {
        out[i] += c;
    }
    out
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_deriv(a: &[f64]) -> Vec<f64> {
    if a.len() <= 1 {
        return vec![0.0];
    }
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| i as f64 * c)
        .collect()
}

fn bump_next_poly(p: &[f64], m: usize) -> Vec<f64> {
    let one_minus_x2 = [1.0, 0.0, -1.0];
    let sq = poly_mul(&one_minus_x2, &one_minus_x2);
    let a = poly_mul(&poly_deriv(p), &sq);
    let b = poly_mul(&poly_mul(&[0.0, 4.0 * m as f64], p), &one_minus_x2);
    let c = poly_mul(&[0.0, -2.0], p);
    let mut out = poly_add(&poly_add(&a, &b), &c);
    while out.len() > 1 && out.last() == Some(&0.0) {
        out.pop();
    }
    out
}

/// Piecewise cubic Hermite table on a uniform grid over `[-1, 1]`.
#[derive(Debug, Clone)]
struct HermiteTable {
    h: f64,
    values: Vec<f64>,
    // Slopes per interval (left end, right end); they may differ from the node
    // derivative where the monotonicity limiter kicked in.
    slopes: Vec<(f64, f64)>,
}

impl HermiteTable {
    fn intervals(&self) -> usize {
        self.slopes.len()
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.intervals();
        if x <= -1.0 {
            return self.values[0];
        }
        if x >= 1.0 {
            return self.values[n];
        }
        let pos = (x + 1.0) / self.h;
        let i = (pos.floor() as usize).min(n - 1);
        let s = pos - i as f64;
        if s == 0.0 {
            return self.values[i];
        }
        let (m0, m1) = self.slopes[i];
        let y0 = self.values[i];
        let y1 = self.values[i + 1];
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * y0 + h10 * self.h * m0 + h01 * y1 + h11 * self.h * m1
    }
}

/// A normalized mollifier with precomputed primitives. Immutable after construction.
#[derive(Debug)]
pub struct Kernel {
    profile: Box<dyn KernelProfile>,
    normalization: f64,
    cdf_table: HermiteTable,
    moment_table: HermiteTable,
    sup_phi: f64,
    sup_phi_prime: f64,
    quadrature_tolerance: f64,
}

impl Kernel {
    /// The standard bump `c₁·exp(-1/(1-x²))`.
    pub fn bump(tolerance: f64) -> Result<Self, KernelError> {
        Self::with_profile(Box::new(BumpProfile::new()), tolerance)
    }

    pub fn with_profile(
        profile: Box<dyn KernelProfile>,
        tolerance: f64,
    ) -> Result<Self, KernelError> {
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(KernelError::InvalidTolerance(tolerance));
        }
        validate_profile(profile.as_ref())?;
        let gl = GaussLegendre::new(GL_ORDER);
        let integral = integrate_profile(profile.as_ref(), &gl, tolerance)?;
        if !(integral > 0.0 && integral.is_finite()) {
            return Err(KernelError::Degenerate(profile.name().to_string()));
        }
        let normalization = 1.0 / integral;
        let (cdf_table, moment_table) =
            build_tables(profile.as_ref(), normalization, &gl, tolerance)?;
        let sup_phi = normalization * sup_abs(|x| profile.derivative(x, 0));
        let sup_phi_prime = normalization * sup_abs(|x| profile.derivative(x, 1));
        Ok(Self {
            profile,
            normalization,
            cdf_table,
            moment_table,
            sup_phi,
            sup_phi_prime,
            quadrature_tolerance: tolerance,
        })
    }

    pub fn name(&self) -> &str {
        self.profile.name()
    }

    /// The constant `c` with `∫ c·profile = 1`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn tolerance(&self) -> f64 {
        self.quadrature_tolerance
    }

    pub fn support_radius(&self) -> f64 {
        1.0
    }

    /// Always true: construction rejects profiles that are not even.
    pub fn is_even(&self) -> bool {
        true
    }

    /// Number of table intervals chosen to meet the tolerance.
    pub fn table_intervals(&self) -> usize {
        self.cdf_table.intervals()
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.normalization * self.profile.derivative(x, 0)
    }

    /// `φ⁽ᵒʳᵈᵉʳ⁾(x)`, analytic. Order 0 is `φ` itself.
    pub fn phi_deriv(&self, x: f64, order: usize) -> f64 {
        self.normalization * self.profile.derivative(x, order)
    }

    /// `φ_ε⁽ʳ⁾(x) = ε^(−1−r)·φ⁽ʳ⁾(x/ε)`.
    pub fn scaled(&self, eps: f64, x: f64, order: usize) -> f64 {
        eps.powi(-1 - order as i32) * self.phi_deriv(x / eps, order)
    }

    /// `Φ(x) = ∫₋₁ˣ φ`, equal to 0 below the support and 1 above it.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            self.cdf_table.eval(x)
        }
    }

    /// `M(x) = ∫₋₁ˣ u·φ(u) du`, equal to 0 outside the support.
    pub fn moment(&self, x: f64) -> f64 {
        if x <= -1.0 || x >= 1.0 {
            0.0
        } else {
            self.moment_table.eval(x)
        }
    }

    /// `Φ(1)` as stored in the table (1 up to quadrature error).
    pub fn cdf_table_end(&self) -> f64 {
        *self.cdf_table.values.last().expect("table is never empty")
    }

    /// `M(1)` as stored in the table (0 up to quadrature error).
    pub fn moment_table_end(&self) -> f64 {
        *self
            .moment_table
            .values
            .last()
            .expect("table is never empty")
    }

    /// `‖φ‖∞`.
    pub fn sup_phi(&self) -> f64 {
        self.sup_phi
    }

    /// `‖φ′‖∞`.
    pub fn sup_phi_prime(&self) -> f64 {
        self.sup_phi_prime
    }
}

fn validate_profile(profile: &dyn KernelProfile) -> Result<(), KernelError> {
    let name = profile.name().to_string();
    if !profile.is_even() {
        return Err(KernelError::NotEven(name));
    }
    for &x in &[1.0, -1.0, 1.5, -1.5, 3.0, -3.0] {
        let v = profile.value(x);
        if v != 0.0 {
            return Err(KernelError::SupportViolation { name, x, value: v });
        }
    }
    let n = 2000;
    let peak = (0..=n)
        .map(|i| profile.value(-1.0 + 2.0 * i as f64 / n as f64).abs())
        .fold(0.0, f64::max);
    for i in 0..=n {
        let x = -1.0 + 2.0 * i as f64 / n as f64;
        let v = profile.value(x);
        if v < 0.0 {
            return Err(KernelError::Negative { name, x });
        }
        if (v - profile.value(-x)).abs() > 1e-12 * peak {
            return Err(KernelError::NotEven(name));
        }
    }
    Ok(())
}

fn integrate_profile(
    profile: &dyn KernelProfile,
    gl: &GaussLegendre,
    tolerance: f64,
) -> Result<f64, KernelError> {
    let f = |x: f64| profile.value(x);
    let mut panels = 16;
    let mut prev = gl.integrate_composite(f, -1.0, 1.0, panels);
    while panels < MAX_TABLE_INTERVALS {
        panels *= 2;
        let next = gl.integrate_composite(f, -1.0, 1.0, panels);
        if (next - prev).abs() <= 1e-3 * tolerance {
            return Ok(next);
        }
        prev = next;
    }
    Err(KernelError::Quadrature {
        tolerance,
        limit: MAX_TABLE_INTERVALS,
    })
}

fn build_tables(
    profile: &dyn KernelProfile,
    normalization: f64,
    gl: &GaussLegendre,
    tolerance: f64,
) -> Result<(HermiteTable, HermiteTable), KernelError> {
    let phi = |x: f64| normalization * profile.value(x);
    let uphi = |x: f64| x * normalization * profile.value(x);
    let mut n = INITIAL_TABLE_INTERVALS;
    while n <= MAX_TABLE_INTERVALS {
        let h = 2.0 / n as f64;
        let node = |i: usize| if i == n { 1.0 } else { -1.0 + h * i as f64 };
        let mut cdf_values = Vec::with_capacity(n + 1);
        let mut moment_values = Vec::with_capacity(n + 1);
        cdf_values.push(0.0);
        moment_values.push(0.0);
        let (mut c, mut m) = (0.0, 0.0);
        for i in 0..n {
            c += gl.integrate(phi, node(i), node(i + 1));
            m += gl.integrate(uphi, node(i), node(i + 1));
            cdf_values.push(c);
            moment_values.push(m);
        }
        let cdf_slopes = limited_slopes(&cdf_values, h, |i| phi(node(i)));
        let moment_slopes = (0..n).map(|i| (uphi(node(i)), uphi(node(i + 1)))).collect();
        let cdf_table = HermiteTable {
            h,
            values: cdf_values,
            slopes: cdf_slopes,
        };
        let moment_table = HermiteTable {
            h,
            values: moment_values,
            slopes: moment_slopes,
        };
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let a = node(i);
            let mid = a + 0.5 * h;
            let cdf_exact = cdf_table.values[i] + gl.integrate(phi, a, mid);
            let moment_exact = moment_table.values[i] + gl.integrate(uphi, a, mid);
            worst = worst
                .max((cdf_table.eval(mid) - cdf_exact).abs())
                .max((moment_table.eval(mid) - moment_exact).abs());
        }
        if worst <= 0.5 * tolerance {
            return Ok((cdf_table, moment_table));
        }
        n *= 2;
    }
    Err(KernelError::Quadrature {
        tolerance,
        limit: MAX_TABLE_INTERVALS,
    })
}

/// Exact node derivatives, limited per interval so the cubic never leaves the
/// monotone region (Fritsch–Carlson circle `α² + β² ≤ 9`).
fn limited_slopes<D: Fn(usize) -> f64>(values: &[f64], h: f64, deriv: D) -> Vec<(f64, f64)> {
    (0..values.len() - 1)
        .map(|i| {
            let m0 = deriv(i).max(0.0);
            let m1 = deriv(i + 1).max(0.0);
            let secant = (values[i + 1] - values[i]) / h;
            if secant <= 0.0 {
                return (0.0, 0.0);
            }
            let a = m0 / secant;
            let b = m1 / secant;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                (tau * m0, tau * m1)
            } else {
                (m0, m1)
            }
        })
        .collect()
}

/// Maximum of `|f|` on `(-1, 1)`: dense scan, then golden-section refinement.
fn sup_abs<F: Fn(f64) -> f64>(f: F) -> f64 {
    let n = SUP_SCAN_POINTS - 1;
    let h = 2.0 / n as f64;
    let g = |x: f64| f(x).abs();
    let (best_i, _) =
        (0..=n)
            .map(|i| (i, g(-1.0 + h * i as f64)))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
    let x_best = -1.0 + h * best_i as f64;
    let mut lo = (x_best - h).max(-1.0);
    let mut hi = (x_best + h).min(1.0);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1);
        }
    }
    g(x_best).max(g1).max(g2).max(g(0.5 * (lo + hi)))
}
