//! Numerical integration primitives.
//!
//! Two independent rules live here: a fixed-order composite Gauss–Legendre rule used to
//! build the kernel tables, and an adaptive Simpson rule used by the verification oracle.
//! Keeping them separate means the oracle never shares a code path with the tables it checks.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not reach tolerance {tolerance:e} on [{a}, {b}] within {limit} subdivision levels")]
    NoConvergence {
        a: f64,
        b: f64,
        tolerance: f64,
        limit: usize,
    },
    #[error("integration bounds must be finite, got [{a}, {b}]")]
    NonFiniteBounds { a: f64, b: f64 },
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th root counted from the right.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum();
        half * sum
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_composite<F: Fn(f64) -> f64>(
        &self,
        f: F,
        a: f64,
        b: f64,
        panels: usize,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let lo = a + h * i as f64;
                let hi = if i + 1 == panels { b } else { lo + h };
                self.integrate(&f, lo, hi)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Settings for [`adaptive_simpson`] and [`adaptive_simpson_vec`].
#[derive(Debug, Clone, Copy)]
pub struct SimpsonOptions {
    /// Absolute tolerance for the whole interval.
    pub tolerance: f64,
    /// Maximum bisection depth before giving up.
    pub max_depth: usize,
    /// Depth that is always reached, whatever the error estimate says.
    pub min_depth: usize,
}

impl Default for SimpsonOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_depth: 48,
            min_depth: 4,
        }
    }
}

/// Adaptive Simpson quadrature of a scalar integrand with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: SimpsonOptions,
) -> Result<f64, QuadratureError> {
    let v = adaptive_simpson_vec(|x, out| out[0] = f(x), 1, a, b, opts)?;
    Ok(v[0])
}

struct Panel {
    a: f64,
    m: f64,
    b: f64,
    fa: Vec<f64>,
    fm: Vec<f64>,
    fb: Vec<f64>,
    whole: Vec<f64>,
    tol: f64,
    depth: usize,
}

/// Adaptive Simpson quadrature of a vector-valued integrand.
///
/// The integrand writes its `dim` components into the provided slice. Convergence is
/// judged on the largest component error.
pub fn adaptive_simpson_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    opts: SimpsonOptions,
) -> Result<Vec<f64>, QuadratureError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(QuadratureError::NonFiniteBounds { a, b });
    }
    let mut total = vec![0.0; dim];
    if a == b {
        return Ok(total);
    }
    let mut eval = |x: f64| {
        let mut v = vec![0.0; dim];
        f(x, &mut v);
        v
    };
    let m = 0.5 * (a + b);
    let fa = eval(a);
    let fm = eval(m);
    let fb = eval(b);
    let whole = simpson(a, b, &fa, &fm, &fb);
    let mut stack = vec![Panel {
        a,
        m,
        b,
        fa,
        fm,
        fb,
        whole,
        tol: opts.tolerance,
        depth: 0,
    }];
    // Kahan-compensated accumulation keeps many tiny panel sums from drifting.
    let mut comp = vec![0.0; dim];
    while let Some(p) = stack.pop() {
        let lm = 0.5 * (p.a + p.m);
        let rm = 0.5 * (p.m + p.b);
        let flm = eval(lm);
        let frm = eval(rm);
        let left = simpson(p.a, p.m, &p.fa, &flm, &p.fm);
        let right = simpson(p.m, p.b, &p.fm, &frm, &p.fb);
        let mut err: f64 = 0.0;
        for i in 0..dim {
            err = err.max((left[i] + right[i] - p.whole[i]).abs());
        }
        if p.depth >= opts.min_depth && err <= 15.0 * p.tol {
            for i in 0..dim {
                let delta = left[i] + right[i] - p.whole[i];
                let value = left[i] + right[i] + delta / 15.0;
                let y = value - comp[i];
                let t = total[i] + y;
                comp[i] = (t - total[i]) - y;
                total[i] = t;
            }
            continue;
        }
        if p.depth >= opts.max_depth || lm <= p.a || rm >= p.b {
            return Err(QuadratureError::NoConvergence {
                a,
                b,
                tolerance: opts.tolerance,
                limit: opts.max_depth,
            });
        }
        let half_tol = 0.5 * p.tol;
        let depth = p.depth + 1;
        stack.push(Panel {
            a: p.m,
            m: rm,
            b: p.b,
            fa: p.fm.clone(),
            fm: frm,
            fb: p.fb,
            whole: right,
            tol: half_tol,
            depth,
        });
        stack.push(Panel {
            a: p.a,
            m: lm,
            b: p.m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
            tol: half_tol,
            depth,
        });
    }
    Ok(total)
}

fn simpson(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let h6 = (b - a) / 6.0;
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((&x, &y), &z)| h6 * (x + 4.0 * y + z))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(10);
        // Degree 19 is the highest integrated exactly by 10 nodes.
        let got = rule.integrate(|x| x.powi(18) + 3.0 * x.powi(7), -1.0, 1.0);
        assert!((got - 2.0 / 19.0).abs() < 1e-15);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_odd_order_has_center_node() {
        let rule = GaussLegendre::new(7);
        assert_eq!(rule.order(), 7);
        assert_eq!(rule.nodes[3], 0.0);
        let got = rule.integrate_composite(f64::sin, 0.0, std::f64::consts::PI, 4);
        assert!((got - 2.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let got = adaptive_simpson(f64::exp, 0.0, 1.0, SimpsonOptions::default()).unwrap();
        assert!((got - (std::f64::consts::E - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn simpson_vector_integrand() {
        let got = adaptive_simpson_vec(
            |x, out| {
                out[0] = x;
                out[1] = x * x;
            },
            2,
            0.0,
            2.0,
            SimpsonOptions::default(),
        )
        .unwrap();
        assert!((got[0] - 2.0).abs() < 1e-12);
        assert!((got[1] - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_reports_non_convergence() {
        let opts = SimpsonOptions {
            tolerance: 1e-14,
            max_depth: 3,
            min_depth: 0,
        };
        let err = adaptive_simpson(|x| (50.0 * x).sin(), 0.0, 3.0, opts).unwrap_err();
        assert!(matches!(err, QuadratureError::NoConvergence { .. }));
    }

    #[test]
    fn simpson_rejects_infinite_bounds() {
        let err =
            adaptive_simpson(|x| x, 0.0, f64::INFINITY, SimpsonOptions::default()).unwrap_err();
        assert!(matches!(err, QuadratureError::NonFiniteBounds { .. }));
    }
}
