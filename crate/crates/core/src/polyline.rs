//! Waypoint sequences as unit-parametrized piecewise-linear curves.
//!
//! Waypoint `P_k` sits at parameter `t = k`, so the curve lives on `[0, p]` for `p`
//! segments. Outside that interval the first and last segments continue affinely,
//! which makes the curve (and every convolution with it) defined on all of ℝ.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolylineError {
    #[error("a polyline needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoints must have at least one coordinate")]
    ZeroDimension,
    #[error("waypoint {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("waypoint {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("resampling spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
}

/// An ordered list of waypoints `P₀ … P_p` in ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    dim: usize,
    // Row-major waypoint coordinates and segment vectors P̃ᵢ = Pᵢ₊₁ − Pᵢ.
    points: Vec<f64>,
    diffs: Vec<f64>,
}

impl Polyline {
    pub fn new(waypoints: Vec<Vec<f64>>) -> Result<Self, PolylineError> {
        if waypoints.len() < 2 {
            return Err(PolylineError::TooFewWaypoints(waypoints.len()));
        }
        let dim = waypoints[0].len();
        if dim == 0 {
            return Err(PolylineError::ZeroDimension);
        }
        let mut points = Vec::with_capacity(dim * waypoints.len());
        for (index, w) in waypoints.iter().enumerate() {
            if w.len() != dim {
                return Err(PolylineError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: w.len(),
                });
            }
            if w.iter().any(|c| !c.is_finite()) {
                return Err(PolylineError::NonFinite { index });
            }
            points.extend_from_slice(w);
        }
        let diffs = points
            .chunks_exact(dim)
            .zip(points.chunks_exact(dim).skip(1))
            .flat_map(|(a, b)| b.iter().zip(a).map(|(y, x)| y - x))
            .collect();
        let pl = Self { dim, points, diffs };
        Ok(pl)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Number of segments `p`; the parameter domain is `[0, p]`.
    pub fn segment_count(&self) -> usize {
        self.points.len() / self.dim - 1
    }

    pub fn waypoint_count(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn waypoint(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn waypoints(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Segment vector `P_{i+1} − P_i` of segment `i` (0-based, parameter interval `[i, i+1]`).
    pub fn segment(&self, i: usize) -> &[f64] {
        &self.diffs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn end_parameter(&self) -> f64 {
        self.segment_count() as f64
    }

    /// Index of the segment whose (extended) affine piece covers `t`. Breakpoints
    /// belong to the segment on their right, except `t = p`.
    pub fn segment_index(&self, t: f64) -> usize {
        let last = self.segment_count() - 1;
        if !(t >= 1.0) {
            return 0;
        }
        let f = t.floor();
        if f >= last as f64 {
            last
        } else {
            f as usize
        }
    }

    /// Point on the affine line through segment `i`, evaluated at parameter `t`.
    pub fn segment_line(&self, i: usize, t: f64, out: &mut [f64]) {
        let s = t - i as f64;
        let p = self.waypoint(i);
        let d = self.segment(i);
        for j in 0..self.dim {
            out[j] = p[j] + d[j] * s;
        }
    }

    /// The extended curve `f̄(t)`. Exact at integer parameters `0..=p`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let i = self.segment_index(t);
        let s = t - i as f64;
        if s == 0.0 {
            out.copy_from_slice(self.waypoint(i));
        } else if s == 1.0 {
            out.copy_from_slice(self.waypoint(i + 1));
        } else {
            self.segment_line(i, t, out);
        }
    }

    /// `Df̄(t)`: the slope of the segment covering `t`, right-hand slope at breakpoints.
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        self.segment(self.segment_index(t)).to_vec()
    }

    /// Euclidean length of the segments on `[0, p]`.
    pub fn length(&self) -> f64 {
        (0..self.segment_count())
            .map(|i| norm(self.segment(i)))
            .sum()
    }

    pub fn max_segment_length(&self) -> f64 {
        (0..self.segment_count())
            .map(|i| norm(self.segment(i)))
            .fold(0.0, f64::max)
    }

    /// Indices of segments with zero length.
    pub fn degenerate_segments(&self) -> Vec<usize> {
        (0..self.segment_count())
            .filter(|&i| self.segment(i).iter().all(|&c| c == 0.0))
            .collect()
    }

    /// Builds a polyline through `samples`, splitting any chord longer than
    /// `target_spacing` into equal pieces.
    pub fn resample_curve(
        samples: &[Vec<f64>],
        target_spacing: f64,
    ) -> Result<Self, PolylineError> {
        if samples.len() < 2 {
            return Err(PolylineError::TooFewWaypoints(samples.len()));
        }
        if !(target_spacing > 0.0 && target_spacing.is_finite()) {
            return Err(PolylineError::InvalidSpacing(target_spacing));
        }
        // Validate shape before computing chord lengths.
        Self::new(samples.to_vec())?;
        let mut out = vec![samples[0].clone()];
        for pair in samples.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let chord: f64 = a
                .iter()
                .zip(b)
                .map(|(x, y)| (y - x) * (y - x))
                .sum::<f64>()
                .sqrt();
            let pieces = (chord / target_spacing).ceil().max(1.0) as usize;
            for j in 1..pieces {
                let s = j as f64 / pieces as f64;
                out.push(a.iter().zip(b).map(|(x, y)| x + (y - x) * s).collect());
            }
            out.push(b.clone());
        }
        Self::new(out)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs_path() -> Polyline {
        Polyline::new(vec![vec![-1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap()
    }

    #[test]
    fn eval_on_and_off_the_domain() {
        let pl = abs_path();
        assert_eq!(pl.eval(1.0), vec![0.0, 0.0]);
        assert_eq!(pl.eval(0.5), vec![-0.5, 0.5]);
        assert_eq!(pl.eval(-1.0), vec![-2.0, 2.0]);
        assert_eq!(pl.eval(3.0), vec![2.0, 2.0]);
        assert_eq!(pl.eval(2.0), vec![1.0, 1.0]);
    }

    #[test]
    fn derivative_uses_right_slope() {
        let pl = abs_path();
        assert_eq!(pl.derivative(0.5), vec![1.0, -1.0]);
        assert_eq!(pl.derivative(1.5), vec![1.0, 1.0]);
        assert_eq!(pl.derivative(1.0), vec![1.0, 1.0]);
        assert_eq!(pl.derivative(-7.0), vec![1.0, -1.0]);
        assert_eq!(pl.derivative(9.0), vec![1.0, 1.0]);
    }

    #[test]
    fn lengths() {
        assert!((abs_path().length() - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let seg = Polyline::new(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(seg.length(), 5.0);
        let rep = Polyline::new(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(rep.length(), 5.0);
        assert_eq!(rep.degenerate_segments(), vec![0]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            Polyline::new(vec![vec![1.0]]),
            Err(PolylineError::TooFewWaypoints(1))
        );
        assert_eq!(
            Polyline::new(vec![vec![], vec![]]),
            Err(PolylineError::ZeroDimension)
        );
        assert!(matches!(
            Polyline::new(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(PolylineError::DimensionMismatch { index: 1, .. })
        ));
        assert!(matches!(
            Polyline::new(vec![vec![1.0], vec![f64::NAN]]),
            Err(PolylineError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn resample_two_samples_is_identity() {
        let pl = Polyline::resample_curve(&[vec![0.0, 0.0], vec![0.5, 0.0]], 1.0).unwrap();
        assert_eq!(pl.segment_count(), 1);
        assert_eq!(pl.waypoint(1), &[0.5, 0.0]);
        assert!(Polyline::resample_curve(&[vec![0.0]], 1.0).is_err());
        assert!(Polyline::resample_curve(&[vec![0.0], vec![1.0]], 0.0).is_err());
    }

    #[test]
    fn resample_subdivides_long_chords() {
        let pl = Polyline::resample_curve(&[vec![0.0], vec![1.0]], 0.3).unwrap();
        assert_eq!(pl.segment_count(), 4);
        assert_eq!(pl.length(), 1.0);
    }

    #[test]
    fn resampled_circle_length() {
        let n = 1000;
        let samples: Vec<Vec<f64>> = (0..=n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let pl = Polyline::resample_curve(&samples, 0.01).unwrap();
        let circumference = 2.0 * std::f64::consts::PI;
        assert!((pl.length() - circumference).abs() / circumference < 1e-3);
    }
}
