//! Monotone piecewise-cubic (Fritsch-Carlson) interpolation of pulse
//! parameters over the gate angle.

use crate::error::{Error, Result};
use crate::levelset::TraversalRecord;

#[derive(Debug, Clone)]
pub struct PulseInterpolator {
    thetas: Vec<f64>,
    params: Vec<Vec<f64>>,
    /// `slopes[k][j]`: derivative of component `j` at knot `k`.
    slopes: Vec<Vec<f64>>,
}

impl PulseInterpolator {
    /// Knots are the records' `(theta, A)` pairs, sorted by `theta`.
    pub fn new(records: &[TraversalRecord]) -> Result<Self> {
        let knots: Vec<(f64, Vec<f64>)> = records.iter().map(|r| (r.theta, r.params.clone())).collect();
        Self::from_knots(knots)
    }

    pub fn from_knots(mut knots: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("interpolation needs at least two records"));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = knots[0].1.len();
        if knots.iter().any(|k| k.1.len() != n) {
            return Err(Error::invalid("records carry parameter vectors of different lengths"));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("record angles must be strictly increasing"));
        }
        let (thetas, params): (Vec<f64>, Vec<Vec<f64>>) = knots.into_iter().unzip();
        let slopes = fritsch_carlson(&thetas, &params);
        Ok(PulseInterpolator { thetas, params, slopes })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.thetas[0], *self.thetas.last().unwrap())
    }

    pub fn eval(&self, theta: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&theta) {
            return Err(Error::OutOfRange { theta, lo, hi });
        }
        let k = match self.thetas.binary_search_by(|x| x.total_cmp(&theta)) {
            Ok(k) => return Ok(self.params[k].clone()),
            Err(k) => k - 1,
        };
        let h = self.thetas[k + 1] - self.thetas[k];
        let s = (theta - self.thetas[k]) / h;
        let (h00, h10, h01, h11) =
            ((1.0 + 2.0 * s) * (1.0 - s).powi(2), s * (1.0 - s).powi(2), s * s * (3.0 - 2.0 * s), s * s * (s - 1.0));
        Ok((0..self.params[k].len())
            .map(|j| {
                h00 * self.params[k][j]
                    + h10 * h * self.slopes[k][j]
                    + h01 * self.params[k + 1][j]
                    + h11 * h * self.slopes[k + 1][j]
            })
            .collect())
    }
}

fn fritsch_carlson(x: &[f64], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    let dims = y[0].len();
    let mut slopes = vec![vec![0.0; dims]; n];
    for j in 0..dims {
        let secants: Vec<f64> = (0..n - 1).map(|k| (y[k + 1][j] - y[k][j]) / (x[k + 1] - x[k])).collect();
        if n == 2 {
            slopes[0][j] = secants[0];
            slopes[1][j] = secants[0];
            continue;
        }
        for k in 1..n - 1 {
            let (d0, d1) = (secants[k - 1], secants[k]);
            slopes[k][j] = if d0 * d1 <= 0.0 {
                0.0
            } else {
                // Weighted harmonic mean keeps each piece monotone.
                let (h0, h1) = (x[k] - x[k - 1], x[k + 1] - x[k]);
                let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                (w1 + w2) / (w1 / d0 + w2 / d1)
            };
        }
        slopes[0][j] = end_slope(x[1] - x[0], x[2] - x[1], secants[0], secants[1]);
        slopes[n - 1][j] = end_slope(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3], secants[n - 2], secants[n - 3]);
    }
    slopes
}

/// One-sided three-point end slope, limited to preserve monotonicity.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

pub fn interpolate(records: &[TraversalRecord], theta: f64) -> Result<Vec<f64>> {
    PulseInterpolator::new(records)?.eval(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn knots(xs: &[f64], ys: &[f64]) -> PulseInterpolator {
        PulseInterpolator::from_knots(xs.iter().zip(ys).map(|(x, y)| (*x, vec![*y])).collect()).unwrap()
    }

    #[test]
    fn exact_at_knots() {
        let p = knots(&[0.0, 0.4, 1.1, 2.0], &[1.0, -2.0, 0.5, 0.7]);
        for (x, y) in [(0.0, 1.0), (0.4, -2.0), (1.1, 0.5), (2.0, 0.7)] {
            assert_eq!(p.eval(x).unwrap()[0], y);
        }
    }

    #[test]
    fn two_knots_are_linear() {
        let p = knots(&[1.0, 3.0], &[2.0, 6.0]);
        assert!((p.eval(1.5).unwrap()[0] - 3.0).abs() < 1e-15);
        assert!((p.eval(2.9).unwrap()[0] - 5.8).abs() < 1e-14);
    }

    #[test]
    fn out_of_range_is_reported() {
        let p = knots(&[1.0, 3.0], &[2.0, 6.0]);
        assert_eq!(p.eval(3.5).unwrap_err(), Error::OutOfRange { theta: 3.5, lo: 1.0, hi: 3.0 });
    }

    #[test]
    fn rejects_duplicate_angles() {
        let k = vec![(1.0, vec![0.0]), (1.0, vec![1.0]), (2.0, vec![0.0])];
        assert!(PulseInterpolator::from_knots(k).is_err());
    }

    #[test]
    fn reproduces_smooth_function() {
        let xs: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let p = knots(&xs, &ys);
        for x in [0.123, 0.777, 1.5, 1.99] {
            assert!((p.eval(x).unwrap()[0] - f64::sin(x)).abs() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(steps in proptest::collection::vec(0.0f64..1.0, 3..12)) {
            let xs: Vec<f64> = (0..=steps.len()).map(|i| i as f64).collect();
            let mut ys = vec![0.0];
            for s in &steps { ys.push(ys.last().unwrap() + s); }
            let p = knots(&xs, &ys);
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=200 {
                let v = p.eval(i as f64 * steps.len() as f64 / 200.0).unwrap()[0];
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }
}
