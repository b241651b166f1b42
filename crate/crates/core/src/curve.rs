//! Nonincreasing piecewise-linear curves with a parametric right tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a curve beyond its last grid point, anchored at that point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailModel {
    /// `y_last · (x / x_last)^{−exponent}`.
    Power { exponent: f64 },
    /// `y_last · e^{−rate (x − x_last)}`.
    Exponential { rate: f64 },
    /// Held at the last value.
    Flat,
}

impl TailModel {
    #[inline]
    fn eval(&self, x_last: f64, y_last: f64, x: f64) -> f64 {
        match *self {
            TailModel::Power { exponent } => y_last * (x / x_last).powf(-exponent),
            TailModel::Exponential { rate } => y_last * (-rate * (x - x_last)).exp(),
            TailModel::Flat => y_last,
        }
    }
}

/// Monotone piecewise-linear interpolant on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCurve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Value to the left of `xs[0]`.
    pub left: f64,
    pub tail: TailModel,
}

impl MonotoneCurve {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, left: f64, tail: TailModel) -> Result<Self> {
        check_grid(&xs)?;
        if xs.len() != ys.len() {
            return Err(Error::Domain(format!(
                "grid has {} points but {} values",
                xs.len(),
                ys.len()
            )));
        }
        if let TailModel::Power { .. } = tail {
            if xs[xs.len() - 1] <= 0.0 {
                return Err(Error::Domain(
                    "a power tail needs a positive last grid point".into(),
                ));
            }
        }
        Ok(Self { xs, ys, left, tail })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Replaces every value by the running minimum from the left.
    pub fn make_nonincreasing(&mut self) {
        for i in 1..self.ys.len() {
            if self.ys[i] > self.ys[i - 1] {
                self.ys[i] = self.ys[i - 1];
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut idx = 0;
        self.eval_from(x, &mut idx)
    }

    /// Evaluation for ascending query sequences: `idx` is a cursor that only
    /// moves forward, so a sweep over sorted queries costs one pass.
    #[inline]
    pub fn eval_from(&self, x: f64, idx: &mut usize) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return if x == self.xs[0] {
                self.ys[0]
            } else {
                self.left
            };
        }
        if x >= self.xs[n - 1] {
            *idx = n - 1;
            return self.tail.eval(self.xs[n - 1], self.ys[n - 1], x);
        }
        if *idx >= n - 1 || self.xs[*idx] > x {
            *idx = self.xs.partition_point(|&g| g <= x) - 1;
        }
        while self.xs[*idx + 1] <= x {
            *idx += 1;
        }
        let (x0, x1) = (self.xs[*idx], self.xs[*idx + 1]);
        let (y0, y1) = (self.ys[*idx], self.ys[*idx + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

pub(crate) fn check_grid(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Domain("empty grid".into()));
    }
    if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "grid must be finite and strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Geometric grid of `n` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * (r * i as f64).exp()
            }
        })
        .collect()
}

/// Uniform grid of `n` points from `lo` to `hi`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + h * i as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn curve(tail: TailModel) -> MonotoneCurve {
        MonotoneCurve::new(
            vec![0.0, 1.0, 2.0, 4.0],
            vec![1.0, 0.5, 0.4, 0.1],
            1.0,
            tail,
        )
        .unwrap()
    }

    #[test]
    fn interpolation_and_extensions() {
        let c = curve(TailModel::Power { exponent: 2.0 });
        assert_eq!(c.eval(-3.0), 1.0);
        assert_eq!(c.eval(0.0), 1.0);
        assert_relative_eq!(c.eval(0.5), 0.75);
        assert_relative_eq!(c.eval(3.0), 0.25);
        assert_relative_eq!(c.eval(8.0), 0.025);
        let e = curve(TailModel::Exponential { rate: 0.5 });
        assert_relative_eq!(e.eval(6.0), 0.1 * (-1.0f64).exp());
        assert_eq!(curve(TailModel::Flat).eval(100.0), 0.1);
    }

    #[test]
    fn cursor_matches_fresh_lookup() {
        let c = curve(TailModel::Power { exponent: 1.0 });
        let mut idx = 0;
        for i in 0..200 {
            let x = -1.0 + i as f64 * 0.05;
            assert_eq!(c.eval_from(x, &mut idx), c.eval(x));
        }
        // a stale cursor ahead of the query is repaired
        let mut idx = 2;
        assert_eq!(c.eval_from(0.5, &mut idx), c.eval(0.5));
    }

    #[test]
    fn monotonization_and_validation() {
        let mut c = MonotoneCurve::new(
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.3, 0.6],
            1.0,
            TailModel::Flat,
        )
        .unwrap();
        c.make_nonincreasing();
        assert_eq!(c.ys, vec![1.0, 0.3, 0.3]);
        assert!(MonotoneCurve::new(vec![0.0, 0.0], vec![1.0, 1.0], 1.0, TailModel::Flat).is_err());
        assert!(MonotoneCurve::new(vec![0.0, 1.0], vec![1.0], 1.0, TailModel::Flat).is_err());
    }

    #[test]
    fn grids() {
        let g = geometric_grid(1.0, 16.0, 5);
        assert_eq!(g.len(), 5);
        assert_relative_eq!(g[2], 4.0, max_relative = 1e-14);
        assert_eq!(g[4], 16.0);
        assert_eq!(uniform_grid(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
