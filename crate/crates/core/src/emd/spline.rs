//! Natural cubic spline through scattered knots, evaluated on the sample grid.

use super::extrema::Extremum;
use crate::{Error, Result};

/// Natural cubic spline (zero second derivative at both end knots).
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalSpline {
    /// Knot positions must be strictly increasing; at least two knots.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let k = xs.len();
        if k != ys.len() {
            return Err(Error::LengthMismatch {
                expected: k,
                actual: ys.len(),
            });
        }
        if k < 2 {
            return Err(Error::TooShort {
                required: 2,
                actual: k,
            });
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("knots", "positions must be strictly increasing"));
        }

        let mut m = vec![0.0; k];
        if k > 2 {
            // Thomas algorithm on the interior second derivatives.
            let n = k - 2;
            let mut diag = vec![0.0; n];
            let mut upper = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            for i in 0..n {
                let h0 = xs[i + 1] - xs[i];
                let h1 = xs[i + 2] - xs[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            for i in 1..n {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[n] = rhs[n - 1] / diag[n - 1];
            for i in (0..n - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { xs, ys, m })
    }

    fn eval_in(&self, i: usize, t: f64) -> f64 {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    fn slope_at_knot(&self, i: usize) -> f64 {
        let last = self.xs.len() - 1;
        if i < last {
            let h = self.xs[i + 1] - self.xs[i];
            (self.ys[i + 1] - self.ys[i]) / h - h * (2.0 * self.m[i] + self.m[i + 1]) / 6.0
        } else {
            let h = self.xs[i] - self.xs[i - 1];
            (self.ys[i] - self.ys[i - 1]) / h + h * (self.m[i - 1] + 2.0 * self.m[i]) / 6.0
        }
    }

    /// Evaluates at `t`; outside the knot span the spline continues linearly.
    pub fn eval(&self, t: f64) -> f64 {
        let last = self.xs.len() - 1;
        if t <= self.xs[0] {
            return self.ys[0] + self.slope_at_knot(0) * (t - self.xs[0]);
        }
        if t >= self.xs[last] {
            return self.ys[last] + self.slope_at_knot(last) * (t - self.xs[last]);
        }
        let i = self.xs.partition_point(|&x| x <= t) - 1;
        self.eval_in(i.min(last - 1), t)
    }

    /// Evaluates at `0, 1, …, n-1` with a single forward sweep.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        let last = self.xs.len() - 1;
        let mut out = Vec::with_capacity(n);
        let mut i = 0;
        for j in 0..n {
            let t = j as f64;
            if t <= self.xs[0] || t >= self.xs[last] {
                out.push(self.eval(t));
                continue;
            }
            while i + 1 < last && self.xs[i + 1] <= t {
                i += 1;
            }
            out.push(self.eval_in(i, t));
        }
        out
    }
}

/// Envelope through one kind of extrema, evaluated at sample indices `0..n`.
///
/// Two points degenerate to the straight line through them.
pub fn envelope(points: &[Extremum], n: usize) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: points.len(),
        });
    }
    let spline = NaturalSpline::new(
        points.iter().map(|p| p.position).collect(),
        points.iter().map(|p| p.value).collect(),
    )?;
    Ok(spline.sample(n))
}
