//! B-splines on uniform knots via the Cox–de Boor recursion, rescaled by
//! `sqrt(m + r)` so that the Gram matrix under the uniform law is O(1).

use super::UnivariateBasis;
use crate::quadrature::QuadRule;

#[derive(Clone, Debug)]
pub struct BSpline {
    order: usize,
    interior: usize,
    /// Full knot vector: `order` zeros, the interior knots, `order` ones.
    knots: Vec<f64>,
    scale: f64,
}

impl BSpline {
    pub fn new(order: usize, interior: usize) -> Self {
        assert!(order >= 1);
        let mut knots = vec![0.0; order];
        knots.extend((1..=interior).map(|j| j as f64 / (interior + 1) as f64));
        knots.extend(std::iter::repeat_n(1.0, order));
        BSpline {
            order,
            interior,
            knots,
            scale: ((interior + order) as f64).sqrt(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Knot span `mu` with `knots[mu] <= x < knots[mu + 1]`; the last span is
    /// closed on the right.
    fn span(&self, x: f64) -> usize {
        let r = self.order;
        let m = self.interior;
        let mut idx = ((x * (m + 1) as f64).floor().max(0.0) as usize).min(m);
        while idx < m && x >= self.knots[r + idx] {
            idx += 1;
        }
        while idx > 0 && x < self.knots[r - 1 + idx] {
            idx -= 1;
        }
        r - 1 + idx
    }

    /// Unscaled values of the `order` B-splines of order `ord` that may be
    /// nonzero on span `mu`; entry `j` belongs to basis index `mu + 1 - ord + j`.
    fn values_at_span(&self, x: f64, mu: usize, ord: usize) -> Vec<f64> {
        let t = &self.knots;
        let mut n = vec![0.0; ord];
        let mut left = vec![0.0; ord];
        let mut right = vec![0.0; ord];
        n[0] = 1.0;
        for k in 1..ord {
            left[k] = x - t[mu + 1 - k];
            right[k] = t[mu + k] - x;
            let mut saved = 0.0;
            for j in 0..k {
                let denom = right[j + 1] + left[k - j];
                let temp = if denom == 0.0 { 0.0 } else { n[j] / denom };
                n[j] = saved + right[j + 1] * temp;
                saved = left[k - j] * temp;
            }
            n[k] = saved;
        }
        n
    }

    /// Unscaled values (partition of unity) at `x`, as `(index, value)` pairs.
    pub fn raw_active(&self, x: f64) -> Vec<(usize, f64)> {
        let mu = self.span(x);
        let r = self.order;
        self.values_at_span(x, mu, r)
            .into_iter()
            .enumerate()
            .map(|(j, v)| (mu + 1 - r + j, v))
            .collect()
    }
}

impl UnivariateBasis for BSpline {
    fn len(&self) -> usize {
        self.interior + self.order
    }

    fn eval_active(&self, x: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend(self.raw_active(x).into_iter().map(|(i, v)| (i, v * self.scale)));
    }

    fn deriv_active(&self, x: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let r = self.order;
        let mu = self.span(x);
        if r == 1 {
            out.push((mu, 0.0));
            return;
        }
        let t = &self.knots;
        // lower-order values: entry j belongs to index mu + 2 - r + j
        let low = self.values_at_span(x, mu, r - 1);
        let low_at = |i: isize| -> f64 {
            let j = i - (mu as isize + 2 - r as isize);
            if j < 0 || j as usize >= low.len() {
                0.0
            } else {
                low[j as usize]
            }
        };
        let rf = (r - 1) as f64;
        for i in (mu + 1 - r)..=mu {
            let d1 = t[i + r - 1] - t[i];
            let d2 = t[i + r] - t[i + 1];
            let a = if d1 > 0.0 { low_at(i as isize) / d1 } else { 0.0 };
            let b = if d2 > 0.0 { low_at(i as isize + 1) / d2 } else { 0.0 };
            out.push((i, rf * (a - b) * self.scale));
        }
    }

    fn support(&self, k: usize) -> (f64, f64) {
        (self.knots[k], self.knots[k + self.order])
    }

    fn breakpoints(&self) -> Vec<f64> {
        (0..=self.interior + 1).map(|j| j as f64 / (self.interior + 1) as f64).collect()
    }

    fn gram_rule(&self) -> QuadRule {
        QuadRule::panels(&self.breakpoints(), 0.0, 1.0)
    }

    fn integration_rule(&self) -> QuadRule {
        self.gram_rule().subdivide(4)
    }

    fn max_active(&self) -> usize {
        self.order
    }
}
