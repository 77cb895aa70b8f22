//! Univariate quadrature rules used for Gram matrices, L² norms and the
//! inner integral of the theoretical Lebesgue constant.

/// Gauss–Legendre nodes on [-1, 1] (8 points), paired with their weights.
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// A quadrature rule on a subinterval of [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub enum QuadRule {
    /// 8-point Gauss–Legendre on every panel between consecutive breakpoints.
    Panels { breaks: Vec<f64> },
    /// Composite trapezoid on the uniform grid `{m * step}` clipped to `[lo, hi]`.
    Trapezoid { lo: f64, hi: f64, step: f64 },
}

impl QuadRule {
    /// Gauss–Legendre panels from an unsorted list of breakpoints; the list is
    /// sorted, deduplicated and clipped to `[lo, hi]`, with both ends added.
    pub fn panels(breaks: &[f64], lo: f64, hi: f64) -> Self {
        let mut b: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|&t| t > lo && t < hi)
            .collect();
        b.push(lo);
        b.push(hi);
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup();
        QuadRule::Panels { breaks: b }
    }

    /// Uniform panels of width `1/count` on [0, 1].
    pub fn uniform_panels(count: usize) -> Self {
        let breaks: Vec<f64> = (0..=count).map(|i| i as f64 / count as f64).collect();
        QuadRule::Panels { breaks }
    }

    pub fn lo(&self) -> f64 {
        match self {
            QuadRule::Panels { breaks } => breaks[0],
            QuadRule::Trapezoid { lo, .. } => *lo,
        }
    }

    pub fn hi(&self) -> f64 {
        match self {
            QuadRule::Panels { breaks } => *breaks.last().unwrap(),
            QuadRule::Trapezoid { hi, .. } => *hi,
        }
    }

    /// Restricts the rule to `[lo, hi]` (intersected with its current range).
    pub fn restrict(&self, lo: f64, hi: f64) -> Self {
        let lo = lo.max(self.lo());
        let hi = hi.min(self.hi());
        match self {
            QuadRule::Panels { breaks } => QuadRule::panels(breaks, lo, hi),
            QuadRule::Trapezoid { step, .. } => QuadRule::Trapezoid { lo, hi, step: *step },
        }
    }

    /// Splits every panel into `parts` equal sub-panels. Trapezoid rules are
    /// returned unchanged.
    pub fn subdivide(&self, parts: usize) -> Self {
        match self {
            QuadRule::Panels { breaks } => {
                let mut out = Vec::with_capacity((breaks.len() - 1) * parts + 1);
                for w in breaks.windows(2) {
                    for p in 0..parts {
                        out.push(w[0] + (w[1] - w[0]) * p as f64 / parts as f64);
                    }
                }
                out.push(*breaks.last().unwrap());
                QuadRule::Panels { breaks: out }
            }
            other => other.clone(),
        }
    }

    /// Number of nodes the rule visits.
    pub fn len(&self) -> usize {
        match self {
            QuadRule::Panels { breaks } => 8 * breaks.len().saturating_sub(1),
            QuadRule::Trapezoid { lo, hi, step } => {
                if hi <= lo {
                    0
                } else {
                    let first = (lo / step).floor() as i64 + 1;
                    let last = (hi / step).ceil() as i64 - 1;
                    (last - first + 1).max(0) as usize + 2
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `f(node, weight)` for every node, in increasing node order.
    pub fn for_each(&self, mut f: impl FnMut(f64, f64)) {
        match self {
            QuadRule::Panels { breaks } => {
                for w in breaks.windows(2) {
                    let half = 0.5 * (w[1] - w[0]);
                    let mid = 0.5 * (w[1] + w[0]);
                    if half <= 0.0 {
                        continue;
                    }
                    for &(t, wt) in GL8.iter() {
                        f(mid + half * t, half * wt);
                    }
                }
            }
            QuadRule::Trapezoid { lo, hi, step } => {
                let (lo, hi, step) = (*lo, *hi, *step);
                if hi <= lo {
                    return;
                }
                let first = (lo / step).floor() as i64 + 1;
                let last = (hi / step).ceil() as i64 - 1;
                let grid = (first..=last)
                    .map(|m| m as f64 * step)
                    .filter(|&g| g > lo && g < hi);
                let mut it = std::iter::once(lo)
                    .chain(grid)
                    .chain(std::iter::once(hi))
                    .peekable();
                let mut prev = lo;
                while let Some(cur) = it.next() {
                    let next = it.peek().copied().unwrap_or(cur);
                    f(cur, 0.5 * (next - prev));
                    prev = cur;
                }
            }
        }
    }

    /// Materialises the nodes and weights.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each(|x, w| out.push((x, w)));
        out
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut s = 0.0;
        self.for_each(|x, w| s += w * f(x));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_is_exact_for_degree_15() {
        let rule = QuadRule::uniform_panels(1);
        let v = rule.integrate(|x| x.powi(15));
        assert_abs_diff_eq!(v, 1.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let rule = QuadRule::Trapezoid { lo: 0.1, hi: 0.73, step: 1.0 / 64.0 };
        let total: f64 = rule.nodes().iter().map(|p| p.1).sum();
        assert_abs_diff_eq!(total, 0.63, epsilon = 1e-14);
        let lin = rule.integrate(|x| 3.0 * x + 1.0);
        assert_abs_diff_eq!(lin, 1.5 * (0.73f64.powi(2) - 0.01) + 0.63, epsilon = 1e-14);
        assert_eq!(rule.nodes().len(), rule.len());
    }

    #[test]
    fn trapezoid_on_grid_aligned_interval() {
        let rule = QuadRule::Trapezoid { lo: 0.0, hi: 1.0, step: 0.25 };
        let nodes = rule.nodes();
        let xs: Vec<f64> = nodes.iter().map(|p| p.0).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let ws: Vec<f64> = nodes.iter().map(|p| p.1).collect();
        assert_eq!(ws, vec![0.125, 0.25, 0.25, 0.25, 0.125]);
    }

    #[test]
    fn restricted_panels_include_endpoints() {
        let rule = QuadRule::uniform_panels(4).restrict(0.3, 0.9);
        match rule {
            QuadRule::Panels { breaks } => assert_eq!(breaks, vec![0.3, 0.5, 0.75, 0.9]),
            _ => unreachable!(),
        }
    }
}
