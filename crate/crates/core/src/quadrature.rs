//! Gauss-Legendre rules and composite integration of piecewise-smooth
//! integrands.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess for the i-th largest root.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
            dp = if d != 0.0 { d } else { dp };
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

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule on `panels` equal panels of `[a, b]`.
    pub fn composite(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + k as f64 * h;
                let hi = if k + 1 == panels { b } else { lo + h };
                self.integrate(lo, hi, &f)
            })
            .sum()
    }

    /// Composite rule on equal panels between consecutive `breaks`
    /// (which must be sorted), so no panel straddles a breakpoint.
    pub fn composite_with_breaks(
        &self,
        breaks: &[f64],
        panels_per_piece: usize,
        f: impl Fn(f64) -> f64,
    ) -> f64 {
        breaks
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| self.composite(w[0], w[1], panels_per_piece, &f))
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
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Root of `f` in `[lo, hi]` by bisection, assuming a sign change.
pub fn bisect(mut lo: f64, mut hi: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Settings for splitting an integrand into its positive and negative parts.
#[derive(Debug, Clone)]
pub struct SignSplit {
    pub rule: GaussLegendre,
    /// Number of uniform scan panels on the whole interval.
    pub scan_panels: usize,
    /// Absolute tolerance for the located sign changes.
    pub root_tol: f64,
}

impl SignSplit {
    pub fn new(order: usize, scan_panels: usize) -> Self {
        Self {
            rule: GaussLegendre::new(order),
            scan_panels,
            root_tol: 1e-12,
        }
    }

    /// Returns `(int max(g, 0), int max(-g, 0))` over `[a, b]`.
    ///
    /// `g` may have kinks only at the points in `kinks`; sign changes are
    /// located by scanning and bisection so that each Gauss panel sees a
    /// smooth, single-signed integrand.
    pub fn parts(&self, a: f64, b: f64, kinks: &[f64], g: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut edges: Vec<f64> = (0..=self.scan_panels)
            .map(|k| a + (b - a) * k as f64 / self.scan_panels as f64)
            .collect();
        *edges.last_mut().unwrap() = b;
        edges.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (b - a));

        let mut pos = 0.0;
        let mut neg = 0.0;
        let mut accumulate = |lo: f64, hi: f64| {
            let v = self.rule.integrate(lo, hi, &g);
            if v >= 0.0 {
                pos += v;
            } else {
                neg -= v;
            }
        };
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let g_lo = g(lo);
            let g_hi = g(hi);
            if g_lo * g_hi < 0.0 {
                let r = bisect(lo, hi, self.root_tol, &g);
                accumulate(lo, r);
                accumulate(r, hi);
            } else {
                accumulate(lo, hi);
            }
        }
        (pos, neg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn known_three_point_rule() {
        let gl = GaussLegendre::new(3);
        let r = (3.0_f64 / 5.0).sqrt();
        assert_abs_diff_eq!(gl.nodes()[0], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(gl.nodes()[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gl.weights()[0], 5.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gl.weights()[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in 1..12 {
            let gl = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let exact = (2.0_f64.powi(deg as i32 + 1) - 0.0) / (deg as f64 + 1.0);
            let got = gl.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            assert_abs_diff_eq!(got, exact, epsilon = 1e-12 * exact);
            let sum_w: f64 = gl.weights().iter().sum();
            assert_abs_diff_eq!(sum_w, 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn composite_sine() {
        let gl = GaussLegendre::new(6);
        let v = gl.composite(0.0, PI, 8, f64::sin);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn sign_split_of_cosine() {
        // cos on [0, 2pi]: positive part 2, negative part 2.
        let split = SignSplit::new(8, 7);
        let (p, n) = split.parts(0.0, 2.0 * PI, &[], f64::cos);
        assert_abs_diff_eq!(p, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sign_split_handles_kinks() {
        // |x - 0.3| - 0.1 on [0, 1] has a kink at 0.3 and roots at 0.2, 0.4.
        let split = SignSplit::new(4, 10);
        let (p, n) = split.parts(0.0, 1.0, &[0.3], |x| (x - 0.3).abs() - 0.1);
        assert_abs_diff_eq!(n, 0.01, epsilon = 1e-13);
        assert_abs_diff_eq!(p, 0.5 * 0.2 * 0.2 + 0.5 * 0.6 * 0.6, epsilon = 1e-13);
    }

    #[test]
    fn bisection_finds_sqrt2() {
        let r = bisect(1.0, 2.0, 1e-14, |x| x * x - 2.0);
        assert_abs_diff_eq!(r, 2.0_f64.sqrt(), epsilon = 1e-13);
    }
}
