//! Fixed-step RK4 integration of `u'' + q(t) u = 0` and cubic Hermite
//! tables for the resulting solutions.

use crate::error::{Error, Result};

/// One classical Runge-Kutta step for `y' = f(t, y)`.
#[inline]
pub fn rk4_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
) -> [f64; N] {
    let axpy = |y: &[f64; N], k: &[f64; N], c: f64| -> [f64; N] {
        let mut out = *y;
        out.iter_mut().zip(k.iter()).for_each(|(o, k)| *o += c * k);
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &axpy(y, &k2, 0.5 * h));
    let k4 = f(t + h, &axpy(y, &k3, h));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates `y' = f(t, y)` over `steps` equal steps of `[0, t_end]`,
/// calling `visit(i, y_i)` at every node including the initial one.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    t_end: f64,
    steps: usize,
    mut visit: impl FnMut(usize, &[f64; N]),
) -> Result<[f64; N]> {
    let h = t_end / steps as f64;
    let mut y = y0;
    visit(0, &y);
    for i in 0..steps {
        let t = i as f64 * h;
        y = rk4_step(&f, t, &y, h);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegratorFailure { t: t + h });
        }
        visit(i + 1, &y);
    }
    Ok(y)
}

/// A function tabulated with its derivative on a uniform grid of `[0, T]`,
/// evaluated off-grid by cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermite {
    t_end: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Hermite {
    pub fn new(t_end: f64, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert!(values.len() >= 2 && values.len() == slopes.len());
        let h = t_end / (values.len() - 1) as f64;
        Self {
            t_end,
            h,
            values,
            slopes,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_slope(t).0
    }

    pub fn eval_with_slope(&self, t: f64) -> (f64, f64) {
        let n = self.values.len();
        let x = (t / self.h).clamp(0.0, (n - 1) as f64);
        let j = (x.floor() as usize).min(n - 2);
        let s = x - j as f64;
        if s == 0.0 {
            return (self.values[j], self.slopes[j]);
        }
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.slopes[j] * self.h, self.slopes[j + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        let slope = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / self.h;
        (value, slope)
    }
}

/// Solutions `u1`, `u2` of `u'' + q(t) u = 0` with `u1(0) = 1, u1'(0) = 0`
/// and `u2(0) = 0, u2'(0) = 1`. Their Wronskian is identically 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSystem {
    pub u1: Hermite,
    pub u2: Hermite,
}

impl FundamentalSystem {
    /// Tabulates the system on `nodes` uniform nodes of `[0, t_end]`.
    pub fn integrate(q: impl Fn(f64) -> f64, t_end: f64, nodes: usize) -> Result<Self> {
        assert!(nodes >= 2);
        let mut u1 = vec![0.0; nodes];
        let mut du1 = vec![0.0; nodes];
        let mut u2 = vec![0.0; nodes];
        let mut du2 = vec![0.0; nodes];
        integrate(
            |t, y: &[f64; 4]| {
                let qt = q(t);
                [y[1], -qt * y[0], y[3], -qt * y[2]]
            },
            [1.0, 0.0, 0.0, 1.0],
            t_end,
            nodes - 1,
            |i, y| {
                u1[i] = y[0];
                du1[i] = y[1];
                u2[i] = y[2];
                du2[i] = y[3];
            },
        )?;
        Ok(Self {
            u1: Hermite::new(t_end, u1, du1),
            u2: Hermite::new(t_end, u2, du2),
        })
    }

    /// `[[u1(T), u2(T)], [u1'(T), u2'(T)]]`.
    pub fn monodromy(&self) -> [[f64; 2]; 2] {
        let n = self.u1.len() - 1;
        [
            [self.u1.values[n], self.u2.values[n]],
            [self.u1.slopes[n], self.u2.slopes[n]],
        ]
    }
}

/// Monodromy matrix of `u'' + q(t) u = 0` without storing the trajectory.
pub fn monodromy(q: impl Fn(f64) -> f64, t_end: f64, steps: usize) -> Result<[[f64; 2]; 2]> {
    let y = integrate(
        |t, y: &[f64; 4]| {
            let qt = q(t);
            [y[1], -qt * y[0], y[3], -qt * y[2]]
        },
        [1.0, 0.0, 0.0, 1.0],
        t_end,
        steps,
        |_, _| {},
    )?;
    Ok([[y[0], y[2]], [y[1], y[3]]])
}

pub type Matrix2 = [[f64; 2]; 2];

/// Monodromy of `u'' + (q(t) + lambda) u = 0` at `lambda` together with its
/// derivative in `lambda`, from the variational equation
/// `w'' + (q + lambda) w = -u`.
pub fn monodromy_with_lambda_derivative(
    q: impl Fn(f64) -> f64,
    lambda: f64,
    t_end: f64,
    steps: usize,
) -> Result<(Matrix2, Matrix2)> {
    let y = integrate(
        |t, y: &[f64; 8]| {
            let qt = q(t) + lambda;
            [
                y[1],
                -qt * y[0],
                y[3],
                -qt * y[2],
                y[5],
                -qt * y[4] - y[0],
                y[7],
                -qt * y[6] - y[2],
            ]
        },
        [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        t_end,
        steps,
        |_, _| {},
    )?;
    Ok(([[y[0], y[2]], [y[1], y[3]]], [[y[4], y[6]], [y[5], y[7]]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn harmonic_oscillator_fundamental_system() {
        let rho: f64 = 3.0;
        let fs = FundamentalSystem::integrate(|_| rho * rho, 2.0, 2001).unwrap();
        for &t in &[0.0, 0.123, 0.77, 1.5, 2.0] {
            let (u1, du1) = fs.u1.eval_with_slope(t);
            let (u2, du2) = fs.u2.eval_with_slope(t);
            assert_abs_diff_eq!(u1, (rho * t).cos(), epsilon = 1e-10);
            assert_abs_diff_eq!(du1, -rho * (rho * t).sin(), epsilon = 1e-8);
            assert_abs_diff_eq!(u2, (rho * t).sin() / rho, epsilon = 1e-10);
            assert_abs_diff_eq!(du2, (rho * t).cos(), epsilon = 1e-8);
            assert_abs_diff_eq!(u1 * du2 - du1 * u2, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |steps: usize| {
            let m = monodromy(|_| 4.0, 1.0, steps).unwrap();
            (m[0][0] - 2.0_f64.cos()).abs()
        };
        let ratio = err(50) / err(100);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn lambda_derivative_matches_finite_difference() {
        let q = |t: f64| 5.0 + (3.0 * t).sin();
        let lam = 0.7;
        let (_, dm) = monodromy_with_lambda_derivative(q, lam, 1.0, 800).unwrap();
        let eps = 1e-5;
        let plus = monodromy(|t| q(t) + lam + eps, 1.0, 800).unwrap();
        let minus = monodromy(|t| q(t) + lam - eps, 1.0, 800).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let fd = (plus[i][j] - minus[i][j]) / (2.0 * eps);
                assert_abs_diff_eq!(dm[i][j], fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn blowup_is_reported() {
        let r = monodromy(|_| -1e12, 40.0, 40);
        assert!(matches!(r, Err(Error::IntegratorFailure { .. })));
    }
}
