//! Linear solves `u = int G sigma` and the fixed-point problem
//! `u = T u`, `(T u)(t) = int G(t, s) f(s, u(s)) ds`.
//!
//! Kernel applications use the separable form
//! `u(t) = phi(t)^T (A I(T) + J I(t))`, `I(t) = int_0^t phi(s) sigma(s) ds`,
//! with Gauss-Legendre on every grid cell, so one application costs O(n).
//! The derivative `u'(t) = phi'(t)^T (A I(T) + J I(t))` comes for free and
//! feeds the cubic interpolation of iterates between nodes.
//! [`apply_direct`] re-integrates `G(t, s) sigma(s)` pointwise and serves as
//! the independent check.

use serde::{Deserialize, Serialize};

use crate::cone::{cone_membership, ConeConstants};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::greens::GreensKernel;
use crate::ode::Hermite;
use crate::problem::{uniform_grid, BoundaryKind, Potential};
use crate::quadrature::GaussLegendre;

/// Interior samples within this distance of zero count as zero.
pub const SIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Positivity {
    Positive,
    Nonnegative,
    ChangesSign,
    Negative,
}

/// Sign pattern of the interior samples.
pub fn classify_positivity(values: &[f64]) -> Positivity {
    let interior = if values.len() > 2 {
        &values[1..values.len() - 1]
    } else {
        values
    };
    let min = interior.iter().copied().fold(f64::INFINITY, f64::min);
    let max = interior.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min > SIGN_TOL {
        Positivity::Positive
    } else if min >= -SIGN_TOL {
        Positivity::Nonnegative
    } else if max > SIGN_TOL {
        Positivity::ChangesSign
    } else {
        Positivity::Negative
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionProfile {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Sup norm of `u'' + a u - rhs` by centered second differences.
    #[serde(with = "crate::extended")]
    pub residual_norm: f64,
    /// Largest boundary-condition residual.
    #[serde(with = "crate::extended")]
    pub bc_error: f64,
    pub positivity: Positivity,
    /// Kernel applications (0 for linear solves).
    pub iterations: usize,
    pub converged: bool,
    /// `sup |u - T u|` by direct re-quadrature; nonlinear solves only.
    #[serde(with = "crate::extended::option")]
    pub fixed_point_residual: Option<f64>,
}

impl SolutionProfile {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cubic interpolant through values and slopes.
    pub fn interpolant(&self) -> Hermite {
        Hermite::new(
            *self.grid.last().unwrap(),
            self.values.clone(),
            self.slopes.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub grid_size: usize,
    /// Gauss-Legendre points per grid cell.
    pub order: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid_size: crate::greens::DEFAULT_GRID,
            order: 8,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    /// Damping `theta` in `u <- (1 - theta) u + theta T u`.
    pub theta: f64,
    pub max_iter: usize,
    /// Stop when `sup |u_{k+1} - u_k| <= tol`.
    pub tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

/// Gauss nodes of every grid cell with the fundamental system evaluated there.
struct Separable<'a> {
    kernel: &'a GreensKernel,
    grid: Vec<f64>,
    /// `(cell, s, weight, phi(s))`
    nodes: Vec<(usize, f64, f64, [f64; 2])>,
    basis: Vec<([f64; 2], [f64; 2])>,
}

impl<'a> Separable<'a> {
    fn new(kernel: &'a GreensKernel, opts: &SolveOptions) -> Result<Self> {
        if opts.grid_size < 3 {
            return Err(Error::InvalidInput(format!(
                "grid size must be at least 3, got {}",
                opts.grid_size
            )));
        }
        let grid = uniform_grid(kernel.period(), opts.grid_size);
        let rule = GaussLegendre::new(opts.order);
        let nodes = grid
            .windows(2)
            .enumerate()
            .flat_map(|(i, w)| {
                rule.mapped(w[0], w[1])
                    .map(|(s, wt)| (i, s, wt, kernel.basis_at(s).0))
                    .collect::<Vec<_>>()
            })
            .collect();
        let basis = grid.iter().map(|&t| kernel.basis_at(t)).collect();
        Ok(Self {
            kernel,
            grid,
            nodes,
            basis,
        })
    }

    fn gauss_points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().map(|&(i, s, _, _)| (i, s))
    }

    /// Values and slopes of `int G(t_i, s) sigma(s) ds`; `sigma` is given at
    /// the Gauss points in the order of [`Self::gauss_points`].
    fn apply(&self, sigma: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.len();
        let mut cumulative = vec![[0.0; 2]; n];
        let mut acc = [0.0; 2];
        let mut cell = 0;
        for (&(i, _, w, phi), &sg) in self.nodes.iter().zip(sigma) {
            while cell < i {
                cell += 1;
                cumulative[cell] = acc;
            }
            acc[0] += w * phi[0] * sg;
            acc[1] += w * phi[1] * sg;
        }
        while cell + 1 < n {
            cell += 1;
            cumulative[cell] = acc;
        }
        cumulative[n - 1] = acc;
        let a = self.kernel.coupling_matrix();
        let total = [
            a[0][0] * acc[0] + a[0][1] * acc[1],
            a[1][0] * acc[0] + a[1][1] * acc[1],
        ];
        let mut values = vec![0.0; n];
        let mut slopes = vec![0.0; n];
        for i in 0..n {
            let c = [total[0] - cumulative[i][1], total[1] + cumulative[i][0]];
            let (p, dp) = self.basis[i];
            values[i] = p[0] * c[0] + p[1] * c[1];
            slopes[i] = dp[0] * c[0] + dp[1] * c[1];
        }
        (values, slopes)
    }
}

/// `int_0^T G(t_i, s) sigma(s) ds` on the grid by direct quadrature of the
/// kernel, split at `s = t_i`.
pub fn apply_direct(
    kernel: &GreensKernel,
    grid: &[f64],
    sigma: impl Fn(f64) -> f64 + Sync,
    panels: usize,
) -> Vec<f64> {
    use rayon::prelude::*;
    let rule = GaussLegendre::new(8);
    let t_end = kernel.period();
    grid.par_iter()
        .map(|&t| {
            rule.composite_with_breaks(&[0.0, t, t_end], panels, |s| kernel.eval(t, s) * sigma(s))
        })
        .collect()
}

/// Sup norm of `u'' + a u - rhs(t, u)` over interior nodes.
pub fn ode_residual(
    grid: &[f64],
    values: &[f64],
    potential: &Potential,
    rhs: impl Fn(f64, f64) -> f64,
) -> f64 {
    let n = grid.len();
    let h = grid[n - 1] / (n - 1) as f64;
    (1..n - 1)
        .map(|i| {
            let d2 = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
            (d2 + potential.eval(grid[i]) * values[i] - rhs(grid[i], values[i])).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest boundary-condition residual from end values and slopes.
pub fn boundary_error(bc: BoundaryKind, values: &[f64], slopes: &[f64]) -> f64 {
    let n = values.len();
    let r = bc.residuals([values[0], slopes[0], values[n - 1], slopes[n - 1]]);
    r[0].abs().max(r[1].abs())
}

/// Iteration record carried into a profile.
struct Trace {
    iterations: usize,
    converged: bool,
    fixed_point_residual: Option<f64>,
}

fn finish(
    kernel: &GreensKernel,
    grid: Vec<f64>,
    (values, slopes): (Vec<f64>, Vec<f64>),
    rhs: impl Fn(f64, f64) -> f64,
    trace: Trace,
) -> SolutionProfile {
    let residual_norm = ode_residual(&grid, &values, kernel.potential(), rhs);
    let bc_error = boundary_error(kernel.bc(), &values, &slopes);
    let positivity = classify_positivity(&values);
    SolutionProfile {
        grid,
        values,
        slopes,
        residual_norm,
        bc_error,
        positivity,
        iterations: trace.iterations,
        converged: trace.converged,
        fixed_point_residual: trace.fixed_point_residual,
    }
}

/// Solves `u'' + a u = sigma` under the kernel's boundary conditions.
pub fn solve_linear(
    kernel: &GreensKernel,
    sigma: impl Fn(f64) -> f64,
    opts: &SolveOptions,
) -> Result<SolutionProfile> {
    let sep = Separable::new(kernel, opts)?;
    let mut samples = Vec::with_capacity(sep.nodes.len());
    for (_, s) in sep.gauss_points() {
        let v = sigma(s);
        if !v.is_finite() {
            return Err(Error::QuadratureFailure { t: f64::NAN, s });
        }
        samples.push(v);
    }
    let (values, slopes) = sep.apply(&samples);
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::QuadratureFailure {
            t: sep.grid[i],
            s: f64::NAN,
        });
    }
    let grid = sep.grid.clone();
    Ok(finish(
        kernel,
        grid,
        (values, slopes),
        |t, _| sigma(t),
        Trace {
            iterations: 0,
            converged: true,
            fixed_point_residual: None,
        },
    ))
}

/// Damped Picard iteration for `u = T u` starting from `T 0`.
///
/// Non-convergence is reported through `converged = false` on the last
/// iterate rather than as an error.
pub fn solve_nonlinear(
    kernel: &GreensKernel,
    f: &Expression,
    opts: &SolveOptions,
    picard: &PicardOptions,
) -> Result<SolutionProfile> {
    if !(picard.theta > 0.0 && picard.theta <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "damping must lie in (0, 1], got {}",
            picard.theta
        )));
    }
    let t_end = kernel.period();
    let sep = Separable::new(kernel, opts)?;
    let h = t_end / (sep.grid.len() - 1) as f64;
    let points: Vec<(usize, f64)> = sep.gauss_points().collect();

    let apply_t = |values: &[f64], slopes: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut sigma = Vec::with_capacity(points.len());
        for &(i, s) in &points {
            let u = hermite_cell(&sep.grid, values, slopes, h, i, s);
            let v = f.eval(s, u, t_end);
            if !v.is_finite() {
                return Err(Error::EvaluationFailure { t: s, x: u });
            }
            sigma.push(v);
        }
        Ok(sep.apply(&sigma))
    };

    let n = sep.grid.len();
    let (mut values, mut slopes) = apply_t(&vec![0.0; n], &vec![0.0; n])?;
    let mut iterations = 1;
    let mut converged = !f.depends_on_x();
    while !converged && iterations < picard.max_iter {
        let (tv, ts) = apply_t(&values, &slopes)?;
        iterations += 1;
        let mut diff = 0.0_f64;
        for i in 0..n {
            let next = (1.0 - picard.theta) * values[i] + picard.theta * tv[i];
            diff = diff.max((next - values[i]).abs());
            values[i] = next;
            slopes[i] = (1.0 - picard.theta) * slopes[i] + picard.theta * ts[i];
        }
        if !diff.is_finite() {
            break;
        }
        converged = diff <= picard.tol;
    }

    let interp = Hermite::new(t_end, values.clone(), slopes.clone());
    let direct = apply_direct(kernel, &sep.grid, |s| f.eval(s, interp.eval(s), t_end), 64);
    let fixed_point_residual = values
        .iter()
        .zip(&direct)
        .map(|(u, tu)| (u - tu).abs())
        .fold(0.0, f64::max);
    let grid = sep.grid.clone();
    Ok(finish(
        kernel,
        grid,
        (values, slopes),
        |t, u| f.eval(t, u, t_end),
        Trace {
            iterations,
            converged,
            fixed_point_residual: Some(fixed_point_residual),
        },
    ))
}

fn hermite_cell(grid: &[f64], values: &[f64], slopes: &[f64], h: f64, i: usize, s: f64) -> f64 {
    let x = (s - grid[i]) / h;
    let (y0, y1) = (values[i], values[i + 1]);
    let (m0, m1) = (slopes[i] * h, slopes[i + 1] * h);
    let x2 = x * x;
    let x3 = x2 * x;
    (2.0 * x3 - 3.0 * x2 + 1.0) * y0
        + (x3 - 2.0 * x2 + x) * m0
        + (-2.0 * x3 + 3.0 * x2) * y1
        + (x3 - x2) * m1
}

/// Independent re-check of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    #[serde(with = "crate::extended")]
    pub residual_norm: f64,
    #[serde(with = "crate::extended")]
    pub bc_error: f64,
    pub positivity: Positivity,
    /// Set when cone constants are supplied.
    pub in_cone: Option<bool>,
}

/// Recomputes the ODE residual, the boundary error and (optionally) cone
/// membership for `u'' + a u = rhs(t, u)`.
pub fn verify_solution(
    profile: &SolutionProfile,
    potential: &Potential,
    bc: BoundaryKind,
    rhs: impl Fn(f64, f64) -> f64,
    cone: Option<&ConeConstants>,
) -> Verification {
    Verification {
        residual_norm: ode_residual(&profile.grid, &profile.values, potential, rhs),
        bc_error: boundary_error(bc, &profile.values, &profile.slopes),
        positivity: classify_positivity(&profile.values),
        in_cone: cone.map(|c| cone_membership(&profile.grid, &profile.values, c)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn kernel(rho: f64, bc: BoundaryKind) -> GreensKernel {
        GreensKernel::build(&Potential::constant(rho, 1.0).unwrap(), bc, 2001).unwrap()
    }

    #[test]
    fn constant_forcing_gives_unit_solution() {
        let rho = 1.5 * PI;
        let p = solve_linear(
            &kernel(rho, BoundaryKind::Periodic),
            |_| rho * rho,
            &Default::default(),
        )
        .unwrap();
        for v in &p.values {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
        assert!(p.bc_error <= 1e-12);
        assert!(p.residual_norm <= 1e-6);
    }

    #[test]
    fn dirichlet_polynomial_forcing_matches_exact_solution() {
        // u'' + rho^2 u = 1, u(0) = u(1) = 0.
        let rho: f64 = 60f64.sqrt();
        let exact = |t: f64| (1.0 - (rho * (t - 0.5)).cos() / (0.5 * rho).cos()) / (rho * rho);
        let p = solve_linear(
            &kernel(rho, BoundaryKind::Dirichlet),
            |_| 1.0,
            &Default::default(),
        )
        .unwrap();
        for (t, v) in p.grid.iter().zip(&p.values) {
            assert_abs_diff_eq!(*v, exact(*t), epsilon = 1e-12);
        }
        assert!(p.bc_error <= 1e-12);
    }

    #[test]
    fn separable_and_direct_agree() {
        let rho = 60f64.sqrt();
        let k = kernel(rho, BoundaryKind::Dirichlet);
        let opts = SolveOptions {
            grid_size: 201,
            ..Default::default()
        };
        let sigma = |t: f64| t * (1.0 - t) + (3.0 * t).sin();
        let p = solve_linear(&k, sigma, &opts).unwrap();
        let d = apply_direct(&k, &p.grid, sigma, 32);
        for (a, b) in p.values.iter().zip(&d) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_forcing() {
        let k = kernel(2.0, BoundaryKind::Neumann);
        let p = solve_linear(&k, |_| 0.0, &Default::default()).unwrap();
        assert!(p.values.iter().all(|v| *v == 0.0));
        let f = Expression::parse("0").unwrap();
        let q = solve_nonlinear(&k, &f, &Default::default(), &Default::default()).unwrap();
        assert!(q.converged);
        assert_eq!(q.iterations, 1);
        assert!(q.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn x_independent_nonlinearity_is_one_linear_solve() {
        let k = kernel(60f64.sqrt(), BoundaryKind::Dirichlet);
        let f = Expression::parse("t*(1-t)").unwrap();
        let opts = SolveOptions::default();
        let a = solve_nonlinear(&k, &f, &opts, &Default::default()).unwrap();
        let b = solve_linear(&k, |t| t * (1.0 - t), &opts).unwrap();
        assert_eq!(a.iterations, 1);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
        assert_eq!(a.positivity, Positivity::Positive);
    }

    #[test]
    fn picard_converges_for_bounded_nonlinearity() {
        let k = kernel(1.5 * PI, BoundaryKind::Periodic);
        let f = Expression::parse("(2 + sin(x))/3").unwrap();
        let picard = PicardOptions::default();
        let p = solve_nonlinear(&k, &f, &Default::default(), &picard).unwrap();
        assert!(p.converged, "{} iterations", p.iterations);
        assert!(p.fixed_point_residual.unwrap() <= 10.0 * picard.tol);
        assert!(p.residual_norm <= 1e-5);
        assert!(matches!(
            p.positivity,
            Positivity::Positive | Positivity::Nonnegative
        ));
    }

    #[test]
    fn nonconvergence_is_reported() {
        let k = kernel(1.9 * PI, BoundaryKind::Periodic);
        let f = Expression::parse("1 + 5000*x*x").unwrap();
        let picard = PicardOptions {
            max_iter: 3,
            ..Default::default()
        };
        let p = solve_nonlinear(
            &k,
            &f,
            &SolveOptions {
                grid_size: 101,
                order: 8,
            },
            &picard,
        );
        match p {
            Ok(p) => assert!(!p.converged),
            Err(e) => assert!(matches!(e, Error::EvaluationFailure { .. })),
        }
    }

    #[test]
    fn positivity_classes() {
        assert_eq!(
            classify_positivity(&[0.0, 1.0, 2.0, 0.0]),
            Positivity::Positive
        );
        assert_eq!(
            classify_positivity(&[0.0, 0.0, 2.0, 0.0]),
            Positivity::Nonnegative
        );
        assert_eq!(
            classify_positivity(&[0.0, -1.0, 2.0, 0.0]),
            Positivity::ChangesSign
        );
        assert_eq!(
            classify_positivity(&[0.0, -1.0, -2.0, 0.0]),
            Positivity::Negative
        );
    }
}
