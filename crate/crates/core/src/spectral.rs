//! Smallest eigenvalues of `u'' + (a(t) + lambda) u = 0` under each boundary
//! kind, the sign classification of the Green's function they imply, and the
//! positive principal eigenfunction.
//!
//! Sampled potentials are handled by shooting. For separated and periodic
//! conditions the characteristic function has a simple first root and is
//! located by an upward scan plus bisection. The first antiperiodic
//! eigenvalue may be a double root of `Delta(lambda) + 2` (closed instability
//! gap), so it is found as the first critical point of the Floquet
//! discriminant `Delta` past the periodic eigenvalue, and only bisected on
//! `Delta + 2` when the gap is open.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::is_resonant;
use crate::ode::{self, Hermite};
use crate::problem::{uniform_grid, BoundaryKind, Potential, PotentialKind};
use crate::quadrature::bisect;

/// Eigenvalues closer to zero than this leave the sign classification
/// undetermined.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenMethod {
    ClosedForm,
    Shooting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda: f64,
    pub bc: BoundaryKind,
    pub method: EigenMethod,
}

/// Shooting parameters for sampled potentials.
#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions {
    /// RK4 steps across `[0, T]`.
    pub steps: usize,
    /// Upper bound on the scan step in `lambda`.
    pub max_scan_step: f64,
    /// Width at which bisection stops, relative to `max(1, |lambda|)`.
    pub root_tol: f64,
    /// `Delta + 2` above `-gap_tol` at its minimum counts as a closed gap.
    pub gap_tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            steps: 2000,
            max_scan_step: 0.5,
            root_tol: 1e-13,
            gap_tol: 1e-7,
        }
    }
}

fn closed_form_eigenvalue(rho: f64, t_end: f64, bc: BoundaryKind) -> f64 {
    let base = match bc {
        BoundaryKind::Periodic | BoundaryKind::Neumann => 0.0,
        BoundaryKind::Antiperiodic | BoundaryKind::Dirichlet => (PI / t_end).powi(2),
        BoundaryKind::Mixed1 | BoundaryKind::Mixed2 => (PI / (2.0 * t_end)).powi(2),
    };
    base - rho * rho
}

/// Smallest eigenvalue with default shooting options.
pub fn smallest_eigenvalue(potential: &Potential, bc: BoundaryKind) -> Result<EigenResult> {
    smallest_eigenvalue_with(potential, bc, &ShootingOptions::default())
}

pub fn smallest_eigenvalue_with(
    potential: &Potential,
    bc: BoundaryKind,
    opts: &ShootingOptions,
) -> Result<EigenResult> {
    if let PotentialKind::Constant { rho } = potential.kind() {
        return Ok(EigenResult {
            lambda: closed_form_eigenvalue(*rho, potential.period(), bc),
            bc,
            method: EigenMethod::ClosedForm,
        });
    }
    let shooter = Shooter::new(potential, opts);
    let lambda = match bc {
        BoundaryKind::Antiperiodic => shooter.first_antiperiodic()?,
        _ => shooter.first_root(bc, shooter.lo)?,
    };
    Ok(EigenResult {
        lambda,
        bc,
        method: EigenMethod::Shooting,
    })
}

struct Shooter<'a> {
    potential: &'a Potential,
    opts: &'a ShootingOptions,
    lo: f64,
    hi: f64,
    step: f64,
}

impl<'a> Shooter<'a> {
    fn new(potential: &'a Potential, opts: &'a ShootingOptions) -> Self {
        let t_end = potential.period();
        let norm = potential.sup_norm();
        let laplace = (PI / t_end).powi(2);
        Self {
            potential,
            opts,
            lo: -norm - 1.0,
            hi: norm + laplace + 1.0,
            step: opts.max_scan_step.min(laplace / 8.0),
        }
    }

    fn monodromy(&self, lambda: f64) -> Result<[[f64; 2]; 2]> {
        ode::monodromy(
            |t| self.potential.eval(t) + lambda,
            self.potential.period(),
            self.opts.steps,
        )
    }

    /// Characteristic function whose first root is the smallest eigenvalue;
    /// positive below it.
    fn characteristic(&self, bc: BoundaryKind, lambda: f64) -> Result<f64> {
        let [[u1, u2], [du1, du2]] = self.monodromy(lambda)?;
        Ok(match bc {
            BoundaryKind::Periodic => u1 + du2 - 2.0,
            BoundaryKind::Antiperiodic => u1 + du2 + 2.0,
            BoundaryKind::Dirichlet => u2,
            BoundaryKind::Neumann => du1,
            BoundaryKind::Mixed1 => u1,
            BoundaryKind::Mixed2 => du2,
        })
    }

    fn tol(&self, lambda: f64) -> f64 {
        self.opts.root_tol * lambda.abs().max(1.0)
    }

    fn bisect_on(&self, lo: f64, hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let mut failure = None;
        let root = bisect(lo, hi, self.tol(hi), |l| match f(l) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(root),
        }
    }

    fn first_root(&self, bc: BoundaryKind, start: f64) -> Result<f64> {
        let mut prev = start;
        let mut f_prev = self.characteristic(bc, prev)?;
        if f_prev <= 0.0 {
            return Err(Error::BracketingFailure {
                bc,
                lo: self.lo,
                hi: self.hi,
            });
        }
        while prev < self.hi {
            let next = (prev + self.step).min(self.hi);
            let f_next = self.characteristic(bc, next)?;
            if f_next == 0.0 {
                return Ok(next);
            }
            if f_next < 0.0 {
                return self.bisect_on(prev, next, |l| self.characteristic(bc, l));
            }
            prev = next;
            f_prev = f_next;
        }
        let _ = f_prev;
        Err(Error::BracketingFailure {
            bc,
            lo: self.lo,
            hi: self.hi,
        })
    }

    fn discriminant_slope(&self, lambda: f64) -> Result<(f64, f64)> {
        let (m, dm) = ode::monodromy_with_lambda_derivative(
            |t| self.potential.eval(t),
            lambda,
            self.potential.period(),
            self.opts.steps,
        )?;
        Ok((m[0][0] + m[1][1], dm[0][0] + dm[1][1]))
    }

    fn first_antiperiodic(&self) -> Result<f64> {
        let bc = BoundaryKind::Antiperiodic;
        let lambda_p = self.first_root(BoundaryKind::Periodic, self.lo)?;
        // Delta decreases through the first stability band; its first
        // critical point lies inside the closure of the first gap.
        let mut prev = lambda_p;
        let mut crit = None;
        while prev < self.hi {
            let next = (prev + self.step).min(self.hi);
            let (disc, slope) = self.discriminant_slope(next)?;
            if disc + 2.0 < -self.opts.gap_tol && slope < 0.0 {
                // Crossed -2 while still decreasing: open gap, simple root.
                return self.bisect_on(prev, next, |l| self.characteristic(bc, l));
            }
            if slope >= 0.0 {
                crit = Some(self.bisect_on(prev, next, |l| Ok(self.discriminant_slope(l)?.1))?);
                break;
            }
            prev = next;
        }
        let crit = crit.ok_or(Error::BracketingFailure {
            bc,
            lo: lambda_p,
            hi: self.hi,
        })?;
        let depth = self.characteristic(bc, crit)?;
        if depth >= -self.opts.gap_tol {
            Ok(crit)
        } else {
            self.bisect_on(lambda_p, crit, |l| self.characteristic(bc, l))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignVerdict {
    NonPositive,
    NonNegative,
    ChangesSign,
}

/// Sign of the Green's function together with the eigenvalues that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignClass {
    pub verdict: SignVerdict,
    pub bc: BoundaryKind,
    pub witnesses: Vec<EigenResult>,
}

/// Classifies the sign of the Green's function from the smallest eigenvalues.
///
/// Periodic: `lambda_P > 0` gives `G <= 0`; `lambda_P < 0 <= lambda_A` gives
/// `G >= 0`; `lambda_A < 0` gives a sign change. Neumann uses `lambda_N` and
/// the two mixed eigenvalues; Dirichlet and mixed kinds use their own
/// smallest eigenvalue. Antiperiodic kernels are not covered.
pub fn classify_sign(potential: &Potential, bc: BoundaryKind) -> Result<SignClass> {
    classify_sign_with(potential, bc, &ShootingOptions::default())
}

pub fn classify_sign_with(
    potential: &Potential,
    bc: BoundaryKind,
    opts: &ShootingOptions,
) -> Result<SignClass> {
    if bc == BoundaryKind::Antiperiodic {
        return Err(Error::UnsupportedBoundaryKind(bc));
    }
    if is_resonant(potential, bc) {
        return Err(Error::ResonantPotential {
            bc,
            determinant: 0.0,
        });
    }
    let eig = |kind| smallest_eigenvalue_with(potential, kind, opts);
    let nonzero = |e: &EigenResult| {
        if e.lambda.abs() < ZERO_EIGENVALUE_TOL {
            Err(Error::Undetermined {
                which: eigen_name(e.bc),
                value: e.lambda,
            })
        } else {
            Ok(e.lambda)
        }
    };
    let (verdict, witnesses) = match bc {
        BoundaryKind::Periodic => {
            let p = eig(BoundaryKind::Periodic)?;
            let lp = nonzero(&p)?;
            if lp > 0.0 {
                (SignVerdict::NonPositive, vec![p])
            } else {
                let a = eig(BoundaryKind::Antiperiodic)?;
                let la = nonzero(&a)?;
                let v = if la > 0.0 {
                    SignVerdict::NonNegative
                } else {
                    SignVerdict::ChangesSign
                };
                (v, vec![p, a])
            }
        }
        BoundaryKind::Neumann => {
            let n = eig(BoundaryKind::Neumann)?;
            let ln = nonzero(&n)?;
            if ln > 0.0 {
                (SignVerdict::NonPositive, vec![n])
            } else {
                let m1 = eig(BoundaryKind::Mixed1)?;
                let m2 = eig(BoundaryKind::Mixed2)?;
                let lo = nonzero(&m1)?.min(nonzero(&m2)?);
                let v = if lo < 0.0 {
                    SignVerdict::ChangesSign
                } else {
                    SignVerdict::NonNegative
                };
                (v, vec![n, m1, m2])
            }
        }
        BoundaryKind::Dirichlet | BoundaryKind::Mixed1 | BoundaryKind::Mixed2 => {
            let e = eig(bc)?;
            let l = nonzero(&e)?;
            let v = if l > 0.0 {
                SignVerdict::NonPositive
            } else {
                SignVerdict::ChangesSign
            };
            (v, vec![e])
        }
        BoundaryKind::Antiperiodic => unreachable!(),
    };
    Ok(SignClass {
        verdict,
        bc,
        witnesses,
    })
}

fn eigen_name(bc: BoundaryKind) -> &'static str {
    match bc {
        BoundaryKind::Periodic => "lambda_P",
        BoundaryKind::Antiperiodic => "lambda_A",
        BoundaryKind::Dirichlet => "lambda_D",
        BoundaryKind::Neumann => "lambda_N",
        BoundaryKind::Mixed1 => "lambda_M1",
        BoundaryKind::Mixed2 => "lambda_M2",
    }
}

/// The positive eigenfunction of the smallest eigenvalue, normalized to
/// maximum 1 and tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction {
    bc: BoundaryKind,
    lambda: f64,
    table: Hermite,
}

impl Eigenfunction {
    pub fn bc(&self) -> BoundaryKind {
        self.bc
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples(&self) -> &[f64] {
        self.table.values()
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.table.t_end(), self.table.len())
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.table.eval(t)
    }

    pub fn eval_with_slope(&self, t: f64) -> (f64, f64) {
        self.table.eval_with_slope(t)
    }
}

pub fn principal_eigenfunction(
    potential: &Potential,
    bc: BoundaryKind,
    grid_size: usize,
) -> Result<Eigenfunction> {
    principal_eigenfunction_with(potential, bc, grid_size, &ShootingOptions::default())
}

pub fn principal_eigenfunction_with(
    potential: &Potential,
    bc: BoundaryKind,
    grid_size: usize,
    opts: &ShootingOptions,
) -> Result<Eigenfunction> {
    if bc == BoundaryKind::Antiperiodic {
        return Err(Error::UnsupportedBoundaryKind(bc));
    }
    if grid_size < 3 {
        return Err(Error::InvalidInput(format!(
            "grid size must be at least 3, got {grid_size}"
        )));
    }
    let t_end = potential.period();
    let lambda = smallest_eigenvalue_with(potential, bc, opts)?.lambda;
    let grid = uniform_grid(t_end, grid_size);

    let (mut values, mut slopes): (Vec<f64>, Vec<f64>) = if potential.rho().is_some() {
        let k = match bc {
            BoundaryKind::Dirichlet => PI / t_end,
            BoundaryKind::Mixed1 | BoundaryKind::Mixed2 => PI / (2.0 * t_end),
            _ => 0.0,
        };
        grid.iter()
            .map(|&t| match bc {
                BoundaryKind::Periodic | BoundaryKind::Neumann => (1.0, 0.0),
                BoundaryKind::Dirichlet | BoundaryKind::Mixed2 => {
                    ((k * t).sin(), k * (k * t).cos())
                }
                _ => ((k * t).cos(), -k * (k * t).sin()),
            })
            .unzip()
    } else {
        let start = match bc {
            BoundaryKind::Dirichlet | BoundaryKind::Mixed2 => [0.0, 1.0],
            BoundaryKind::Neumann | BoundaryKind::Mixed1 => [1.0, 0.0],
            _ => {
                let m = ode::monodromy(|t| potential.eval(t) + lambda, t_end, opts.steps)?;
                periodic_initial_data(m)
            }
        };
        // Substeps keep the trajectory at least as fine as the shooting run.
        let sub = opts.steps.div_ceil(grid_size - 1).max(1);
        let mut values = vec![0.0; grid_size];
        let mut slopes = vec![0.0; grid_size];
        ode::integrate(
            |t, y: &[f64; 2]| [y[1], -(potential.eval(t) + lambda) * y[0]],
            start,
            t_end,
            sub * (grid_size - 1),
            |i, y| {
                if i % sub == 0 {
                    values[i / sub] = y[0];
                    slopes[i / sub] = y[1];
                }
            },
        )?;
        (values, slopes)
    };

    let peak = values
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap();
    let scale = 1.0 / peak;
    values.iter_mut().for_each(|v| *v *= scale);
    slopes.iter_mut().for_each(|v| *v *= scale);

    let (first, last) = (
        usize::from(bc.vanishes_at_start()),
        grid_size - usize::from(bc.vanishes_at_end()),
    );
    if let Some(i) = (first..last).find(|&i| values[i] <= 0.0) {
        return Err(Error::NotPositive {
            t: grid[i],
            value: values[i],
        });
    }
    Ok(Eigenfunction {
        bc,
        lambda,
        table: Hermite::new(t_end, values, slopes),
    })
}

/// Initial data `(u(0), u'(0))` of a periodic solution, i.e. a null vector
/// of `M - I` for the monodromy `M`.
fn periodic_initial_data(m: [[f64; 2]; 2]) -> [f64; 2] {
    let r0 = [m[0][0] - 1.0, m[0][1]];
    let r1 = [m[1][0], m[1][1] - 1.0];
    let n0 = r0[0].hypot(r0[1]);
    let n1 = r1[0].hypot(r1[1]);
    let r = if n0 >= n1 { r0 } else { r1 };
    if r[0] == 0.0 && r[1] == 0.0 {
        return [1.0, 0.0];
    }
    [-r[1], r[0]]
}
