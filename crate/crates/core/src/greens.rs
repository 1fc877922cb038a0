//! Green's functions of `u'' + a(t) u = sigma` on `[0, T]`.
//!
//! Every kernel is stored in separable form
//!
//! ```text
//! G(t, s) = phi(t)^T (A + H(t - s) J) phi(s),   phi = (u1, u2),
//! ```
//!
//! where `u1, u2` is the normalized fundamental system (Wronskian 1),
//! `J = [[0, -1], [1, 0]]` generates the causal part
//! `u1(s) u2(t) - u1(t) u2(s)`, and the coupling matrix `A` enforces the
//! boundary conditions. Closed-form kernels (constant potential, periodic or
//! Dirichlet) evaluate the explicit trigonometric formulas instead, and keep
//! the analytic fundamental system `cos(rho t)`, `sin(rho t) / rho` for the
//! separable solvers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::FundamentalSystem;
use crate::problem::{BoundaryKind, Potential, PotentialKind};

/// Default number of integration nodes for numeric kernels.
pub const DEFAULT_GRID: usize = 2001;

/// Relative threshold on the boundary determinant below which a problem is
/// treated as resonant.
pub const RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelForm {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone)]
enum Basis {
    Trig { rho: f64 },
    Tabulated(FundamentalSystem),
}

impl Basis {
    /// `([u1(t), u2(t)], [u1'(t), u2'(t)])`.
    fn eval(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        match self {
            Basis::Trig { rho } => {
                let (s, c) = (rho * t).sin_cos();
                ([c, s / rho], [-rho * s, c])
            }
            Basis::Tabulated(fs) => {
                let (u1, du1) = fs.u1.eval_with_slope(t);
                let (u2, du2) = fs.u2.eval_with_slope(t);
                ([u1, u2], [du1, du2])
            }
        }
    }
}

/// Boundary coupling derived from the monodromy matrix.
#[derive(Debug, Clone, Copy)]
struct Coupling {
    matrix: [[f64; 2]; 2],
    determinant: f64,
    scale: f64,
}

fn coupling(bc: BoundaryKind, m: [[f64; 2]; 2]) -> Coupling {
    let [[u1t, u2t], [du1t, du2t]] = m;
    let rows = bc.rows();
    let mut b = [[0.0; 2]; 2];
    let mut r = [[0.0; 2]; 2];
    for (i, [c0, d0, ct, dt]) in rows.into_iter().enumerate() {
        b[i] = [c0 + ct * u1t + dt * du1t, d0 + ct * u2t + dt * du2t];
        r[i] = [ct * u2t + dt * du2t, -(ct * u1t + dt * du1t)];
    }
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    let scale = m
        .iter()
        .flatten()
        .fold(1.0_f64, |acc, v| acc.max(v.abs()))
        .powi(2);
    // A = -B^{-1} R
    let inv = [[b[1][1], -b[0][1]], [-b[1][0], b[0][0]]];
    let mut a = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            a[i][j] = -(inv[i][0] * r[0][j] + inv[i][1] * r[1][j]) / det;
        }
    }
    Coupling {
        matrix: a,
        determinant: det,
        scale,
    }
}

fn trig_monodromy(rho: f64, t_end: f64) -> [[f64; 2]; 2] {
    let (s, c) = (rho * t_end).sin_cos();
    [[c, s / rho], [-rho * s, c]]
}

/// Whether `rho T / pi` sits on a resonance of the constant-coefficient
/// problem for `bc`.
fn constant_is_resonant(rho: f64, t_end: f64, bc: BoundaryKind) -> bool {
    let x = rho * t_end / PI;
    let tol = RESONANCE_TOL * x.max(1.0);
    let near = |offset: f64, step: f64, min_k: f64| {
        let k = ((x - offset) / step).round().max(min_k);
        (x - (offset + step * k)).abs() <= tol
    };
    match bc {
        BoundaryKind::Periodic => near(0.0, 2.0, 0.0),
        BoundaryKind::Antiperiodic => near(1.0, 2.0, 0.0),
        BoundaryKind::Dirichlet => near(0.0, 1.0, 1.0),
        BoundaryKind::Neumann => near(0.0, 1.0, 0.0),
        BoundaryKind::Mixed1 | BoundaryKind::Mixed2 => near(0.5, 1.0, 0.0),
    }
}

/// Whether `u'' + a u = 0` with conditions `bc` has a nontrivial solution.
///
/// Constant potentials use the explicit resonance set; sampled potentials
/// use the boundary determinant of a fundamental system on `DEFAULT_GRID`
/// nodes.
pub fn is_resonant(potential: &Potential, bc: BoundaryKind) -> bool {
    match potential.kind() {
        PotentialKind::Constant { rho } => constant_is_resonant(*rho, potential.period(), bc),
        PotentialKind::Sampled { .. } => {
            match FundamentalSystem::integrate(
                |t| potential.eval(t),
                potential.period(),
                DEFAULT_GRID,
            ) {
                Ok(fs) => {
                    let c = coupling(bc, fs.monodromy());
                    c.determinant.abs() < RESONANCE_TOL * c.scale
                }
                Err(_) => true,
            }
        }
    }
}

fn check_point(t: f64, s: f64, t_end: f64) -> Result<()> {
    let slack = 1e-12 * t_end;
    let ok = |v: f64| v >= -slack && v <= t_end + slack;
    if ok(t) && ok(s) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!(
            "(t, s) = ({t}, {s}) outside [0, {t_end}]^2"
        )))
    }
}

fn check_constant(rho: f64, t_end: f64, bc: BoundaryKind) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0 && t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidPotential(format!(
            "need rho > 0 and T > 0, got rho = {rho}, T = {t_end}"
        )));
    }
    if constant_is_resonant(rho, t_end, bc) {
        let c = coupling(bc, trig_monodromy(rho, t_end));
        return Err(Error::ResonantPotential {
            bc,
            determinant: c.determinant,
        });
    }
    Ok(())
}

fn periodic_formula(rho: f64, t_end: f64, t: f64, s: f64) -> f64 {
    let d = if s <= t { t - s } else { s - t };
    ((rho * d).sin() + (rho * (t_end - d)).sin()) / (2.0 * rho * (1.0 - (rho * t_end).cos()))
}

fn dirichlet_formula(rho: f64, t_end: f64, t: f64, s: f64) -> f64 {
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    -(rho * lo).sin() * (rho * (t_end - hi)).sin() / (rho * (rho * t_end).sin())
}

/// Periodic Green's function for `a = rho^2`.
pub fn greens_periodic_constant(rho: f64, t_end: f64, t: f64, s: f64) -> Result<f64> {
    check_constant(rho, t_end, BoundaryKind::Periodic)?;
    check_point(t, s, t_end)?;
    Ok(periodic_formula(rho, t_end, t, s))
}

/// Dirichlet Green's function for `a = rho^2`.
pub fn greens_dirichlet_constant(rho: f64, t_end: f64, t: f64, s: f64) -> Result<f64> {
    check_constant(rho, t_end, BoundaryKind::Dirichlet)?;
    check_point(t, s, t_end)?;
    Ok(dirichlet_formula(rho, t_end, t, s))
}

/// An evaluable Green's function on `[0, T]^2`. Immutable once built.
#[derive(Debug, Clone)]
pub struct GreensKernel {
    potential: Potential,
    bc: BoundaryKind,
    form: KernelForm,
    basis: Basis,
    coupling: Coupling,
}

impl GreensKernel {
    /// Closed-form kernel; available for constant potentials with periodic or
    /// Dirichlet conditions.
    pub fn closed_form(potential: &Potential, bc: BoundaryKind) -> Result<Self> {
        let rho = potential.rho().ok_or_else(|| {
            Error::InvalidInput("closed-form kernels need a constant potential".into())
        })?;
        if !matches!(bc, BoundaryKind::Periodic | BoundaryKind::Dirichlet) {
            return Err(Error::UnsupportedBoundaryKind(bc));
        }
        let t_end = potential.period();
        check_constant(rho, t_end, bc)?;
        Ok(Self {
            potential: potential.clone(),
            bc,
            form: KernelForm::ClosedForm,
            basis: Basis::Trig { rho },
            coupling: coupling(bc, trig_monodromy(rho, t_end)),
        })
    }

    /// Kernel assembled from an RK4 fundamental system on `grid_size` nodes.
    pub fn numeric(potential: &Potential, bc: BoundaryKind, grid_size: usize) -> Result<Self> {
        if grid_size < 3 {
            return Err(Error::InvalidInput(format!(
                "grid size must be at least 3, got {grid_size}"
            )));
        }
        let fs =
            FundamentalSystem::integrate(|t| potential.eval(t), potential.period(), grid_size)?;
        let c = coupling(bc, fs.monodromy());
        if !(c.determinant.abs() >= RESONANCE_TOL * c.scale) {
            return Err(Error::ResonantPotential {
                bc,
                determinant: c.determinant,
            });
        }
        Ok(Self {
            potential: potential.clone(),
            bc,
            form: KernelForm::Numeric,
            basis: Basis::Tabulated(fs),
            coupling: c,
        })
    }

    /// Closed form when one exists, numeric otherwise.
    pub fn build(potential: &Potential, bc: BoundaryKind, grid_size: usize) -> Result<Self> {
        match (potential.rho(), bc) {
            (Some(_), BoundaryKind::Periodic | BoundaryKind::Dirichlet) => {
                Self::closed_form(potential, bc)
            }
            _ => Self::numeric(potential, bc, grid_size),
        }
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn bc(&self) -> BoundaryKind {
        self.bc
    }

    pub fn form(&self) -> KernelForm {
        self.form
    }

    pub fn period(&self) -> f64 {
        self.potential.period()
    }

    /// `G(t, s)`; arguments are clamped to `[0, T]`.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let t_end = self.period();
        let t = t.clamp(0.0, t_end);
        let s = s.clamp(0.0, t_end);
        match (self.form, &self.basis) {
            (KernelForm::ClosedForm, Basis::Trig { rho }) => match self.bc {
                BoundaryKind::Periodic => periodic_formula(*rho, t_end, t, s),
                _ => dirichlet_formula(*rho, t_end, t, s),
            },
            _ => self.eval_separable(t, s),
        }
    }

    /// `G(t, s)` from the separable representation.
    pub fn eval_separable(&self, t: f64, s: f64) -> f64 {
        let (pt, _) = self.basis.eval(t);
        let (ps, _) = self.basis.eval(s);
        let m = self.middle(s <= t);
        pt[0] * (m[0][0] * ps[0] + m[0][1] * ps[1]) + pt[1] * (m[1][0] * ps[0] + m[1][1] * ps[1])
    }

    fn middle(&self, causal: bool) -> [[f64; 2]; 2] {
        let mut m = self.coupling.matrix;
        if causal {
            m[0][1] -= 1.0;
            m[1][0] += 1.0;
        }
        m
    }

    /// Fundamental system and its derivative at `t`.
    pub fn basis_at(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        self.basis.eval(t)
    }

    /// Coupling matrix `A` of the separable representation.
    pub fn coupling_matrix(&self) -> [[f64; 2]; 2] {
        self.coupling.matrix
    }

    /// Boundary determinant used for the resonance test.
    pub fn boundary_determinant(&self) -> f64 {
        self.coupling.determinant
    }

    /// Positive and negative parts `G+ = max(G, 0)`, `G- = max(-G, 0)`.
    pub fn parts(&self) -> (KernelPart<'_>, KernelPart<'_>) {
        (
            KernelPart {
                kernel: self,
                negative: false,
            },
            KernelPart {
                kernel: self,
                negative: true,
            },
        )
    }
}

/// A borrowed view of the positive or negative part of a kernel.
#[derive(Debug, Clone, Copy)]
pub struct KernelPart<'a> {
    kernel: &'a GreensKernel,
    negative: bool,
}

impl KernelPart<'_> {
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let g = self.kernel.eval(t, s);
        if self.negative {
            (-g).max(0.0)
        } else {
            g.max(0.0)
        }
    }
}

/// Free-function spelling of [`GreensKernel::parts`].
pub fn kernel_parts(kernel: &GreensKernel) -> (KernelPart<'_>, KernelPart<'_>) {
    kernel.parts()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_resonances() {
        let p = |rho: f64| Potential::constant(rho, 1.0).unwrap();
        assert!(is_resonant(&p(2.0 * PI), BoundaryKind::Periodic));
        assert!(is_resonant(&p(PI), BoundaryKind::Dirichlet));
        assert!(!is_resonant(&p(1.5 * PI), BoundaryKind::Periodic));
        assert!(is_resonant(&p(PI), BoundaryKind::Antiperiodic));
        assert!(!is_resonant(&p(2.0 * PI), BoundaryKind::Antiperiodic));
        assert!(is_resonant(&p(PI), BoundaryKind::Neumann));
        assert!(is_resonant(&p(1.5 * PI), BoundaryKind::Mixed1));
        assert!(is_resonant(&p(0.5 * PI), BoundaryKind::Mixed2));
        assert!(!is_resonant(&p(PI), BoundaryKind::Mixed2));
        assert!(is_resonant(&p(1e-12), BoundaryKind::Periodic));
    }

    #[test]
    fn sampled_resonance_uses_boundary_determinant() {
        let flat = |rho: f64| Potential::sample_fn(1.0, 11, |_| rho * rho).unwrap();
        assert!(is_resonant(&flat(PI), BoundaryKind::Dirichlet));
        assert!(!is_resonant(&flat(3.0), BoundaryKind::Dirichlet));
        assert!(is_resonant(&flat(2.0 * PI), BoundaryKind::Periodic));
    }

    #[test]
    fn periodic_value_at_origin() {
        let rho = 1.5 * PI;
        let g = greens_periodic_constant(rho, 1.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(g, -1.0 / (3.0 * PI), epsilon = 1e-15);
        let a = greens_periodic_constant(1.0, 1.0, 0.3, 0.3).unwrap();
        let b = greens_periodic_constant(1.0, 1.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }

    #[test]
    fn resonant_closed_forms_are_rejected() {
        assert!(matches!(
            greens_periodic_constant(2.0 * PI, 1.0, 0.1, 0.2),
            Err(Error::ResonantPotential { .. })
        ));
        assert!(matches!(
            greens_dirichlet_constant(3.0 * PI, 1.0, 0.1, 0.2),
            Err(Error::ResonantPotential { .. })
        ));
        assert!(greens_dirichlet_constant(2.0, 1.0, 1.5, 0.2).is_err());
    }

    #[test]
    fn dirichlet_value_and_symmetry() {
        let g = greens_dirichlet_constant(2.0, 1.0, 0.5, 0.5).unwrap();
        let expected = -(1.0_f64).sin() * (1.0_f64).sin() / (2.0 * (2.0_f64).sin());
        assert_abs_diff_eq!(g, expected, epsilon = 1e-15);
        let rho = 60.0_f64.sqrt();
        for &t in &[0.0, 0.2, 0.9, 1.0] {
            assert_eq!(greens_dirichlet_constant(rho, 1.0, t, 0.0).unwrap(), 0.0);
            assert_abs_diff_eq!(
                greens_dirichlet_constant(rho, 1.0, t, 1.0).unwrap(),
                0.0,
                epsilon = 1e-16
            );
            assert_eq!(
                greens_dirichlet_constant(rho, 1.0, t, 0.37).unwrap(),
                greens_dirichlet_constant(rho, 1.0, 0.37, t).unwrap()
            );
        }
    }

    #[test]
    fn separable_form_reproduces_closed_formulas() {
        for (rho, bc) in [
            (1.5 * PI, BoundaryKind::Periodic),
            (60.0_f64.sqrt(), BoundaryKind::Dirichlet),
            (0.7, BoundaryKind::Periodic),
        ] {
            let k = GreensKernel::closed_form(&Potential::constant(rho, 1.0).unwrap(), bc).unwrap();
            for i in 0..=10 {
                for j in 0..=10 {
                    let (t, s) = (i as f64 / 10.0, j as f64 / 10.0);
                    assert_abs_diff_eq!(k.eval(t, s), k.eval_separable(t, s), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn parts_recombine() {
        let k = GreensKernel::closed_form(
            &Potential::constant(1.5 * PI, 1.0).unwrap(),
            BoundaryKind::Periodic,
        )
        .unwrap();
        let (pos, neg) = k.parts();
        let mut saw_negative = false;
        for i in 0..=20 {
            for j in 0..=20 {
                let (t, s) = (i as f64 / 20.0, j as f64 / 20.0);
                assert!(pos.eval(t, s) >= 0.0 && neg.eval(t, s) >= 0.0);
                assert_eq!(pos.eval(t, s) - neg.eval(t, s), k.eval(t, s));
                saw_negative |= neg.eval(t, s) > 0.0;
            }
        }
        assert!(saw_negative);
    }

    #[test]
    fn nonnegative_kernel_has_empty_negative_part() {
        let k = GreensKernel::closed_form(
            &Potential::constant(0.5, 1.0).unwrap(),
            BoundaryKind::Periodic,
        )
        .unwrap();
        let (_, neg) = kernel_parts(&k);
        for i in 0..=30 {
            for j in 0..=30 {
                assert_eq!(neg.eval(i as f64 / 30.0, j as f64 / 30.0), 0.0);
            }
        }
    }

    #[test]
    fn closed_form_only_for_periodic_and_dirichlet() {
        let p = Potential::constant(1.0, 1.0).unwrap();
        assert!(matches!(
            GreensKernel::closed_form(&p, BoundaryKind::Neumann),
            Err(Error::UnsupportedBoundaryKind(_))
        ));
        assert_eq!(
            GreensKernel::build(&p, BoundaryKind::Neumann, 201)
                .unwrap()
                .form(),
            KernelForm::Numeric
        );
    }

    #[test]
    fn numeric_resonance_is_detected() {
        let p = Potential::constant(PI, 1.0).unwrap();
        assert!(matches!(
            GreensKernel::numeric(&p, BoundaryKind::Dirichlet, 2001),
            Err(Error::ResonantPotential { .. })
        ));
    }
}
