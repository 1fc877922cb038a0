//! Problem data: the interval `[0, T]`, the potential `a(t)` and the boundary
//! conditions attached to `u'' + a(t) u`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The interval `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    t_end: f64,
}

impl Interval {
    pub fn new(t_end: f64) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidInput(format!(
                "interval length must be positive, got {t_end}"
            )));
        }
        Ok(Self { t_end })
    }

    pub fn length(&self) -> f64 {
        self.t_end
    }

    /// `n` equally spaced nodes including both endpoints.
    pub fn uniform_grid(&self, n: usize) -> Vec<f64> {
        uniform_grid(self.t_end, n)
    }
}

/// Piecewise-linear interpolation, constant beyond the end nodes.
pub(crate) fn interp_linear(grid: &[f64], values: &[f64], t: f64) -> f64 {
    let n = grid.len();
    if t <= grid[0] {
        return values[0];
    }
    if t >= grid[n - 1] {
        return values[n - 1];
    }
    let j = grid.partition_point(|&g| g <= t).clamp(1, n - 1);
    let (t0, t1) = (grid[j - 1], grid[j]);
    let w = (t - t0) / (t1 - t0);
    values[j - 1] * (1.0 - w) + values[j] * w
}

pub(crate) fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "a grid needs at least two nodes");
    let h = t_end / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { t_end } else { i as f64 * h })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialKind {
    /// `a(t) = rho^2`.
    Constant { rho: f64 },
    /// Piecewise-linear interpolation of `values` over `grid`.
    Sampled { grid: Vec<f64>, values: Vec<f64> },
}

/// The coefficient `a(t)` of the Hill operator `u'' + a(t) u` on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    kind: PotentialKind,
    interval: Interval,
}

impl Potential {
    pub fn constant(rho: f64, t_end: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidPotential(format!(
                "rho must be positive and finite, got {rho}"
            )));
        }
        Ok(Self {
            kind: PotentialKind::Constant { rho },
            interval: Interval::new(t_end)?,
        })
    }

    /// Tabulated potential. The grid must be strictly increasing, start at 0,
    /// and its last node defines `T`.
    pub fn sampled(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidPotential(format!(
                "need at least two samples with matching lengths (grid {}, values {})",
                grid.len(),
                values.len()
            )));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidPotential(format!(
                "grid must start at 0, starts at {}",
                grid[0]
            )));
        }
        if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPotential(format!(
                "grid is not strictly increasing near {}",
                w[0]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential(format!("non-finite sample {v}")));
        }
        let interval = Interval::new(*grid.last().unwrap())?;
        Ok(Self {
            kind: PotentialKind::Sampled { grid, values },
            interval,
        })
    }

    /// Samples `a` on `n` uniform nodes of `[0, t_end]`.
    pub fn sample_fn(t_end: f64, n: usize, a: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = uniform_grid(t_end, n);
        let values = grid.iter().map(|&t| a(t)).collect();
        Self::sampled(grid, values)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn period(&self) -> f64 {
        self.interval.length()
    }

    /// `Some(rho)` for constant potentials.
    pub fn rho(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::Constant { rho } => Some(rho),
            PotentialKind::Sampled { .. } => None,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            PotentialKind::Constant { rho } => rho * rho,
            PotentialKind::Sampled { grid, values } => interp_linear(grid, values, t),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match &self.kind {
            PotentialKind::Constant { rho } => rho * rho,
            PotentialKind::Sampled { values, .. } => {
                values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        match &self.kind {
            PotentialKind::Constant { rho } => rho * rho,
            PotentialKind::Sampled { values, .. } => {
                values.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Breakpoints of the piecewise-linear interpolant (empty for constants).
    pub(crate) fn nodes(&self) -> &[f64] {
        match &self.kind {
            PotentialKind::Constant { .. } => &[],
            PotentialKind::Sampled { grid, .. } => grid,
        }
    }
}

/// Boundary conditions for `u'' + a(t) u = sigma` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// `u(0) = u(T)`, `u'(0) = u'(T)`.
    Periodic,
    /// `u(0) = -u(T)`, `u'(0) = -u'(T)`.
    Antiperiodic,
    /// `u(0) = u(T) = 0`.
    Dirichlet,
    /// `u'(0) = u'(T) = 0`.
    Neumann,
    /// `u'(0) = u(T) = 0`.
    Mixed1,
    /// `u(0) = u'(T) = 0`.
    Mixed2,
}

impl BoundaryKind {
    pub const ALL: [BoundaryKind; 6] = [
        BoundaryKind::Periodic,
        BoundaryKind::Antiperiodic,
        BoundaryKind::Dirichlet,
        BoundaryKind::Neumann,
        BoundaryKind::Mixed1,
        BoundaryKind::Mixed2,
    ];

    /// Each row `[c0, d0, cT, dT]` encodes
    /// `c0 u(0) + d0 u'(0) + cT u(T) + dT u'(T) = 0`.
    pub fn rows(self) -> [[f64; 4]; 2] {
        match self {
            BoundaryKind::Periodic => [[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]],
            BoundaryKind::Antiperiodic => [[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]],
            BoundaryKind::Dirichlet => [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
            BoundaryKind::Neumann => [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
            BoundaryKind::Mixed1 => [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
            BoundaryKind::Mixed2 => [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
        }
    }

    /// Residuals of both conditions given `(u(0), u'(0), u(T), u'(T))`.
    pub fn residuals(self, ends: [f64; 4]) -> [f64; 2] {
        self.rows()
            .map(|row| row.iter().zip(ends.iter()).map(|(c, e)| c * e).sum())
    }

    /// Whether solutions (and `G(t, .)`) are forced to vanish at `t = 0`.
    pub fn vanishes_at_start(self) -> bool {
        matches!(self, BoundaryKind::Dirichlet | BoundaryKind::Mixed2)
    }

    /// Whether solutions are forced to vanish at `t = T`.
    pub fn vanishes_at_end(self) -> bool {
        matches!(self, BoundaryKind::Dirichlet | BoundaryKind::Mixed1)
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Periodic => "periodic",
            BoundaryKind::Antiperiodic => "antiperiodic",
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Neumann => "neumann",
            BoundaryKind::Mixed1 => "mixed1",
            BoundaryKind::Mixed2 => "mixed2",
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        BoundaryKind::ALL
            .into_iter()
            .find(|bc| bc.name() == lower)
            .ok_or_else(|| Error::InvalidInput(format!("unknown boundary kind '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_potential_interpolates_linearly() {
        let p = Potential::sampled(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(p.period(), 1.0);
        assert_eq!(p.eval(0.25), 0.5);
        assert_eq!(p.eval(0.75), 2.0);
        assert_eq!(p.eval(1.0), 3.0);
        assert_eq!(p.sup_norm(), 3.0);
    }

    #[test]
    fn rejects_bad_potentials() {
        assert!(Potential::constant(0.0, 1.0).is_err());
        assert!(Potential::constant(1.0, -1.0).is_err());
        assert!(Potential::sampled(vec![0.1, 1.0], vec![1.0, 1.0]).is_err());
        assert!(Potential::sampled(vec![0.0, 0.5, 0.5, 1.0], vec![1.0; 4]).is_err());
        assert!(Potential::sampled(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn boundary_kind_parses_case_insensitively() {
        assert_eq!(
            "Dirichlet".parse::<BoundaryKind>().unwrap(),
            BoundaryKind::Dirichlet
        );
        assert_eq!(
            "mixed2".parse::<BoundaryKind>().unwrap(),
            BoundaryKind::Mixed2
        );
        assert!("robin".parse::<BoundaryKind>().is_err());
    }

    #[test]
    fn periodic_residuals() {
        let r = BoundaryKind::Periodic.residuals([1.0, 2.0, 1.0, 2.5]);
        assert_eq!(r, [0.0, -0.5]);
    }

    #[test]
    fn grid_hits_endpoints() {
        let g = uniform_grid(2.0, 5);
        assert_eq!(g, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }
}
