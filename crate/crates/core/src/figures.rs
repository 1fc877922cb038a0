//! Data tables behind the five standard plots: the periodic and Dirichlet
//! `gamma(rho)` sweeps, the profile `gamma(t, 10.8)`, and the two Dirichlet
//! example solutions at `rho = sqrt(60)`.
//!
//! Every table is computed on fixed grids, so repeated runs are identical.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::gamma::{
    gamma_dirichlet_closed, gamma_dirichlet_t_closed, gamma_periodic_closed, gamma_quadrature,
    weighted_parts, GammaOptions, Weight,
};
use crate::greens::GreensKernel;
use crate::problem::{BoundaryKind, Potential};
use crate::solver::{solve_linear, SolveOptions};
use crate::spectral::principal_eigenfunction;

/// Potential strength used for the `gamma(t, rho)` profile.
pub const PROFILE_RHO: f64 = 10.8;

/// Numeric table with a header row. `None` cells are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(
                row.iter()
                    .map(|c| c.map(crate::extended::format).unwrap_or_default()),
            )
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// Column by header name.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FigureOptions {
    /// Samples along the horizontal axis of the sweeps and of the profile.
    pub points: usize,
    /// Solution grid for the example profiles.
    pub grid_size: usize,
    pub gamma: GammaOptions,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            points: 200,
            grid_size: crate::greens::DEFAULT_GRID,
            gamma: GammaOptions {
                t_grid: 101,
                ..GammaOptions::default()
            },
        }
    }
}

pub fn figure(number: u8, opts: &FigureOptions) -> Result<Table> {
    match number {
        1 => periodic_sweep(opts),
        2 => dirichlet_profile(opts),
        3 => dirichlet_sweep(opts),
        4 => example_solution(|t| t * (1.0 - t), opts),
        5 => example_solution(|t| t, opts),
        n => Err(Error::InvalidInput(format!("no figure {n}; choose 1 to 5"))),
    }
}

fn quadrature_gamma(potential: &Potential, bc: BoundaryKind, opts: &FigureOptions) -> Result<f64> {
    let kernel = GreensKernel::build(potential, bc, opts.grid_size)?;
    let weight = Weight::Eigenfunction(principal_eigenfunction(potential, bc, opts.grid_size)?);
    Ok(gamma_quadrature(&kernel, &weight, &opts.gamma)?.value)
}

/// `rho` runs over `(pi, 10 pi]` with `T = 1`; resonant values are skipped.
pub fn periodic_sweep(opts: &FigureOptions) -> Result<Table> {
    let n = opts.points.max(1);
    let mut rows = Vec::with_capacity(n);
    for k in 1..=n {
        let rho = PI * (1.0 + 9.0 * k as f64 / n as f64);
        let closed = match gamma_periodic_closed(rho, 1.0) {
            Ok(g) => g.value,
            Err(Error::ResonantPotential { .. }) => continue,
            Err(e) => return Err(e),
        };
        let quad = quadrature_gamma(
            &Potential::constant(rho, 1.0)?,
            BoundaryKind::Periodic,
            opts,
        )?;
        rows.push(vec![Some(rho), Some(closed), Some(quad)]);
    }
    Ok(Table {
        header: vec!["rho", "gamma_closed", "gamma_quadrature"],
        rows,
    })
}

/// `gamma(t, 10.8)` for the Dirichlet problem on `(0, 1)`. The closed column
/// is filled only where the closed form holds.
pub fn dirichlet_profile(opts: &FigureOptions) -> Result<Table> {
    let n = opts.points.max(1);
    let potential = Potential::constant(PROFILE_RHO, 1.0)?;
    let bc = BoundaryKind::Dirichlet;
    let kernel = GreensKernel::build(&potential, bc, opts.grid_size)?;
    let weight = Weight::Eigenfunction(principal_eigenfunction(&potential, bc, opts.grid_size)?);
    let mut rows = Vec::with_capacity(n);
    for k in 1..=n {
        let t = k as f64 / (n + 1) as f64;
        let closed = gamma_dirichlet_t_closed(t, PROFILE_RHO).ok();
        let quad = weighted_parts(&kernel, &weight, t, &opts.gamma)?.ratio();
        rows.push(vec![Some(t), closed, Some(quad)]);
    }
    Ok(Table {
        header: vec!["t", "gamma_closed", "gamma_quadrature"],
        rows,
    })
}

/// `rho` runs over `(pi, 6 pi)` with `T = 1`; resonant values are skipped.
pub fn dirichlet_sweep(opts: &FigureOptions) -> Result<Table> {
    let n = opts.points.max(1);
    let mut rows = Vec::with_capacity(n);
    for k in 1..=n {
        let rho = PI * (1.0 + 5.0 * k as f64 / (n + 1) as f64);
        let closed = match gamma_dirichlet_closed(rho) {
            Ok(g) => g.value,
            Err(Error::ResonantPotential { .. }) => continue,
            Err(e) => return Err(e),
        };
        let quad = quadrature_gamma(
            &Potential::constant(rho, 1.0)?,
            BoundaryKind::Dirichlet,
            opts,
        )?;
        rows.push(vec![Some(rho), Some(closed), Some(quad)]);
    }
    Ok(Table {
        header: vec!["rho", "gamma_closed", "gamma_quadrature"],
        rows,
    })
}

fn example_solution(sigma: impl Fn(f64) -> f64, opts: &FigureOptions) -> Result<Table> {
    let potential = Potential::constant(60f64.sqrt(), 1.0)?;
    let kernel = GreensKernel::build(&potential, BoundaryKind::Dirichlet, opts.grid_size)?;
    let profile = solve_linear(
        &kernel,
        sigma,
        &SolveOptions {
            grid_size: opts.grid_size,
            ..SolveOptions::default()
        },
    )?;
    Ok(Table {
        header: vec!["t", "u"],
        rows: profile
            .grid
            .iter()
            .zip(&profile.values)
            .map(|(&t, &u)| vec![Some(t), Some(u)])
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> FigureOptions {
        FigureOptions {
            points: 12,
            grid_size: 401,
            gamma: GammaOptions {
                t_grid: 101,
                ..GammaOptions::default()
            },
        }
    }

    #[test]
    fn sweeps_agree_with_closed_forms() {
        for n in [1, 3] {
            let table = figure(n, &quick()).unwrap();
            assert!(!table.rows.is_empty());
            for row in &table.rows {
                let (c, q) = (row[1].unwrap(), row[2].unwrap());
                assert!(c > 1.0 && (c - q).abs() <= 1e-6 * c, "{row:?}");
            }
        }
    }

    #[test]
    fn profile_closed_column_only_near_the_start() {
        let table = figure(2, &quick()).unwrap();
        let bound = crate::gamma::dirichlet_first_interval(PROFILE_RHO).unwrap();
        for row in &table.rows {
            let t = row[0].unwrap();
            assert_eq!(row[1].is_some(), t <= bound, "t = {t}");
            if let Some(c) = row[1] {
                assert!((c - row[2].unwrap()).abs() <= 1e-6 * c.abs().max(1.0));
            }
        }
    }

    #[test]
    fn example_profiles_have_the_expected_signs() {
        let pos = figure(4, &quick()).unwrap().column("u").unwrap();
        let interior = &pos[1..pos.len() - 1];
        assert!(interior.iter().all(|u| u.unwrap() > 0.0));
        let mixed = figure(5, &quick()).unwrap().column("u").unwrap();
        assert!(mixed.iter().any(|u| u.unwrap() < 0.0));
        assert!(mixed.iter().any(|u| u.unwrap() > 0.0));
    }

    #[test]
    fn csv_leaves_missing_cells_empty() {
        let t = Table {
            header: vec!["t", "v"],
            rows: vec![vec![Some(0.5), None], vec![Some(1.0), Some(f64::INFINITY)]],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,v\n0.5,\n1,+inf\n");
        assert!(figure(6, &quick()).is_err());
    }
}
