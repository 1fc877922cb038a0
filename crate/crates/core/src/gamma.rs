//! The sign-ratio constant
//!
//! ```text
//! gamma = inf_t  int G+(t, s) w(s) ds / int G-(t, s) w(s) ds
//! ```
//!
//! for a nonnegative weight `w` (principal eigenfunction, the coefficient
//! `a`, or 1), by quadrature for any kernel and by the explicit formulas for
//! constant potentials under periodic and (with `T = 1`) Dirichlet conditions.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{is_resonant, GreensKernel, RESONANCE_TOL};
use crate::problem::{interp_linear, uniform_grid, BoundaryKind, Potential, PotentialKind};
use crate::quadrature::SignSplit;
use crate::spectral::{principal_eigenfunction, Eigenfunction};

pub const DEFAULT_T_GRID: usize = 1001;
pub const DEFAULT_SCAN_PANELS: usize = 512;
pub const DEFAULT_ORDER: usize = 8;

/// Negative parts below this fraction of the positive part count as zero.
const ZERO_PART_RTOL: f64 = 1e-13;

/// Ratios this close count as a tie, resolved towards the smaller `t`.
const TIE_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaMethod {
    ClosedFormPeriodic,
    ClosedFormDirichletT1,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    PrincipalEigenfunction,
    Coefficient,
    One,
    Sampled,
}

/// Agreement between two evaluations of the same constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub method: GammaMethod,
    #[serde(with = "crate::extended")]
    pub value: f64,
    #[serde(with = "crate::extended")]
    pub difference: f64,
    pub tolerance: f64,
    pub mismatch: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaResult {
    /// `+inf` when the negative part vanishes identically.
    #[serde(with = "crate::extended")]
    pub value: f64,
    pub argmin_t: f64,
    pub method: GammaMethod,
    pub weight: WeightKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheck>,
}

impl GammaResult {
    pub fn is_infinite(&self) -> bool {
        self.value == f64::INFINITY
    }

    /// Attaches the comparison against `other`.
    pub fn with_cross_check(mut self, other: &GammaResult, tolerance: f64) -> Self {
        let difference = if self.value == other.value {
            0.0
        } else {
            (self.value - other.value).abs()
        };
        self.cross_check = Some(CrossCheck {
            method: other.method,
            value: other.value,
            difference,
            tolerance,
            mismatch: !(difference <= tolerance),
        });
        self
    }
}

/// Weight `w(s) >= 0` in the ratio.
#[derive(Debug, Clone)]
pub enum Weight {
    One,
    Eigenfunction(Eigenfunction),
    Coefficient(Potential),
    /// Piecewise-linear samples.
    Sampled {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Weight {
    pub fn sampled(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidWeight(format!(
                "need at least two samples with matching lengths (grid {}, values {})",
                grid.len(),
                values.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidWeight(
                "grid is not strictly increasing".into(),
            ));
        }
        Ok(Weight::Sampled { grid, values })
    }

    /// Samples `w` on `n` uniform nodes of `[0, t_end]`.
    pub fn sample_fn(t_end: f64, n: usize, w: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = uniform_grid(t_end, n);
        let values = grid.iter().map(|&t| w(t)).collect();
        Self::sampled(grid, values)
    }

    pub fn kind(&self) -> WeightKind {
        match self {
            Weight::One => WeightKind::One,
            Weight::Eigenfunction(_) => WeightKind::PrincipalEigenfunction,
            Weight::Coefficient(_) => WeightKind::Coefficient,
            Weight::Sampled { .. } => WeightKind::Sampled,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Eigenfunction(v) => v.eval(t),
            Weight::Coefficient(a) => a.eval(t),
            Weight::Sampled { grid, values } => interp_linear(grid, values, t),
        }
    }

    /// Points where the weight may fail to be smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Weight::Sampled { grid, .. } => grid.clone(),
            Weight::Coefficient(a) => a.nodes().to_vec(),
            _ => Vec::new(),
        }
    }

    fn samples(&self) -> Vec<f64> {
        match self {
            Weight::One => vec![1.0],
            Weight::Eigenfunction(v) => v.samples().to_vec(),
            Weight::Coefficient(a) => match a.kind() {
                PotentialKind::Sampled { values, .. } => values.clone(),
                PotentialKind::Constant { rho } => vec![rho * rho],
            },
            Weight::Sampled { values, .. } => values.clone(),
        }
    }

    /// Rejects negative, non-finite or identically zero weights.
    pub fn validate(&self) -> Result<()> {
        let samples = self.samples();
        if let Some(v) = samples.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidWeight(format!("weight takes the value {v}")));
        }
        if samples.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidWeight("weight vanishes identically".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GammaOptions {
    /// Uniform t-nodes on `[0, T]`.
    pub t_grid: usize,
    /// Sign-scan panels per s-integral.
    pub scan_panels: usize,
    /// Gauss-Legendre points per panel.
    pub order: usize,
    pub parallel: bool,
}

impl Default for GammaOptions {
    fn default() -> Self {
        Self {
            t_grid: DEFAULT_T_GRID,
            scan_panels: DEFAULT_SCAN_PANELS,
            order: DEFAULT_ORDER,
            parallel: true,
        }
    }
}

/// `N(t) = int G+(t, s) w(s) ds` and `D(t) = int G-(t, s) w(s) ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedParts {
    pub t: f64,
    pub positive: f64,
    pub negative: f64,
}

impl WeightedParts {
    /// `N / D`, `+inf` when `D` vanishes.
    pub fn ratio(&self) -> f64 {
        if self.negative <= ZERO_PART_RTOL * self.positive {
            f64::INFINITY
        } else {
            self.positive / self.negative
        }
    }
}

struct Integrator<'a> {
    kernel: &'a GreensKernel,
    weight: &'a Weight,
    split: SignSplit,
    breaks: Vec<f64>,
}

impl<'a> Integrator<'a> {
    fn new(kernel: &'a GreensKernel, weight: &'a Weight, opts: &GammaOptions) -> Self {
        Self {
            kernel,
            weight,
            split: SignSplit::new(opts.order, opts.scan_panels),
            breaks: weight.breakpoints(),
        }
    }

    fn parts(&self, t: f64) -> Result<WeightedParts> {
        let mut kinks = self.breaks.clone();
        kinks.push(t);
        let (positive, negative) = self.split.parts(0.0, self.kernel.period(), &kinks, |s| {
            self.kernel.eval(t, s) * self.weight.eval(s)
        });
        if !(positive.is_finite() && negative.is_finite()) {
            return Err(Error::QuadratureFailure { t, s: f64::NAN });
        }
        Ok(WeightedParts {
            t,
            positive,
            negative,
        })
    }

    fn parts_at(&self, ts: &[f64], parallel: bool) -> Result<Vec<WeightedParts>> {
        if parallel {
            ts.par_iter().map(|&t| self.parts(t)).collect()
        } else {
            ts.iter().map(|&t| self.parts(t)).collect()
        }
    }
}

/// Weighted positive and negative parts at a single `t`.
pub fn weighted_parts(
    kernel: &GreensKernel,
    weight: &Weight,
    t: f64,
    opts: &GammaOptions,
) -> Result<WeightedParts> {
    Integrator::new(kernel, weight, opts).parts(t)
}

/// Weighted parts on the uniform t-grid of `opts`.
pub fn gamma_profile(
    kernel: &GreensKernel,
    weight: &Weight,
    opts: &GammaOptions,
) -> Result<Vec<WeightedParts>> {
    weight.validate()?;
    let ts = uniform_grid(kernel.period(), opts.t_grid);
    Integrator::new(kernel, weight, opts).parts_at(&ts, opts.parallel)
}

/// Value at `x = 0` of the polynomial through `(xs[i], ys[i])` (Neville).
fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

/// Offsets from a vanishing endpoint used for the one-sided limit.
const EXTRAPOLATION_DEPTH: usize = 4;

fn offsets(h: f64) -> Vec<f64> {
    (0..EXTRAPOLATION_DEPTH)
        .map(|k| h / f64::powi(2.0, k as i32))
        .collect()
}

/// `gamma` by quadrature on the t-grid of `opts`.
///
/// Where every `G(t, .)` vanishes (endpoints of Dirichlet and mixed problems)
/// the ratio is a 0/0 limit, replaced by polynomial extrapolation from
/// `t = h, h/2, h/4, h/8` away from that endpoint, with `h` refined until
/// the extrapolation settles.
pub fn gamma_quadrature(
    kernel: &GreensKernel,
    weight: &Weight,
    opts: &GammaOptions,
) -> Result<GammaResult> {
    weight.validate()?;
    if opts.t_grid < 2 {
        return Err(Error::InvalidInput(
            "t-grid needs at least two nodes".into(),
        ));
    }
    let t_end = kernel.period();
    let bc = kernel.bc();
    let grid = uniform_grid(t_end, opts.t_grid);
    let h = t_end / (opts.t_grid - 1) as f64;
    let integ = Integrator::new(kernel, weight, opts);
    let on_grid = integ.parts_at(&grid, opts.parallel)?;
    let start_limit = match bc.vanishes_at_start() {
        true => Some(endpoint_limit(&integ, h, |x| x, opts.parallel)?),
        false => None,
    };
    let end_limit = match bc.vanishes_at_end() {
        true => Some(endpoint_limit(&integ, h, |x| t_end - x, opts.parallel)?),
        false => None,
    };

    let last = grid.len() - 1;
    let mut best = (f64::INFINITY, 0.0);
    for (i, p) in on_grid.iter().enumerate() {
        let r = match (i, start_limit, end_limit) {
            (0, Some(r), _) => r,
            (i, _, Some(r)) if i == last => r,
            _ => {
                check_positive(p)?;
                p.ratio()
            }
        };
        if r < best.0 - TIE_RTOL * best.0.abs() || best.0.is_infinite() && r.is_finite() {
            best = (r, grid[i]);
        }
    }
    Ok(GammaResult {
        value: best.0,
        argmin_t: if best.0.is_infinite() { 0.0 } else { best.1 },
        method: GammaMethod::Quadrature,
        weight: weight.kind(),
        cross_check: None,
    })
}

/// Halvings of the extrapolation step tried at a vanishing endpoint.
const MAX_HALVINGS: usize = 30;
/// Successive endpoint extrapolations agreeing to this relative size stop
/// the halving.
const EXTRAPOLATION_RTOL: f64 = 1e-10;

/// One-sided limit of the ratio at a vanishing endpoint; `at(x)` maps the
/// distance `x` from that endpoint to `t`.
///
/// The step starts at the grid spacing and is halved until two successive
/// extrapolations agree. Close to resonance the negative part near the
/// endpoint lives on a thin layer; steps reaching outside it give an
/// infinite ratio and are halved as well.
fn endpoint_limit(
    integ: &Integrator<'_>,
    h: f64,
    at: impl Fn(f64) -> f64,
    parallel: bool,
) -> Result<f64> {
    let mut step = h;
    let mut previous: Option<f64> = None;
    for _ in 0..=MAX_HALVINGS {
        let near = offsets(step);
        let ts: Vec<f64> = near.iter().map(|&x| at(x)).collect();
        let chunk = integ.parts_at(&ts, parallel)?;
        step *= 0.5;
        if chunk.iter().any(|p| p.ratio().is_infinite()) {
            previous = None;
            continue;
        }
        for p in &chunk {
            check_positive(p)?;
        }
        let ratios: Vec<f64> = chunk.iter().map(WeightedParts::ratio).collect();
        let limit = extrapolate_to_zero(&near, &ratios);
        if let Some(prev) = previous {
            if (limit - prev).abs() <= EXTRAPOLATION_RTOL * limit.abs() {
                return Ok(limit);
            }
        }
        previous = Some(limit);
    }
    Ok(previous.unwrap_or(f64::INFINITY))
}

fn check_positive(p: &WeightedParts) -> Result<()> {
    let value = p.positive - p.negative;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonpositiveWeightedIntegral { t: p.t, value })
    }
}

/// `gamma` weighted by the principal eigenfunction of `bc`.
pub fn gamma_principal(
    potential: &Potential,
    bc: BoundaryKind,
    grid_size: usize,
    opts: &GammaOptions,
) -> Result<GammaResult> {
    let kernel = GreensKernel::build(potential, bc, grid_size)?;
    let weight = Weight::Eigenfunction(principal_eigenfunction(potential, bc, grid_size)?);
    gamma_quadrature(&kernel, &weight, opts)
}

/// `gamma*`: the ratio weighted by the coefficient `a` itself. Only periodic
/// and Neumann kernels satisfy `int G(t, s) a(s) ds = 1`, which makes the
/// denominator positive.
pub fn gamma_star(kernel: &GreensKernel, opts: &GammaOptions) -> Result<GammaResult> {
    if !matches!(kernel.bc(), BoundaryKind::Periodic | BoundaryKind::Neumann) {
        return Err(Error::UnsupportedBoundaryKind(kernel.bc()));
    }
    let a = kernel.potential();
    if a.min_value() < 0.0 {
        return Err(Error::InvalidWeight(format!(
            "coefficient takes the negative value {}",
            a.min_value()
        )));
    }
    gamma_quadrature(kernel, &Weight::Coefficient(a.clone()), opts)
}

/// The Zhong-An constant: `+inf` for `rho <= pi / T`, otherwise the
/// unweighted periodic ratio, defined up to `rho = 3 pi / (2 T)`.
pub fn zhong_an_delta(rho: f64, t_end: f64, opts: &GammaOptions) -> Result<GammaResult> {
    let potential = Potential::constant(rho, t_end)?;
    if rho * t_end <= PI {
        return Ok(GammaResult {
            value: f64::INFINITY,
            argmin_t: 0.0,
            method: GammaMethod::ClosedFormPeriodic,
            weight: WeightKind::One,
            cross_check: None,
        });
    }
    if rho * t_end > 1.5 * PI * (1.0 + 1e-12) {
        return Err(Error::OutOfRange(format!(
            "delta is defined for rho <= 3 pi / (2 T) = {}, got {rho}",
            1.5 * PI / t_end
        )));
    }
    let kernel = GreensKernel::closed_form(&potential, BoundaryKind::Periodic)?;
    gamma_quadrature(&kernel, &Weight::One, opts)
}

/// Explicit periodic `gamma(rho)` for constant potential.
///
/// With `x = rho T / pi` and `S = sin(rho T / 2)`:
/// `x in (4k+1, 4k+2)`: `(2k+1) / (2k+1-S)`;
/// `x in (4k+2, 4k+3)`: `(2k+1-S) / (2k+1)`;
/// `x in (4k-1, 4k)`: `2k / (2k+S)`;
/// `x in (4k, 4k+1)`: `(2k+S) / (2k)`.
/// At odd `x` the adjacent expressions share the same limit.
pub fn gamma_periodic_closed(rho: f64, t_end: f64) -> Result<GammaResult> {
    let potential = Potential::constant(rho, t_end)?;
    let x = rho * t_end / PI;
    if x <= 1.0 {
        return Err(Error::OutOfRange(format!(
            "closed-form periodic gamma needs rho > pi / T, got rho T / pi = {x}"
        )));
    }
    if is_resonant(&potential, BoundaryKind::Periodic) {
        return Err(Error::ResonantPotential {
            bc: BoundaryKind::Periodic,
            determinant: 0.0,
        });
    }
    let s = (0.5 * rho * t_end).sin();
    let k = (x / 4.0).floor();
    let r = x - 4.0 * k;
    let value = if (1.0..2.0).contains(&r) {
        (2.0 * k + 1.0) / (2.0 * k + 1.0 - s)
    } else if (2.0..=3.0).contains(&r) {
        (2.0 * k + 1.0 - s) / (2.0 * k + 1.0)
    } else if r > 3.0 {
        let k = k + 1.0;
        2.0 * k / (2.0 * k + s)
    } else {
        (2.0 * k + s) / (2.0 * k)
    };
    Ok(GammaResult {
        value,
        argmin_t: 0.0,
        method: GammaMethod::ClosedFormPeriodic,
        weight: WeightKind::One,
        cross_check: None,
    })
}

/// Interval data for the explicit Dirichlet formulas (`T = 1`).
struct DirichletCase {
    /// `floor(rho / pi)`, between 1 and 5.
    m: usize,
    /// `sum_{k=1}^m sin(k pi^2 / rho)`.
    sum: f64,
    /// `+1` for odd `m`, `-1` for even `m`.
    sign: f64,
}

fn dirichlet_case(rho: f64) -> Result<DirichletCase> {
    let x = rho / PI;
    if !(x > 1.0 && x < 6.0) {
        return Err(Error::OutOfRange(format!(
            "closed-form Dirichlet gamma needs pi < rho < 6 pi, got rho = {rho}"
        )));
    }
    if (x - x.round()).abs() <= RESONANCE_TOL * x {
        return Err(Error::ResonantPotential {
            bc: BoundaryKind::Dirichlet,
            determinant: rho.sin(),
        });
    }
    let m = x.floor() as usize;
    let sum = (1..=m).map(|k| (k as f64 * PI * PI / rho).sin()).sum();
    let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
    Ok(DirichletCase { m, sum, sign })
}

/// Right end of the first t-interval, `1 - floor(rho / pi) pi / rho`, on
/// which the explicit `gamma(t, rho)` holds.
pub fn dirichlet_first_interval(rho: f64) -> Result<f64> {
    let c = dirichlet_case(rho)?;
    Ok(1.0 - c.m as f64 * PI / rho)
}

/// Explicit pointwise ratio `gamma(t, rho)` for Dirichlet conditions on
/// `[0, 1]` with weight `sin(pi s)`:
///
/// ```text
/// sin(rho t) S / (sin(rho t) S + (-1)^(m+1) sin(rho) sin(pi t)),
/// S = sum_{k=1}^m sin(k pi^2 / rho),  m = floor(rho / pi).
/// ```
///
/// Valid for `0 < t <= 1 - m pi / rho`; further t-intervals need other
/// expressions and are rejected.
pub fn gamma_dirichlet_t_closed(t: f64, rho: f64) -> Result<f64> {
    let c = dirichlet_case(rho)?;
    let bound = 1.0 - c.m as f64 * PI / rho;
    if !(t > 0.0 && t <= bound) {
        return Err(Error::OutOfRange(format!(
            "explicit gamma(t, {rho}) holds for 0 < t <= {bound}, got t = {t}"
        )));
    }
    let num = (rho * t).sin() * c.sum;
    Ok(num / (num + c.sign * rho.sin() * (PI * t).sin()))
}

/// `gamma(rho) = lim_{t -> 0} gamma(t, rho)
///             = rho S / (rho S + (-1)^(m+1) pi sin(rho))`, attained at `t = 0`.
pub fn gamma_dirichlet_closed(rho: f64) -> Result<GammaResult> {
    let c = dirichlet_case(rho)?;
    let num = rho * c.sum;
    Ok(GammaResult {
        value: num / (num + c.sign * PI * rho.sin()),
        argmin_t: 0.0,
        method: GammaMethod::ClosedFormDirichletT1,
        weight: WeightKind::PrincipalEigenfunction,
        cross_check: None,
    })
}
