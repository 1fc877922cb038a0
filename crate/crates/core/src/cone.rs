//! Cone constants and the sampled checks of the existence hypotheses.
//!
//! For a subinterval `[c, d]` let `H(s) = int_c^d G(t, s) dt`. The
//! subinterval is admissible when `H >= 0` on `[0, T]` and `H > 0` on
//! `[c, d]`; then `eta = min_{[c,d]} H`, `sigma = eta / max G` and the cone is
//! `{u >= 0 : int u >= sigma |u|_inf}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::gamma::{gamma_quadrature, gamma_star, GammaOptions, GammaResult, Weight};
use crate::greens::GreensKernel;
use crate::problem::{uniform_grid, BoundaryKind, Potential};
use crate::quadrature::GaussLegendre;
use crate::spectral::principal_eigenfunction;

/// Label attached to every lattice-based verdict.
pub const EVIDENCE: &str = "sampled evidence";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subinterval {
    pub c: f64,
    pub d: f64,
}

impl Subinterval {
    pub fn new(c: f64, d: f64, t_end: f64) -> Result<Self> {
        if !(0.0 <= c && c <= d && d <= t_end) {
            return Err(Error::OutOfRange(format!(
                "[{c}, {d}] is not a subinterval of [0, {t_end}]"
            )));
        }
        Ok(Self { c, d })
    }

    pub fn width(&self) -> f64 {
        self.d - self.c
    }

    fn contains(&self, s: f64) -> bool {
        s >= self.c && s <= self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeConstants {
    pub eta: f64,
    pub sigma: f64,
    pub max_g: f64,
    /// `(t, s)` where the maximum of `G` was found.
    pub max_at: [f64; 2],
    pub subinterval: Subinterval,
}

#[derive(Debug, Clone, Copy)]
pub struct ConeOptions {
    /// Uniform s-nodes on `[0, T]` at which `H` is checked.
    pub s_grid: usize,
    /// Gauss panels per smooth piece of `t -> G(t, s)`.
    pub panels: usize,
    pub order: usize,
    /// Nodes per axis of the coarse scan for `max G`.
    pub max_grid: usize,
    /// Sign tolerance for `H`.
    pub tol: f64,
    /// Narrowest dyadic level tried by [`find_subinterval`] (width `T / 2^level`).
    pub max_level: u32,
}

impl Default for ConeOptions {
    fn default() -> Self {
        Self {
            s_grid: 201,
            panels: 16,
            order: 8,
            max_grid: 201,
            tol: 1e-10,
            max_level: 6,
        }
    }
}

struct Hintegral<'a> {
    kernel: &'a GreensKernel,
    rule: GaussLegendre,
    panels: usize,
}

impl<'a> Hintegral<'a> {
    fn new(kernel: &'a GreensKernel, opts: &ConeOptions) -> Self {
        Self {
            kernel,
            rule: GaussLegendre::new(opts.order),
            panels: opts.panels,
        }
    }

    /// `int_c^d G(t, s) dt`, split at the kink `t = s`.
    fn at(&self, sub: Subinterval, s: f64) -> f64 {
        if sub.width() <= 0.0 {
            return 0.0;
        }
        let breaks: Vec<f64> = if s > sub.c && s < sub.d {
            vec![sub.c, s, sub.d]
        } else {
            vec![sub.c, sub.d]
        };
        self.rule
            .composite_with_breaks(&breaks, self.panels, |t| self.kernel.eval(t, s))
    }
}

/// `H` on the s-grid plus the endpoints of `sub`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Profile {
    s: Vec<f64>,
    h: Vec<f64>,
}

fn h_profile(integ: &Hintegral, sub: Subinterval, opts: &ConeOptions) -> Profile {
    let mut s = uniform_grid(integ.kernel.period(), opts.s_grid);
    s.extend([sub.c, sub.d]);
    s.sort_by(f64::total_cmp);
    s.dedup();
    let h = s.par_iter().map(|&si| integ.at(sub, si)).collect();
    Profile { s, h }
}

/// Outcome of the subinterval condition on the s-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H3Verdict {
    pub passed: bool,
    pub subinterval: Subinterval,
    /// `min H` over the s-grid inside `[c, d]` (the grid estimate of eta).
    #[serde(with = "crate::extended")]
    pub min_inside: f64,
    /// `min H` over the whole s-grid.
    #[serde(with = "crate::extended")]
    pub min_overall: f64,
    /// First s-node violating a condition.
    pub witness_s: Option<f64>,
}

fn judge(profile: &Profile, sub: Subinterval, tol: f64) -> H3Verdict {
    let mut min_inside = f64::INFINITY;
    let mut min_overall = f64::INFINITY;
    let mut witness_s = None;
    for (&s, &h) in profile.s.iter().zip(&profile.h) {
        min_overall = min_overall.min(h);
        let inside = sub.contains(s);
        if inside {
            min_inside = min_inside.min(h);
        }
        let bad = h < -tol || (inside && h <= tol) || !h.is_finite();
        if bad && witness_s.is_none() {
            witness_s = Some(s);
        }
    }
    H3Verdict {
        passed: witness_s.is_none(),
        subinterval: sub,
        min_inside,
        min_overall,
        witness_s,
    }
}

/// Checks `H(s) >= -tol` on the s-grid and `H(s) > tol` on its part in `[c, d]`.
pub fn check_h3(kernel: &GreensKernel, sub: Subinterval, opts: &ConeOptions) -> H3Verdict {
    let integ = Hintegral::new(kernel, opts);
    judge(&h_profile(&integ, sub, opts), sub, opts.tol)
}

/// `eta`, `max G` (grid scan plus golden-section refinement) and `sigma`.
pub fn compute_cone_constants(
    kernel: &GreensKernel,
    sub: Subinterval,
    opts: &ConeOptions,
) -> Result<ConeConstants> {
    let integ = Hintegral::new(kernel, opts);
    let profile = h_profile(&integ, sub, opts);
    let eta = profile
        .s
        .iter()
        .zip(&profile.h)
        .filter(|(s, _)| sub.contains(**s))
        .map(|(_, h)| *h)
        .fold(f64::INFINITY, f64::min);
    if !(eta > 0.0) || sub.width() <= 0.0 {
        return Err(Error::NonpositiveEta {
            eta: if sub.width() <= 0.0 { 0.0 } else { eta },
            c: sub.c,
            d: sub.d,
        });
    }
    let (max_g, max_at) = kernel_max(kernel, opts.max_grid);
    Ok(ConeConstants {
        eta,
        sigma: eta / max_g,
        max_g,
        max_at,
        subinterval: sub,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `f` on `[a, b]` by golden-section search.
fn golden_max(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if b - a <= 1e-14 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Largest value of `G` on `[0, T]^2`: the best node of an `n x n` scan,
/// refined by golden-section sweeps along `t`, `s` and the diagonal inside the
/// neighbouring cells. Refinement only accepts improvements.
fn kernel_max(kernel: &GreensKernel, n: usize) -> (f64, [f64; 2]) {
    let t_end = kernel.period();
    let grid = uniform_grid(t_end, n.max(2));
    let h = t_end / (grid.len() - 1) as f64;
    let (mut best, mut at) = grid
        .par_iter()
        .map(|&t| {
            grid.iter().map(|&s| (kernel.eval(t, s), [t, s])).fold(
                (f64::NEG_INFINITY, [0.0, 0.0]),
                |a, b| if b.0 > a.0 { b } else { a },
            )
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::NEG_INFINITY, [0.0, 0.0]), |a, b| {
            if b.0 > a.0 {
                b
            } else {
                a
            }
        });
    for _ in 0..4 {
        let [t0, s0] = at;
        let (t1, v) = golden_max((t0 - h).max(0.0), (t0 + h).min(t_end), |t| {
            kernel.eval(t, s0)
        });
        if v > best {
            best = v;
            at = [t1, s0];
        }
        let [t0, s0] = at;
        let (s1, v) = golden_max((s0 - h).max(0.0), (s0 + h).min(t_end), |s| {
            kernel.eval(t0, s)
        });
        if v > best {
            best = v;
            at = [t0, s1];
        }
        let [t0, s0] = at;
        let lo = (-h).max(-t0).max(-s0);
        let hi = h.min(t_end - t0).min(t_end - s0);
        let (u, v) = golden_max(lo, hi, |u| kernel.eval(t0 + u, s0 + u));
        if v > best {
            best = v;
            at = [t0 + u, s0 + u];
        }
    }
    (best, at)
}

/// One candidate examined by [`find_subinterval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub level: u32,
    pub c: f64,
    pub d: f64,
    pub passed: bool,
    #[serde(with = "crate::extended")]
    pub min_inside: f64,
    #[serde(with = "crate::extended")]
    pub min_overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubintervalSearch {
    /// `None` when no candidate down to the narrowest level passes.
    pub found: Option<Subinterval>,
    pub trace: Vec<SearchStep>,
}

/// Dyadic search for an admissible `[c, d]`.
///
/// Level `j` holds the windows of width `w = T / 2^j` starting at multiples
/// of `w / 2`. Levels are tried from `[0, T]` downwards; the first level with
/// a passing window wins, and within it the window with the largest grid
/// estimate of `eta`.
pub fn find_subinterval(kernel: &GreensKernel, opts: &ConeOptions) -> SubintervalSearch {
    let t_end = kernel.period();
    let integ = Hintegral::new(kernel, opts);
    let mut trace = Vec::new();
    for level in 0..=opts.max_level {
        let width = t_end / f64::powi(2.0, level as i32);
        let count = if level == 0 {
            1
        } else {
            (1usize << (level + 1)) - 1
        };
        let mut best: Option<(f64, Subinterval)> = None;
        for i in 0..count {
            let c = i as f64 * width / 2.0;
            let d = if i + 1 == count { t_end } else { c + width };
            let sub = Subinterval { c, d };
            let v = judge(&h_profile(&integ, sub, opts), sub, opts.tol);
            trace.push(SearchStep {
                level,
                c: sub.c,
                d: sub.d,
                passed: v.passed,
                min_inside: v.min_inside,
                min_overall: v.min_overall,
            });
            if v.passed && best.is_none_or(|(eta, _)| v.min_inside > eta) {
                best = Some((v.min_inside, sub));
            }
        }
        if let Some((_, sub)) = best {
            return SubintervalSearch {
                found: Some(sub),
                trace,
            };
        }
    }
    SubintervalSearch { found: None, trace }
}

/// `u >= -1e-10` and trapezoidal `int u >= sigma max|u| - 1e-10`.
pub fn cone_membership(grid: &[f64], u: &[f64], cone: &ConeConstants) -> bool {
    const TOL: f64 = 1e-10;
    if grid.len() != u.len() || u.is_empty() {
        return false;
    }
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let sup = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let integral: f64 = grid
        .windows(2)
        .zip(u.windows(2))
        .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
        .sum();
    min >= -TOL && integral >= cone.sigma * sup - TOL
}

/// Points `(t, x)` at which a nonlinearity is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLattice {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
}

impl SampleLattice {
    /// 201 uniform t-nodes and `x in {0, 1e-3, 1e-2, ..., 1e3}`.
    pub fn standard(t_end: f64) -> Self {
        let mut x = vec![0.0];
        x.extend((-3..=3).map(|k| 10f64.powi(k)));
        Self {
            t: uniform_grid(t_end, 201),
            x,
        }
    }

    pub fn with_extra_x(mut self, extra: &[f64]) -> Self {
        self.x.extend_from_slice(extra);
        self.x.sort_by(f64::total_cmp);
        self.x.dedup();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x: f64,
    pub reason: String,
}

/// Sampled bounds `m v(t) <= f(t, x) <= M v(t)` and the test `M / m <= gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Verdict {
    pub passed: bool,
    /// Smallest sampled `f / v`.
    #[serde(with = "crate::extended")]
    pub m: f64,
    /// Largest sampled `f / v`.
    #[serde(rename = "M", with = "crate::extended")]
    pub big_m: f64,
    #[serde(with = "crate::extended")]
    pub ratio: f64,
    #[serde(with = "crate::extended")]
    pub gamma: f64,
    pub m_at: [f64; 2],
    pub big_m_at: [f64; 2],
    pub failure: Option<Witness>,
    pub evidence: String,
}

/// Relative size below which the weight counts as vanishing.
const WEIGHT_ZERO_RTOL: f64 = 1e-12;
/// `|f|` allowed where the weight vanishes.
const F_ZERO_TOL: f64 = 1e-12;

/// Samples `f / weight` on the lattice.
///
/// Where the weight vanishes `f` must vanish too (within 1e-12), and the
/// ratio there is the one-sided difference quotient towards the interior.
pub fn check_h2(
    f: &Expression,
    weight: &Weight,
    gamma: f64,
    t_end: f64,
    lattice: &SampleLattice,
) -> Result<H2Verdict> {
    let w_scale = lattice
        .t
        .iter()
        .fold(0.0_f64, |m, &t| m.max(weight.eval(t).abs()));
    let step = 1e-6 * t_end;
    let mut m = (f64::INFINITY, [0.0, 0.0]);
    let mut big_m = (f64::NEG_INFINITY, [0.0, 0.0]);
    let mut failure: Option<Witness> = None;
    let fail = |failure: &mut Option<Witness>, t: f64, x: f64, reason: String| {
        failure.get_or_insert(Witness { t, x, reason });
    };
    for &t in &lattice.t {
        let w = weight.eval(t);
        for &x in &lattice.x {
            let fv = f.eval(t, x, t_end);
            if !fv.is_finite() {
                return Err(Error::EvaluationFailure { t, x });
            }
            let ratio = if w.abs() <= WEIGHT_ZERO_RTOL * w_scale {
                if fv.abs() > F_ZERO_TOL {
                    fail(&mut failure, t, x, format!("weight vanishes but f = {fv}"));
                    continue;
                }
                let inner = if t + step <= t_end {
                    t + step
                } else {
                    t - step
                };
                let df = f.eval(inner, x, t_end) - fv;
                let dw = weight.eval(inner) - w;
                if !df.is_finite() {
                    return Err(Error::EvaluationFailure { t: inner, x });
                }
                df / dw
            } else {
                fv / w
            };
            if ratio < m.0 {
                m = (ratio, [t, x]);
            }
            if ratio > big_m.0 {
                big_m = (ratio, [t, x]);
            }
        }
    }
    if failure.is_none() {
        if !(m.0 > 0.0) {
            fail(
                &mut failure,
                m.1[0],
                m.1[1],
                format!("lower bound m = {} is not positive", m.0),
            );
        } else if !big_m.0.is_finite() {
            fail(
                &mut failure,
                big_m.1[0],
                big_m.1[1],
                "upper bound is not finite".into(),
            );
        } else if !(big_m.0 / m.0 <= gamma) {
            fail(
                &mut failure,
                big_m.1[0],
                big_m.1[1],
                format!("M / m = {} exceeds gamma = {gamma}", big_m.0 / m.0),
            );
        }
    }
    Ok(H2Verdict {
        passed: failure.is_none(),
        m: m.0,
        big_m: big_m.0,
        ratio: big_m.0 / m.0,
        gamma,
        m_at: m.1,
        big_m_at: big_m.1,
        failure,
        evidence: EVIDENCE.into(),
    })
}

/// Finite, nonnegative values of `f` on the lattice; measurability and the
/// integrable bound cannot be checked from samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Surrogate {
    pub passed: bool,
    #[serde(with = "crate::extended")]
    pub min_f: f64,
    pub failure: Option<Witness>,
    pub note: String,
}

pub fn check_h1(f: &Expression, t_end: f64, lattice: &SampleLattice) -> H1Surrogate {
    let mut min_f = f64::INFINITY;
    let mut failure = None;
    for &t in &lattice.t {
        for &x in &lattice.x {
            let v = f.eval(t, x, t_end);
            if v.is_finite() {
                min_f = min_f.min(v);
            }
            if (!v.is_finite() || v < 0.0) && failure.is_none() {
                failure = Some(Witness {
                    t,
                    x,
                    reason: format!("f = {v}"),
                });
            }
        }
    }
    H1Surrogate {
        passed: failure.is_none(),
        min_f,
        failure,
        note: "finite and nonnegative on the sample lattice; measurability and \
               integrable bounds are not checked"
            .into(),
    }
}

/// Everything needed to judge existence of a positive solution for
/// `u'' + a u = f(t, u)` under `bc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub bc: BoundaryKind,
    pub nonlinearity: Expression,
    pub h1: H1Surrogate,
    pub h2: H2Verdict,
    /// Coefficient-weighted variant; periodic and Neumann only.
    pub h2_star: Option<H2Verdict>,
    pub h3: Option<H3Verdict>,
    pub gamma_used: GammaResult,
    pub gamma_star: Option<GammaResult>,
    pub cone: Option<ConeConstants>,
    pub search: SubintervalSearch,
    pub passed: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    pub grid_size: Option<usize>,
    pub gamma: GammaOptions,
    pub cone: ConeOptions,
    pub extra_x: Vec<f64>,
}

/// Builds the kernel, the principal eigenfunction and `gamma`, then checks
/// the hypotheses on the standard lattice.
pub fn check_hypotheses(
    potential: &Potential,
    bc: BoundaryKind,
    f: &Expression,
    opts: &CheckOptions,
) -> Result<HypothesisReport> {
    let grid_size = opts.grid_size.unwrap_or(crate::greens::DEFAULT_GRID);
    let t_end = potential.period();
    let kernel = GreensKernel::build(potential, bc, grid_size)?;
    let weight = Weight::Eigenfunction(principal_eigenfunction(potential, bc, grid_size)?);
    let gamma_used = gamma_quadrature(&kernel, &weight, &opts.gamma)?;
    let lattice = SampleLattice::standard(t_end).with_extra_x(&opts.extra_x);

    let h1 = check_h1(f, t_end, &lattice);
    let h2 = check_h2(f, &weight, gamma_used.value, t_end, &lattice)?;
    let (gamma_star_res, h2_star) = match gamma_star(&kernel, &opts.gamma) {
        Ok(g) => {
            let v = check_h2(
                f,
                &Weight::Coefficient(potential.clone()),
                g.value,
                t_end,
                &lattice,
            )?;
            (Some(g), Some(v))
        }
        Err(Error::UnsupportedBoundaryKind(_) | Error::InvalidWeight(_)) => (None, None),
        Err(e) => return Err(e),
    };
    let search = find_subinterval(&kernel, &opts.cone);
    let (h3, cone) = match search.found {
        Some(sub) => (
            Some(check_h3(&kernel, sub, &opts.cone)),
            Some(compute_cone_constants(&kernel, sub, &opts.cone)?),
        ),
        None => (None, None),
    };
    let h2_ok = h2.passed || h2_star.as_ref().is_some_and(|v| v.passed);
    let passed = h1.passed && h2_ok && h3.is_some_and(|v| v.passed);
    Ok(HypothesisReport {
        bc,
        nonlinearity: f.clone(),
        h1,
        h2,
        h2_star,
        h3,
        gamma_used,
        gamma_star: gamma_star_res,
        cone,
        search,
        passed,
        evidence: EVIDENCE.into(),
    })
}
