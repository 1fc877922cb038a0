//! Command-line front end. [`run`] parses arguments, executes one command and
//! returns the process exit status, so it can be driven from tests.
//!
//! Exit status: 0 on success, 1 on a computational error, 2 on a usage or
//! input error, 3 when the problem is resonant and 4 when `check --strict`
//! finds a failed hypothesis. Errors are reported on stderr as one JSON
//! object `{"error": <kind>, "message": <text>}`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cone::{check_hypotheses, CheckOptions, ConeOptions};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::figures::{figure, FigureOptions};
use crate::gamma::{
    gamma_dirichlet_closed, gamma_periodic_closed, gamma_quadrature, GammaOptions, GammaResult,
    Weight, DEFAULT_ORDER, DEFAULT_SCAN_PANELS, DEFAULT_T_GRID,
};
use crate::greens::{GreensKernel, DEFAULT_GRID};
use crate::problem::{BoundaryKind, Potential, PotentialKind};
use crate::solver::{solve_linear, solve_nonlinear, PicardOptions, SolveOptions};
use crate::spectral::{
    classify_sign_with, principal_eigenfunction_with, smallest_eigenvalue_with, ShootingOptions,
    SignClass,
};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESONANT: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;

/// Relative tolerance for the closed-form versus quadrature cross-check.
pub const CROSS_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "greensign",
    version,
    about = "Green's functions, sign-ratio constants and positive solutions of u'' + a(t) u = f"
)]
pub struct Cli {
    /// Grid size for numeric kernels, eigenfunctions and solution profiles.
    #[arg(long, global = true, env = "GREENSIGN_GRID", default_value_t = DEFAULT_GRID)]
    pub grid: usize,

    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write to this file instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate G(t, s) on a square lattice.
    Green {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value = "periodic")]
        bc: BoundaryKind,
        /// Lattice nodes per axis.
        #[arg(long, default_value_t = 51)]
        points: usize,
        /// Use the fundamental-system kernel even when a closed form exists.
        #[arg(long)]
        numeric: bool,
    },
    /// Smallest eigenvalue under each of the six boundary kinds.
    Eigen {
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        shooting: ShootingArgs,
    },
    /// Sign of the Green's function.
    Classify {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value = "periodic")]
        bc: BoundaryKind,
        #[command(flatten)]
        shooting: ShootingArgs,
    },
    /// Sign-ratio constant gamma, by closed form where one exists and by quadrature.
    Gamma {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value = "periodic")]
        bc: BoundaryKind,
        #[arg(long, value_enum, default_value = "eigenfunction")]
        weight: WeightArg,
        #[command(flatten)]
        gamma: GammaArgs,
        #[command(flatten)]
        shooting: ShootingArgs,
    },
    /// Check the existence hypotheses for a nonlinearity f(t, x).
    Check {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value = "periodic")]
        bc: BoundaryKind,
        /// Nonlinearity in t and x.
        #[arg(long)]
        f: String,
        /// Exit with status 4 when any hypothesis fails.
        #[arg(long)]
        strict: bool,
        /// Extra x-values added to the sampling lattice.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        extra_x: Vec<f64>,
        #[command(flatten)]
        gamma: GammaArgs,
        #[command(flatten)]
        cone: ConeArgs,
    },
    /// Solve u'' + a u = rhs(t) or u'' + a u = f(t, u).
    Solve {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value = "periodic")]
        bc: BoundaryKind,
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        picard: PicardArgs,
    },
    /// Regenerate the data behind figure 1 to 5 as CSV.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        number: u8,
        /// Samples along the horizontal axis (figures 1 to 3).
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// t-nodes for the sweep infimum.
        #[arg(long, default_value_t = 101)]
        t_grid: usize,
        #[arg(long, default_value_t = DEFAULT_SCAN_PANELS)]
        scan_panels: usize,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PotentialSource {
    /// Constant potential a = rho^2. Accepts an expression such as sqrt(60).
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<String>,
    /// Potential a(t) as an expression in t, sampled on --samples nodes.
    #[arg(long, allow_hyphen_values = true)]
    pub potential: Option<String>,
    /// CSV file with a header row and columns t, a.
    #[arg(long)]
    pub potential_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PotentialArgs {
    #[command(flatten)]
    pub source: PotentialSource,
    /// Nodes used to sample --potential.
    #[arg(long, default_value_t = 401)]
    pub samples: usize,
    /// Interval length.
    #[arg(long = "T", default_value_t = 1.0)]
    pub t_end: f64,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Right-hand side sigma(t) for the linear problem.
    #[arg(long, allow_hyphen_values = true)]
    pub rhs: Option<String>,
    /// Nonlinearity f(t, x), solved by damped Picard iteration.
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    /// Principal eigenfunction of the same boundary kind.
    Eigenfunction,
    /// The coefficient a itself (periodic and Neumann only).
    Coefficient,
    One,
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    #[arg(long, default_value_t = DEFAULT_T_GRID)]
    pub t_grid: usize,
    #[arg(long, default_value_t = DEFAULT_SCAN_PANELS)]
    pub scan_panels: usize,
    /// Gauss-Legendre points per panel.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    /// Evaluate t-nodes on one thread.
    #[arg(long)]
    pub serial: bool,
}

impl GammaArgs {
    fn options(&self) -> GammaOptions {
        GammaOptions {
            t_grid: self.t_grid,
            scan_panels: self.scan_panels,
            order: self.order,
            parallel: !self.serial,
        }
    }
}

#[derive(Debug, Args)]
pub struct ShootingArgs {
    /// RK4 steps across [0, T] when shooting.
    #[arg(long, default_value_t = ShootingOptions::default().steps)]
    pub shoot_steps: usize,
    /// Relative bisection width for eigenvalues.
    #[arg(long, default_value_t = ShootingOptions::default().root_tol)]
    pub root_tol: f64,
}

impl ShootingArgs {
    fn options(&self) -> ShootingOptions {
        ShootingOptions {
            steps: self.shoot_steps,
            root_tol: self.root_tol,
            ..ShootingOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ConeArgs {
    /// s-nodes at which the subinterval condition is checked.
    #[arg(long, default_value_t = ConeOptions::default().s_grid)]
    pub s_grid: usize,
    /// Nodes per axis of the scan for max G.
    #[arg(long, default_value_t = ConeOptions::default().max_grid)]
    pub max_grid: usize,
    /// Sign tolerance of the subinterval condition.
    #[arg(long, default_value_t = ConeOptions::default().tol)]
    pub h3_tol: f64,
    /// Narrowest dyadic level of the subinterval search.
    #[arg(long, default_value_t = ConeOptions::default().max_level)]
    pub max_level: u32,
}

impl ConeArgs {
    fn options(&self) -> ConeOptions {
        ConeOptions {
            s_grid: self.s_grid,
            max_grid: self.max_grid,
            tol: self.h3_tol,
            max_level: self.max_level,
            ..ConeOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct PicardArgs {
    /// Damping factor in (0, 1].
    #[arg(long, default_value_t = PicardOptions::default().theta)]
    pub theta: f64,
    #[arg(long, default_value_t = PicardOptions::default().max_iter)]
    pub max_iter: usize,
    /// Stop once successive iterates differ by at most this.
    #[arg(long, default_value_t = PicardOptions::default().tol)]
    pub tol: f64,
    /// Gauss-Legendre points per grid cell.
    #[arg(long, default_value_t = SolveOptions::default().order)]
    pub cell_order: usize,
}

/// `gamma` output: quadrature always, the closed form when one applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub bc: BoundaryKind,
    pub classification: Option<SignClass>,
    pub quadrature: GammaResult,
    pub closed_form: Option<GammaResult>,
}

/// One lattice value of `green --format json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub t: f64,
    pub s: f64,
    pub value: f64,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status. Normal output goes to `stdout` unless `--output` is given.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let _ = write!(stderr, "{}", e.render());
            let _ = writeln!(stderr, "{}", error_line("usage", &e.kind().to_string()));
            return EXIT_USAGE;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line(e.kind(), &e.to_string()));
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ResonantPotential { .. } => EXIT_RESONANT,
        Error::Parse { .. } | Error::InvalidInput(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    let mut sink = Sink::open(cli.output.as_deref(), stdout)?;
    let code = match &cli.command {
        Command::Green {
            potential,
            bc,
            points,
            numeric,
        } => {
            let pot = potential.load()?;
            let kernel = if *numeric {
                GreensKernel::numeric(&pot, *bc, cli.grid)?
            } else {
                GreensKernel::build(&pot, *bc, cli.grid)?
            };
            if *points < 2 {
                return Err(Error::InvalidInput(
                    "lattice needs at least two points".into(),
                ));
            }
            let h = pot.period() / (*points - 1) as f64;
            let mut samples = Vec::with_capacity(points * points);
            for i in 0..*points {
                for j in 0..*points {
                    let (t, s) = (i as f64 * h, j as f64 * h);
                    samples.push(KernelSample {
                        t,
                        s,
                        value: kernel.eval(t, s),
                    });
                }
            }
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => sink.json(&samples)?,
                Format::Csv => sink.csv(
                    &["t", "s", "value"],
                    samples.iter().map(|k| [k.t, k.s, k.value]),
                )?,
            }
            0
        }
        Command::Eigen {
            potential,
            shooting,
        } => {
            let pot = potential.load()?;
            let opts = shooting.options();
            let eigen = BoundaryKind::ALL
                .into_iter()
                .map(|bc| smallest_eigenvalue_with(&pot, bc, &opts))
                .collect::<Result<Vec<_>>>()?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => sink.json(&eigen)?,
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(&mut sink);
                    w.write_record(["bc", "lambda", "method"])
                        .map_err(csv_err)?;
                    for e in &eigen {
                        let method = serde_json::to_value(e.method)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_owned))
                            .unwrap_or_default();
                        w.write_record([e.bc.name(), &e.lambda.to_string(), &method])
                            .map_err(csv_err)?;
                    }
                    w.flush().map_err(io_err)?;
                }
            }
            0
        }
        Command::Classify {
            potential,
            bc,
            shooting,
        } => {
            let pot = potential.load()?;
            let class = classify_sign_with(&pot, *bc, &shooting.options())?;
            json_only(cli.format)?;
            sink.json(&class)?;
            0
        }
        Command::Gamma {
            potential,
            bc,
            weight,
            gamma,
            shooting,
        } => {
            let pot = potential.load()?;
            let report = gamma_report(
                &pot,
                *bc,
                *weight,
                &gamma.options(),
                &shooting.options(),
                cli.grid,
            )?;
            json_only(cli.format)?;
            sink.json(&report)?;
            0
        }
        Command::Check {
            potential,
            bc,
            f,
            strict,
            extra_x,
            gamma,
            cone,
        } => {
            let pot = potential.load()?;
            let f = Expression::parse(f)?;
            let opts = CheckOptions {
                grid_size: Some(cli.grid),
                gamma: gamma.options(),
                cone: cone.options(),
                extra_x: extra_x.clone(),
            };
            let report = check_hypotheses(&pot, *bc, &f, &opts)?;
            json_only(cli.format)?;
            sink.json(&report)?;
            if *strict && !report.passed {
                EXIT_HYPOTHESIS
            } else {
                0
            }
        }
        Command::Solve {
            potential,
            bc,
            source,
            picard,
        } => {
            let pot = potential.load()?;
            let t_end = pot.period();
            let kernel = GreensKernel::build(&pot, *bc, cli.grid)?;
            let opts = SolveOptions {
                grid_size: cli.grid,
                order: picard.cell_order,
            };
            let profile = match (&source.rhs, &source.f) {
                (Some(rhs), _) => {
                    let rhs = Expression::parse(rhs)?;
                    if rhs.depends_on_x() {
                        return Err(Error::InvalidInput(
                            "--rhs may not depend on x; use --f for nonlinear problems".into(),
                        ));
                    }
                    solve_linear(&kernel, |t| rhs.eval(t, 0.0, t_end), &opts)?
                }
                (None, Some(f)) => {
                    let f = Expression::parse(f)?;
                    let p = PicardOptions {
                        theta: picard.theta,
                        max_iter: picard.max_iter,
                        tol: picard.tol,
                    };
                    solve_nonlinear(&kernel, &f, &opts, &p)?
                }
                (None, None) => unreachable!("clap requires --rhs or --f"),
            };
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => sink.json(&profile)?,
                Format::Csv => sink.csv(
                    &["t", "u"],
                    profile
                        .grid
                        .iter()
                        .zip(&profile.values)
                        .map(|(&t, &u)| [t, u]),
                )?,
            }
            0
        }
        Command::Figure {
            number,
            points,
            t_grid,
            scan_panels,
            order,
        } => {
            if cli.format == Some(Format::Json) {
                return Err(Error::InvalidInput("figures are written as CSV".into()));
            }
            let opts = FigureOptions {
                points: *points,
                grid_size: cli.grid,
                gamma: GammaOptions {
                    t_grid: *t_grid,
                    scan_panels: *scan_panels,
                    order: *order,
                    parallel: true,
                },
            };
            figure(*number, &opts)?.write_csv(&mut sink)?;
            0
        }
    };
    sink.flush().map_err(io_err)?;
    Ok(code)
}

fn json_only(format: Option<Format>) -> Result<()> {
    if format == Some(Format::Csv) {
        return Err(Error::InvalidInput("this command only writes JSON".into()));
    }
    Ok(())
}

/// Quadrature `gamma` plus the closed form where one exists: periodic
/// constant potentials with `rho T > pi`, and the Dirichlet problem with
/// `T = 1` and `pi < rho < 6 pi`.
pub fn gamma_report(
    potential: &Potential,
    bc: BoundaryKind,
    weight: WeightArg,
    opts: &GammaOptions,
    shooting: &ShootingOptions,
    grid_size: usize,
) -> Result<GammaReport> {
    let classification = match classify_sign_with(potential, bc, shooting) {
        Ok(c) => Some(c),
        Err(Error::UnsupportedBoundaryKind(_)) => None,
        Err(e) => return Err(e),
    };
    let kernel = GreensKernel::build(potential, bc, grid_size)?;
    let w = match weight {
        WeightArg::Eigenfunction => Weight::Eigenfunction(principal_eigenfunction_with(
            potential, bc, grid_size, shooting,
        )?),
        WeightArg::Coefficient => {
            if !matches!(bc, BoundaryKind::Periodic | BoundaryKind::Neumann) {
                return Err(Error::UnsupportedBoundaryKind(bc));
            }
            Weight::Coefficient(potential.clone())
        }
        WeightArg::One => Weight::One,
    };
    let mut quadrature = gamma_quadrature(&kernel, &w, opts)?;
    let t_end = potential.period();
    let closed_form = match (potential.kind(), bc, weight) {
        (
            &PotentialKind::Constant { rho },
            BoundaryKind::Periodic,
            WeightArg::Eigenfunction | WeightArg::One,
        ) if rho * t_end > std::f64::consts::PI => Some(gamma_periodic_closed(rho, t_end)?),
        (&PotentialKind::Constant { rho }, BoundaryKind::Dirichlet, WeightArg::Eigenfunction)
            if t_end == 1.0 && rho > std::f64::consts::PI && rho < 6.0 * std::f64::consts::PI =>
        {
            Some(gamma_dirichlet_closed(rho)?)
        }
        _ => None,
    };
    if let Some(closed) = &closed_form {
        quadrature = quadrature.with_cross_check(closed, CROSS_CHECK_TOL);
    }
    Ok(GammaReport {
        bc,
        classification,
        quadrature,
        closed_form,
    })
}

impl PotentialArgs {
    pub fn load(&self) -> Result<Potential> {
        let t_end = self.t_end;
        let src = &self.source;
        if let Some(rho) = &src.rho {
            let e = Expression::parse(rho)?;
            return Potential::constant(e.eval(0.0, 0.0, t_end), t_end);
        }
        if let Some(a) = &src.potential {
            let e = Expression::parse(a)?;
            return Potential::sample_fn(t_end, self.samples, |t| e.eval(t, 0.0, t_end));
        }
        match &src.potential_file {
            Some(path) => read_potential(path),
            None => Err(Error::InvalidInput("no potential given".into())),
        }
    }
}

/// Reads `t, a` rows (after a header) from a CSV file.
pub fn read_potential(path: &Path) -> Result<Potential> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let (mut grid, mut values) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let field = |j: usize| -> Result<f64> {
            record
                .get(j)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "{}: row {} needs two numeric columns",
                        path.display(),
                        i + 2
                    ))
                })
        };
        grid.push(field(0)?);
        values.push(field(1)?);
    }
    Potential::sampled(grid, values)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// Either the given stdout or a buffered file.
enum Sink<'a> {
    Stdout(&'a mut dyn Write),
    File(BufWriter<File>),
}

impl<'a> Sink<'a> {
    fn open(path: Option<&Path>, stdout: &'a mut dyn Write) -> Result<Self> {
        Ok(match path {
            Some(p) => Sink::File(BufWriter::new(
                File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
            )),
            None => Sink::Stdout(stdout),
        })
    }

    fn json<V: Serialize>(&mut self, value: &V) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(self, "{text}").map_err(io_err)
    }

    fn csv<const N: usize>(
        &mut self,
        header: &[&str; N],
        rows: impl Iterator<Item = [f64; N]>,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(self);
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row.map(crate::extended::format))
                .map_err(csv_err)?;
        }
        w.flush().map_err(io_err)
    }
}

impl Write for Sink<'_> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        match self {
            Sink::Stdout(w) => w.write(buf),
            Sink::File(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> std::io::Result<()> {
        match self {
            Sink::Stdout(w) => w.flush(),
            Sink::File(w) => w.flush(),
        }
    }
}
