//! Batch front end behind the `bhf` binary.
//!
//! [`parse_config`] merges an optional JSON config file with command-line
//! flags, [`run`] dispatches to a solver and [`main_with_args`] writes the
//! JSON report and sweep CSV. Exit status is 0 when every requested solve
//! converged, 2 when one did not (the report is still written) and 1 on
//! usage or I/O errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent::{coherent_p2_expansion, solve_coherent};
use crate::energy::Fiber;
use crate::error::{Error, Result};
use crate::fock::{agreement_table, AgreementRow, MAX_MODES, MAX_PHOTONS};
use crate::grid::MomentumGrid;
use crate::lagrange::lagrange_iterate;
use crate::perturbation::{c22_quadrature, c40_grid, c40_quadrature, energy_fourth_order, C22Report, PerturbativeSummary};
use crate::quadrature::SphericalRule;
use crate::quasifree::sample_squeeze;
use crate::variational::{minimize_quasifree, MinimizeOptions};
use crate::{norm3, Vec3};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BHF_OUT_DIR";

pub const CSV_HEADER: &str = "g,p_norm,E_vac,E_coh,E_qf,E_lagrange,E_pert2,E_pert4,iters,residual";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Coherent,
    Quasifree,
    Lagrange,
    Perturb,
    Oracle,
    Sweep,
}

impl SolverKind {
    fn default_tol(self) -> f64 {
        match self {
            SolverKind::Coherent => 1e-10,
            _ => 1e-8,
        }
    }

    fn needs_positive_sigma(self) -> bool {
        matches!(self, SolverKind::Quasifree | SolverKind::Lagrange | SolverKind::Sweep)
    }

    fn name(self) -> &'static str {
        match self {
            SolverKind::Coherent => "coherent",
            SolverKind::Quasifree => "quasifree",
            SolverKind::Lagrange => "lagrange",
            SolverKind::Perturb => "perturb",
            SolverKind::Oracle => "oracle",
            SolverKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sigma: f64,
    pub cutoff: f64,
    pub g: f64,
    pub p: Vec3,
    pub n_radial: usize,
    pub n_angular: usize,
    pub solver: SolverKind,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// Worker threads for sweeps.
    pub jobs: usize,
    /// Coupling values of the sweep lattice.
    pub sweep_g: Vec<f64>,
    /// Momentum magnitudes of the sweep lattice, taken along the direction of `p`.
    pub sweep_p: Vec<f64>,
    pub oracle_modes: usize,
    pub oracle_nmax: usize,
    /// Entry scale of the random `(f, r)` probed by the oracle.
    pub oracle_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            cutoff: 2.0,
            g: 0.05,
            p: [0.0, 0.0, 0.1],
            n_radial: 8,
            n_angular: 26,
            solver: SolverKind::Coherent,
            tol: SolverKind::Coherent.default_tol(),
            max_iter: 500,
            seed: 0,
            out: None,
            csv: None,
            jobs: 1,
            sweep_g: vec![0.02, 0.05, 0.1],
            sweep_p: vec![0.05, 0.1, 0.3],
            oracle_modes: 2,
            oracle_nmax: 8,
            oracle_scale: 0.2,
        }
    }
}

/// Config file contents; every field is optional and flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    sigma: Option<f64>,
    cutoff: Option<f64>,
    g: Option<f64>,
    p: Option<Vec3>,
    n_radial: Option<usize>,
    n_angular: Option<usize>,
    solver: Option<SolverKind>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    jobs: Option<usize>,
    sweep_g: Option<Vec<f64>>,
    sweep_p: Option<Vec<f64>>,
    oracle_modes: Option<usize>,
    oracle_nmax: Option<usize>,
    oracle_scale: Option<f64>,
}

#[derive(Debug, Parser)]
#[command(name = "bhf", version, about = "Quasifree ground-state energies of the Pauli-Fierz fiber Hamiltonian")]
struct Args {
    /// JSON file with default values for any of the options below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Infrared cutoff of the photon momentum shell.
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    /// Ultraviolet cutoff.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Coupling constant.
    #[arg(long, allow_hyphen_values = true)]
    g: Option<f64>,
    /// Total momentum as "x,y,z".
    #[arg(long, allow_hyphen_values = true)]
    p: Option<String>,
    /// Radial Gauss-Legendre nodes.
    #[arg(long = "nr")]
    n_radial: Option<usize>,
    /// Angular nodes: 6, 14, 26, 38, 50 or 2m².
    #[arg(long = "nang")]
    n_angular: Option<usize>,
    /// Solver to run (default coherent).
    #[arg(long, value_enum)]
    solver: Option<SolverKind>,
    /// Convergence tolerance (default 1e-10 for coherent, 1e-8 otherwise).
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    /// Iteration cap per solver.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Sweep couplings as "g1,g2,...".
    #[arg(long, allow_hyphen_values = true)]
    sweep_g: Option<String>,
    /// Sweep momentum magnitudes as "p1,p2,...".
    #[arg(long, allow_hyphen_values = true)]
    sweep_p: Option<String>,
    /// Modes of the truncated Fock space.
    #[arg(long)]
    oracle_modes: Option<usize>,
    /// Largest photon-number cutoff of the oracle table.
    #[arg(long)]
    oracle_nmax: Option<usize>,
    /// Entry scale of the random states probed by the oracle.
    #[arg(long, allow_hyphen_values = true)]
    oracle_scale: Option<f64>,
}

fn parse_list(s: &str, what: &str, errors: &mut Vec<String>) -> Option<Vec<f64>> {
    let parsed: std::result::Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
    match parsed {
        Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Some(v),
        _ => {
            errors.push(format!("{what}: expected comma-separated numbers, got \"{s}\""));
            None
        }
    }
}

fn validate(cfg: &RunConfig, errors: &mut Vec<String>) {
    if !(cfg.sigma >= 0.0) {
        errors.push("sigma >= 0 required".into());
    }
    if !(cfg.sigma < cfg.cutoff) || !cfg.cutoff.is_finite() {
        errors.push("sigma < cutoff required".into());
    }
    if cfg.solver.needs_positive_sigma() && !(cfg.sigma > 0.0) {
        errors.push(format!("solver {} requires sigma > 0", cfg.solver.name()));
    }
    if !(cfg.tol > 0.0) {
        errors.push("tol > 0 required".into());
    }
    if !cfg.g.is_finite() || cfg.p.iter().any(|x| !x.is_finite()) {
        errors.push("g and p must be finite".into());
    }
    if cfg.n_radial < 2 {
        errors.push("nr >= 2 required".into());
    }
    if let Err(e) = SphericalRule::from_size(cfg.n_angular) {
        errors.push(format!("nang: {e}"));
    }
    if cfg.max_iter == 0 {
        errors.push("max-iter >= 1 required".into());
    }
    if cfg.jobs == 0 {
        errors.push("jobs >= 1 required".into());
    }
    if cfg.solver == SolverKind::Oracle {
        if !(1..=MAX_MODES).contains(&cfg.oracle_modes) {
            errors.push(format!("oracle-modes must lie in 1..={MAX_MODES}"));
        }
        if !(2..=MAX_PHOTONS).contains(&cfg.oracle_nmax) {
            errors.push(format!("oracle-nmax must lie in 2..={MAX_PHOTONS}"));
        }
        if !(cfg.oracle_scale >= 0.0 && cfg.oracle_scale.is_finite()) {
            errors.push("oracle-scale >= 0 required".into());
        }
    }
}

fn from_args(args: Args) -> Result<RunConfig> {
    let mut errors = Vec::new();
    let file = match &args.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(text) => serde_json::from_str::<ConfigFile>(&text).unwrap_or_else(|e| {
                errors.push(format!("config file {}: {e}", path.display()));
                ConfigFile::default()
            }),
            Err(e) => {
                errors.push(format!("config file {}: {e}", path.display()));
                ConfigFile::default()
            }
        },
        None => ConfigFile::default(),
    };
    let d = RunConfig::default();
    let solver = args.solver.or(file.solver).unwrap_or(d.solver);
    let mut p = args.p.as_deref().and_then(|s| {
        let v = parse_list(s, "p", &mut errors)?;
        if v.len() == 3 {
            Some([v[0], v[1], v[2]])
        } else {
            errors.push(format!("p: expected three components, got {}", v.len()));
            None
        }
    });
    p = p.or(file.p);
    let sweep_g = args.sweep_g.as_deref().and_then(|s| parse_list(s, "sweep-g", &mut errors));
    let sweep_p = args.sweep_p.as_deref().and_then(|s| parse_list(s, "sweep-p", &mut errors));
    let cfg = RunConfig {
        sigma: args.sigma.or(file.sigma).unwrap_or(d.sigma),
        cutoff: args.cutoff.or(file.cutoff).unwrap_or(d.cutoff),
        g: args.g.or(file.g).unwrap_or(d.g),
        p: p.unwrap_or(d.p),
        n_radial: args.n_radial.or(file.n_radial).unwrap_or(d.n_radial),
        n_angular: args.n_angular.or(file.n_angular).unwrap_or(d.n_angular),
        solver,
        tol: args.tol.or(file.tol).unwrap_or(solver.default_tol()),
        max_iter: args.max_iter.or(file.max_iter).unwrap_or(d.max_iter),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
        out: args.out.or(file.out),
        csv: args.csv.or(file.csv),
        jobs: args.jobs.or(file.jobs).unwrap_or(d.jobs),
        sweep_g: sweep_g.or(file.sweep_g).unwrap_or(d.sweep_g),
        sweep_p: sweep_p.or(file.sweep_p).unwrap_or(d.sweep_p),
        oracle_modes: args.oracle_modes.or(file.oracle_modes).unwrap_or(d.oracle_modes),
        oracle_nmax: args.oracle_nmax.or(file.oracle_nmax).unwrap_or(d.oracle_nmax),
        oracle_scale: args.oracle_scale.or(file.oracle_scale).unwrap_or(d.oracle_scale),
    };
    validate(&cfg, &mut errors);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Parameter(errors.join("\n")))
    }
}

/// Parses `argv` (program name first) into a validated config. Every problem
/// found is listed in the returned parameter error.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| Error::Parameter(e.to_string()))?;
    from_args(args)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    NotConverged,
    Failed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    pub vacuum: Option<f64>,
    pub coherent: Option<f64>,
    pub quasifree: Option<f64>,
    pub lagrange: Option<f64>,
    /// Second-order expansion of the coherent energy in `p`.
    pub pert2: Option<f64>,
    /// Fourth-order prediction in `(g, p)`.
    pub pert4: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Traces {
    pub contraction: Vec<f64>,
    pub energy: Vec<f64>,
    pub residual: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C40Report {
    pub grid: f64,
    pub reduced: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub g: f64,
    pub p_norm: f64,
    pub energies: Energies,
    pub iters: Option<usize>,
    pub residual: Option<f64>,
    pub converged: bool,
    pub message: Option<String>,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        // Debug formatting is the shortest exact representation and uses an
        // exponent for tiny residuals.
        fn cell<T: std::fmt::Debug>(v: Option<T>) -> String {
            v.map(|x| format!("{x:?}")).unwrap_or_default()
        }
        let e = &self.energies;
        [
            format!("{:?}", self.g),
            format!("{:?}", self.p_norm),
            cell(e.vacuum),
            cell(e.coherent),
            cell(e.quasifree),
            cell(e.lagrange),
            cell(e.pert2),
            cell(e.pert4),
            cell(self.iters),
            cell(self.residual),
        ]
        .join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: RunConfig,
    pub status: Status,
    pub message: Option<String>,
    pub energies: Energies,
    pub u: Option<Vec3>,
    pub photon_number: Option<f64>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    /// Whether the run lies in the regime where the minimizer is proven unique.
    pub certified: Option<bool>,
    pub traces: Traces,
    pub perturbative: Option<PerturbativeSummary>,
    pub c22: Option<C22Report>,
    pub c40: Option<C40Report>,
    pub oracle: Option<Vec<AgreementRow>>,
    pub sweep: Option<Vec<SweepRow>>,
    /// Seconds; the only field that differs between identical runs.
    pub wall_time: f64,
}

impl RunReport {
    fn new(config: &RunConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            status: Status::Converged,
            message: None,
            energies: Energies::default(),
            u: None,
            photon_number: None,
            iterations: None,
            residual: None,
            certified: None,
            traces: Traces::default(),
            perturbative: None,
            c22: None,
            c40: None,
            oracle: None,
            sweep: None,
            wall_time: 0.0,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Converged => 0,
            _ => 2,
        }
    }

    /// Copy with the timing field zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self { wall_time: 0.0, ..self.clone() }
    }

    fn not_converged(&mut self, why: &str) {
        if self.status == Status::Converged {
            self.status = Status::NotConverged;
        }
        self.message = Some(match self.message.take() {
            Some(m) => format!("{m}; {why}"),
            None => why.to_string(),
        });
    }
}

fn coherent_tol(cfg: &RunConfig) -> f64 {
    cfg.tol.min(SolverKind::Coherent.default_tol())
}

fn variational_opts(cfg: &RunConfig) -> MinimizeOptions {
    MinimizeOptions { tol: cfg.tol, max_iter: cfg.max_iter, seed: cfg.seed, ..Default::default() }
}

fn run_coherent(fiber: &Fiber, cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let coh = solve_coherent(fiber, cfg.tol, cfg.max_iter)?;
    rep.energies.coherent = Some(coh.energy);
    rep.energies.pert2 = Some(coherent_p2_expansion(fiber)?);
    rep.u = Some(coh.u);
    rep.photon_number = Some(coh.f.norm_sqr());
    rep.iterations = Some(coh.iterations);
    rep.residual = Some(coh.residual);
    rep.traces.contraction = coh.contraction_trace;
    if !coh.converged {
        rep.not_converged("coherent fixed point did not converge");
    }
    Ok(())
}

fn run_quasifree(fiber: &Fiber, cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let coh = solve_coherent(fiber, coherent_tol(cfg), cfg.max_iter)?;
    rep.energies.coherent = Some(coh.energy);
    let v = minimize_quasifree(fiber, &variational_opts(cfg))?;
    rep.energies.quasifree = Some(v.energy);
    rep.u = Some(v.u);
    rep.photon_number = Some(v.photon_number);
    rep.iterations = Some(v.iterations);
    rep.residual = Some(v.grad_norm);
    rep.certified = Some(v.certified);
    rep.traces.energy = v.energy_trace;
    if !v.converged {
        rep.not_converged("quasifree descent did not reach the gradient tolerance");
    }
    Ok(())
}

fn run_lagrange(fiber: &Fiber, cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let l = lagrange_iterate(fiber, cfg.tol, cfg.max_iter)?;
    rep.energies.lagrange = Some(l.energy);
    rep.u = Some(l.state.u);
    rep.photon_number = Some(l.photon_number);
    rep.iterations = Some(l.iterations);
    rep.residual = Some(l.residuals.max());
    rep.certified = Some(l.certified);
    rep.traces.contraction = l.contraction_trace;
    rep.traces.residual = l.residual_trace;
    if !l.converged {
        rep.not_converged("Lagrange iteration did not converge");
    }
    Ok(())
}

fn run_perturb(fiber: &Fiber, grid: &MomentumGrid, rep: &mut RunReport) -> Result<()> {
    let s = energy_fourth_order(fiber);
    rep.energies.pert2 = Some(coherent_p2_expansion(fiber)?);
    rep.energies.pert4 = Some(s.e_pred);
    rep.perturbative = Some(s);
    rep.c22 = Some(c22_quadrature(grid));
    rep.c40 = Some(C40Report { grid: c40_grid(grid), reduced: c40_quadrature(grid.sigma(), grid.cutoff(), 24) });
    Ok(())
}

/// Evenly spread node indices for a small sub-grid.
pub fn oracle_nodes(len: usize, d: usize) -> Vec<usize> {
    (0..d).map(|i| i * len / d).collect()
}

fn run_oracle(grid: &MomentumGrid, cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let d = cfg.oracle_modes;
    let small = grid.subgrid(&oracle_nodes(grid.len(), d))?;
    let (f, r) = sample_squeeze(cfg.seed, cfg.oracle_scale, d);
    let mut cutoffs: Vec<usize> = (2..=cfg.oracle_nmax).step_by(2).collect();
    if cfg.oracle_nmax % 2 == 1 {
        cutoffs.push(cfg.oracle_nmax);
    }
    let rows = agreement_table(&small, cfg.g, cfg.p, &f, &r, &cutoffs)?;
    rep.energies.vacuum = Some(Fiber::new(&small, cfg.g, cfg.p).vacuum_energy());
    rep.residual = rows.last().map(|r| r.rel_error);
    if !rows.windows(2).all(|w| w[1].rel_error < w[0].rel_error) {
        rep.not_converged("oracle error is not strictly decreasing in the photon cutoff");
    }
    rep.oracle = Some(rows);
    Ok(())
}

fn sweep_point(grid: &MomentumGrid, cfg: &RunConfig, g: f64, p_norm: f64) -> SweepRow {
    let dir = {
        let n = norm3(&cfg.p);
        if n > 0.0 {
            [cfg.p[0] / n, cfg.p[1] / n, cfg.p[2] / n]
        } else {
            [0.0, 0.0, 1.0]
        }
    };
    let p = [dir[0] * p_norm, dir[1] * p_norm, dir[2] * p_norm];
    let fiber = Fiber::new(grid, g, p);
    let mut row = SweepRow {
        g,
        p_norm,
        energies: Energies { vacuum: Some(fiber.vacuum_energy()), ..Default::default() },
        iters: None,
        residual: None,
        converged: true,
        message: None,
    };
    let fail = |row: &mut SweepRow, why: String| {
        row.converged = false;
        row.message = Some(match row.message.take() {
            Some(m) => format!("{m}; {why}"),
            None => why,
        });
    };
    match solve_coherent(&fiber, coherent_tol(cfg), cfg.max_iter) {
        Ok(c) if c.converged => row.energies.coherent = Some(c.energy),
        Ok(_) => fail(&mut row, "coherent: not converged".into()),
        Err(e) => fail(&mut row, format!("coherent: {e}")),
    }
    match minimize_quasifree(&fiber, &variational_opts(cfg)) {
        Ok(v) if v.converged => row.energies.quasifree = Some(v.energy),
        Ok(_) => fail(&mut row, "quasifree: not converged".into()),
        Err(e) => fail(&mut row, format!("quasifree: {e}")),
    }
    match lagrange_iterate(&fiber, cfg.tol, cfg.max_iter) {
        Ok(l) => {
            row.iters = Some(l.iterations);
            row.residual = Some(l.residuals.max());
            if l.converged {
                row.energies.lagrange = Some(l.energy);
            } else {
                fail(&mut row, "lagrange: not converged".into());
            }
        }
        Err(e) => fail(&mut row, format!("lagrange: {e}")),
    }
    match coherent_p2_expansion(&fiber) {
        Ok(e) => row.energies.pert2 = Some(e),
        Err(e) => fail(&mut row, format!("pert2: {e}")),
    }
    row.energies.pert4 = Some(energy_fourth_order(&fiber).e_pred);
    row
}

fn run_sweep(grid: &MomentumGrid, cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let points: Vec<(f64, f64)> =
        cfg.sweep_g.iter().flat_map(|&g| cfg.sweep_p.iter().map(move |&p| (g, p))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| points.par_iter().map(|&(g, p)| sweep_point(grid, cfg, g, p)).collect());
    let failed = rows.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        rep.not_converged(&format!("{failed} of {} sweep points did not converge", rows.len()));
    }
    rep.sweep = Some(rows);
    Ok(())
}

fn dispatch(cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let grid = MomentumGrid::build(cfg.sigma, cfg.cutoff, cfg.n_radial, cfg.n_angular)?;
    let fiber = Fiber::new(&grid, cfg.g, cfg.p);
    if cfg.solver != SolverKind::Oracle {
        rep.energies.vacuum = Some(fiber.vacuum_energy());
    }
    match cfg.solver {
        SolverKind::Coherent => run_coherent(&fiber, cfg, rep),
        SolverKind::Quasifree => run_quasifree(&fiber, cfg, rep),
        SolverKind::Lagrange => run_lagrange(&fiber, cfg, rep),
        SolverKind::Perturb => run_perturb(&fiber, &grid, rep),
        SolverKind::Oracle => run_oracle(&grid, cfg, rep),
        SolverKind::Sweep => run_sweep(&grid, cfg, rep),
    }
}

/// Runs the configured solver. Solver errors end up in `status` and `message`.
///
/// Dense kernels run sequentially so that every value is independent of
/// `--jobs` and of the host's core count; sweeps parallelize over points.
pub fn run(cfg: &RunConfig) -> RunReport {
    faer::set_global_parallelism(faer::Par::Seq);
    let start = Instant::now();
    let mut rep = RunReport::new(cfg);
    if let Err(e) = dispatch(cfg, &mut rep) {
        rep.status = Status::Failed;
        rep.message = Some(e.to_string());
    }
    rep.wall_time = start.elapsed().as_secs_f64();
    rep
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// Writes through a sibling temporary file and a rename, so readers never
/// observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Where the report, sweep CSV and per-point reports go.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub points: Option<PathBuf>,
}

pub fn output_paths(cfg: &RunConfig, env_dir: Option<PathBuf>) -> OutputPaths {
    let report = cfg.out.clone().or_else(|| env_dir.as_ref().map(|d| d.join("report.json")));
    let dir = report.as_ref().and_then(|r| r.parent().map(Path::to_path_buf)).or(env_dir);
    let sweep = cfg.solver == SolverKind::Sweep;
    OutputPaths {
        csv: if sweep { cfg.csv.clone().or_else(|| dir.as_ref().map(|d| d.join("sweep.csv"))) } else { None },
        points: if sweep { dir.map(|d| d.join("points")) } else { None },
        report,
    }
}

/// Writes to a standard stream; a reader that closed the pipe early is not an error.
fn print_stream(w: &mut impl std::io::Write, text: &str) -> Result<()> {
    match writeln!(w, "{}", text.trim_end()).and_then(|_| w.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn write_outputs(rep: &RunReport, paths: &OutputPaths) -> Result<()> {
    let json = serde_json::to_string_pretty(rep)?;
    match &paths.report {
        Some(p) => write_atomic(p, json.as_bytes())?,
        None => print_stream(&mut std::io::stdout().lock(), &json)?,
    }
    if let Some(rows) = &rep.sweep {
        if let Some(dir) = &paths.points {
            rows.par_iter().enumerate().try_for_each(|(i, row)| {
                write_atomic(&dir.join(format!("point_{i:04}.json")), serde_json::to_string_pretty(row)?.as_bytes())
            })?;
        }
        match &paths.csv {
            Some(p) => write_atomic(p, sweep_csv(rows).as_bytes())?,
            None => print_stream(&mut std::io::stderr().lock(), &sweep_csv(rows))?,
        }
    }
    Ok(())
}

/// Full command-line entry point; returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cfg = match from_args(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("usage error:\n{e}");
            return 1;
        }
    };
    let rep = run(&cfg);
    if let Some(m) = &rep.message {
        eprintln!("{m}");
    }
    let paths = output_paths(&cfg, std::env::var_os(OUT_DIR_ENV).map(PathBuf::from));
    if let Err(e) = write_outputs(&rep, &paths) {
        eprintln!("writing outputs: {e}");
        return 1;
    }
    rep.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("bhf".to_string()).chain(s.split_whitespace().map(String::from)).collect()
    }

    #[test]
    fn valid_coherent_config() {
        let cfg = parse_config(argv("--sigma 0.5 --cutoff 2 --g 0.05 --p 0.1,0,0 --solver coherent")).unwrap();
        assert_eq!(cfg.p, [0.1, 0.0, 0.0]);
        assert_eq!(cfg.solver, SolverKind::Coherent);
        assert_eq!(cfg.tol, 1e-10);
    }

    #[test]
    fn usage_errors_are_listed() {
        let Err(Error::Parameter(m)) = parse_config(argv("--sigma 2 --cutoff 1")) else { panic!() };
        assert!(m.contains("sigma < cutoff required"));
        let Err(Error::Parameter(m)) = parse_config(argv("--solver quasifree --sigma 0")) else { panic!() };
        assert!(m.contains("sigma > 0"));
        let Err(Error::Parameter(m)) = parse_config(argv("--p 1,2 --tol -1 --nang 7")) else { panic!() };
        assert!(m.contains("three components") && m.contains("tol > 0") && m.contains("nang"));
        assert!(parse_config(argv("--solver nope")).is_err());
    }

    #[test]
    fn negative_momentum_components_parse() {
        let cfg = parse_config(argv("--p -0.1,0,0.2")).unwrap();
        assert_eq!(cfg.p, [-0.1, 0.0, 0.2]);
    }

    #[test]
    fn csv_missing_values_are_empty() {
        let row = SweepRow {
            g: 0.1,
            p_norm: 0.2,
            energies: Energies { vacuum: Some(1.5), ..Default::default() },
            iters: None,
            residual: None,
            converged: false,
            message: None,
        };
        assert_eq!(row.csv_line(), "0.1,0.2,1.5,,,,,,,");
        assert_eq!(sweep_csv(&[row]).lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn output_paths_follow_env_dir() {
        let cfg = RunConfig { solver: SolverKind::Sweep, ..Default::default() };
        let p = output_paths(&cfg, Some(PathBuf::from("/tmp/x")));
        assert_eq!(p.report, Some(PathBuf::from("/tmp/x/report.json")));
        assert_eq!(p.csv, Some(PathBuf::from("/tmp/x/sweep.csv")));
        assert_eq!(p.points, Some(PathBuf::from("/tmp/x/points")));
        let p = output_paths(&RunConfig::default(), None);
        assert_eq!(p, OutputPaths { report: None, csv: None, points: None });
    }

    #[test]
    fn coherent_run_at_rest() {
        let cfg = parse_config(argv("--p 0,0,0 --nr 2 --nang 6")).unwrap();
        let rep = run(&cfg);
        assert_eq!(rep.status, Status::Converged);
        let half_g2 = rep.energies.vacuum.unwrap();
        assert_eq!(rep.energies.coherent, Some(half_g2));
        assert!(rep.iterations.unwrap() <= 2);
    }
}
