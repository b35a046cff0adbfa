//! One function per subcommand; each writes its tables into the output directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use weylrat::direct::{
    bound_m, integrate_checked, sample_weyl_function, symmetric_grid, WeylData,
};
use weylrat::inverse::{
    projector_error, recover_from_weyl_function, recover_from_weyl_set, resampled_mismatch,
    sample_weyl_set, ReconstructionReport, WeylSetData,
};
use weylrat::linalg::{Mat2, I, ONE, ZERO};
use weylrat::model::gauge_q;
use weylrat::presets::{smooth_potential, weyl_set_potential};
use weylrat::sgordon::{
    recover_cos_omega, BoundaryData, Constant, Kink, SgSolution, SgSpectral, TimePotentials,
};
use weylrat::snode::{
    assemble_s, identity_residual, inverse_sweep, resolvent_apply, transfer_profile, Contour,
    PhiColumns,
};
use weylrat::{Error, GridSpec, PoleSet, PotentialField, C64};

use crate::config::{ConfigError, Mode, Preset, RunConfig, SgSolutionConfig};
use crate::emit::{complex_column, num, potential_from_table, potential_table, push_complex, Diagnostics, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_QUALITY: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Resampling stride for the recovered system's Weyl-function check.
const MISMATCH_STRIDE: usize = 16;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// A pipeline stage failed or missed its tolerance.
    Quality(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Quality(_) => EXIT_QUALITY,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Quality(e) => write!(f, "numerical failure: {e}"),
            CliError::Internal(e) => write!(f, "internal error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

/// Library errors: bad inputs are configuration errors, a misplaced contour is
/// ours, everything else is numerical.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e.root() {
            Error::Validation(_) | Error::Partition(_) => {
                CliError::Config(ConfigError::new("input", e.to_string()))
            }
            Error::Contour { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Quality(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

/// What a run wrote, and whether its tolerances held.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Failed tolerance checks; non-empty means exit 3 after the artifacts are written.
    pub failures: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    hash: String,
    out: PathBuf,
    verbose: bool,
    start: Instant,
    files: Vec<PathBuf>,
    failures: Vec<String>,
    diag: Diagnostics,
}

impl Ctx<'_> {
    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("[{:>8.3}s] {msg}", self.start.elapsed().as_secs_f64());
        }
    }

    fn emit(&mut self, name: &str, table: &mut Table) -> Result<(), CliError> {
        table.meta.insert(0, ("config_sha256".into(), self.hash.clone()));
        let path = self.out.join(name);
        table.write(&path).map_err(|e| io_error(&path, e))?;
        self.log(&format!("wrote {}", path.display()));
        self.files.push(path);
        Ok(())
    }

    /// Records `value` and fails the run (later) if it exceeds `limit`.
    fn check(&mut self, key: &str, value: f64, limit: f64) {
        self.diag.num(key, value);
        self.diag.num(format!("{key}_limit"), limit);
        if !(value <= limit) {
            self.failures.push(format!("{key} = {value:e} exceeds {limit:e}"));
        }
    }

    fn finish(mut self) -> Result<Outcome, CliError> {
        self.diag.text("status", if self.failures.is_empty() { "ok" } else { "failed" });
        let path = self.out.join("diagnostics.csv");
        std::fs::write(&path, self.diag.render(&self.hash)).map_err(|e| io_error(&path, e))?;
        self.files.push(path);
        Ok(Outcome {
            files: self.files,
            failures: self.failures,
        })
    }
}

pub fn run(cfg: &RunConfig, mode: Mode, out: &Path, verbose: bool) -> Result<Outcome, CliError> {
    cfg.validate(mode)?;
    std::fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let mut ctx = Ctx {
        cfg,
        hash: cfg.hash()?,
        out: out.to_path_buf(),
        verbose,
        start: Instant::now(),
        files: Vec::new(),
        failures: Vec::new(),
        diag: Diagnostics::default(),
    };
    ctx.diag.text("mode", mode);
    ctx.log(&format!("{mode}: config {}", ctx.hash));
    match mode {
        Mode::Direct => direct(&mut ctx),
        Mode::Inverse => inverse(&mut ctx),
        Mode::Roundtrip => roundtrip(&mut ctx),
        Mode::WeylSet => weyl_set(&mut ctx),
        Mode::Sg => sg(&mut ctx),
        Mode::Selftest => selftest(&mut ctx),
    }?;
    ctx.finish()
}

fn zeta(cfg: &RunConfig) -> Vec<f64> {
    symmetric_grid(cfg.spectral.zeta_max, cfg.spectral.zeta_count)
}

/// Ground truth from `paths.input` or the named preset, on the configured grid.
fn load_potential(ctx: &Ctx, poles: &PoleSet) -> Result<PotentialField, CliError> {
    let field = match &ctx.cfg.paths.input {
        Some(path) => {
            let t = Table::read(path).map_err(|e| ConfigError::new("paths.input", e))?;
            potential_from_table(&t).map_err(|e| ConfigError::new("paths.input", e))?
        }
        None => {
            let grid = ctx.cfg.grid_spec()?;
            match ctx.cfg.potential {
                Preset::Smooth => smooth_potential(grid)?,
                Preset::WeylSet => weyl_set_potential(grid)?,
            }
        }
    };
    if field.m() != poles.len() {
        return Err(ConfigError::new(
            "poles",
            format!("{} poles for a potential with {} rows", poles.len(), field.m()),
        )
        .into());
    }
    Ok(field)
}

fn weyl_table(weyl: &WeylData) -> Table {
    let mut t = Table::new(vec!["zeta".into()]);
    t.rows = weyl.zeta.iter().map(|&z| vec![z]).collect();
    for (k, col) in weyl.phi.iter().enumerate() {
        push_complex(&mut t, &format!("phi{}", k + 1), col);
    }
    t.meta("eta", num(weyl.eta))
        .meta("m_cut", num(weyl.m_cut))
        .meta("l", num(weyl.l))
        .meta("truncation_bound", num(weyl.truncation_bound));
    t
}

fn weyl_from_table(t: &Table) -> Result<WeylData, String> {
    let meta = |key: &str| -> Result<f64, String> {
        t.get(key)
            .ok_or_else(|| format!("metadata lacks {key}"))?
            .parse::<f64>()
            .map_err(|e| format!("metadata {key}: {e}"))
    };
    let z = t.column("zeta").ok_or("missing zeta column")?;
    let m = (1..)
        .take_while(|k| t.column(&format!("re_phi{k}")).is_some())
        .count();
    if m == 0 {
        return Err("no phi columns".into());
    }
    Ok(WeylData {
        eta: meta("eta")?,
        zeta: t.rows.iter().map(|r| r[z]).collect(),
        phi: (1..=m)
            .map(|k| complex_column(t, &format!("phi{k}")))
            .collect::<Result<_, _>>()?,
        beta0: None,
        m_cut: meta("m_cut")?,
        l: meta("l")?,
        truncation_bound: meta("truncation_bound")?,
    })
}

/// Fundamental solution at the middle of the sampling line, per pole, with
/// a substep-doubling check.
fn integration_check(ctx: &mut Ctx, field: &PotentialField, poles: &PoleSet) -> Result<(), CliError> {
    for k in 0..poles.len() {
        let lambda = poles.mu_to_lambda(k, C64::new(0.0, ctx.cfg.spectral.eta))?;
        integrate_checked(field, poles, lambda, ctx.cfg.tolerances.ode)?;
    }
    ctx.diag.text("integration_check", "passed");
    Ok(())
}

fn sample(ctx: &mut Ctx, field: &PotentialField, poles: &PoleSet) -> Result<WeylData, CliError> {
    let m_cut = bound_m(field, poles, 0.05)?;
    ctx.log(&format!("cutoff M = {m_cut:.6}"));
    if !(ctx.cfg.spectral.eta < -m_cut / 4.0) {
        return Err(ConfigError::new(
            "spectral.eta",
            format!("must lie below -M/4 = {} for this potential", -m_cut / 4.0),
        )
        .into());
    }
    integration_check(ctx, field, poles)?;
    let weyl = sample_weyl_function(field, poles, ctx.cfg.spectral.eta, &zeta(ctx.cfg), m_cut)?;
    ctx.log(&format!("sampled {} points per pole", weyl.zeta.len()));
    ctx.diag.num("m_cut", weyl.m_cut);
    ctx.diag.num("truncation_bound", weyl.truncation_bound);
    ctx.diag.num("weyl_sup_norm", weyl.sup_norm());
    Ok(weyl)
}

fn report_diagnostics(ctx: &mut Ctx, rep: &ReconstructionReport) {
    let limit = ctx.cfg.tolerances.identity;
    ctx.check("identity_residual", rep.identity_residual, limit);
    ctx.diag.num("row_drift", rep.row_drift);
    ctx.diag.num("data_truncation", rep.data_truncation);
    for (k, c) in rep.constants.iter().enumerate() {
        ctx.diag.num(format!("constant{}_re", k + 1), c.re);
        ctx.diag.num(format!("constant{}_im", k + 1), c.im);
    }
    for (k, s) in rep.synthesis_truncation.iter().enumerate() {
        ctx.diag.num(format!("synthesis_truncation{}", k + 1), *s);
    }
}

fn direct(ctx: &mut Ctx) -> Result<(), CliError> {
    let poles = ctx.cfg.pole_set()?;
    let field = load_potential(ctx, &poles)?;
    let weyl = sample(ctx, &field, &poles)?;
    ctx.emit("weyl.csv", &mut weyl_table(&weyl))
}

fn inverse(ctx: &mut Ctx) -> Result<(), CliError> {
    let poles = ctx.cfg.pole_set()?;
    let path = ctx.cfg.paths.input.clone().expect("validated");
    let weyl = Table::read(&path)
        .and_then(|t| weyl_from_table(&t))
        .map_err(|e| ConfigError::new("paths.input", e))?;
    let grid = ctx.cfg.grid_spec()?;
    let rep = recover_from_weyl_function(&weyl, &poles, &grid)?;
    ctx.log("reconstruction done");
    report_diagnostics(ctx, &rep);
    ctx.emit("beta.csv", &mut potential_table(&rep.field))
}

fn roundtrip(ctx: &mut Ctx) -> Result<(), CliError> {
    let poles = ctx.cfg.pole_set()?;
    let truth = load_potential(ctx, &poles)?;
    let weyl = sample(ctx, &truth, &poles)?;
    let rep = recover_from_weyl_function(&weyl, &poles, &ctx.cfg.grid_spec()?)?;
    ctx.log("reconstruction done");
    report_diagnostics(ctx, &rep);
    let tol = ctx.cfg.tolerances.roundtrip;
    ctx.check("projector_error", projector_error(&rep.field, &truth)?, tol);
    let mismatch = resampled_mismatch(&rep.field, &poles, &weyl, MISMATCH_STRIDE)?;
    ctx.check("resampled_mismatch", mismatch, tol);
    ctx.emit("weyl.csv", &mut weyl_table(&weyl))?;
    ctx.emit("beta.csv", &mut potential_table(&rep.field))
}

fn weyl_set_table(ws: &WeylSetData) -> Table {
    let mut t = Table::new(vec!["zeta".into()]);
    t.rows = ws.zeta.iter().map(|&z| vec![z]).collect();
    for (k, col) in ws.psi.iter().enumerate() {
        push_complex(&mut t, &format!("psi{}", k + 1), col);
    }
    let list = |v: &[usize]| -> String {
        let s: Vec<String> = v.iter().map(|k| (k + 1).to_string()).collect();
        format!("[{}]", s.join(";"))
    };
    t.meta("eta", num(ws.eta))
        .meta("m_cut", num(ws.m_cut))
        .meta("l", num(ws.l))
        .meta("truncation_bound", num(ws.truncation_bound))
        .meta("n1", list(&ws.n1))
        .meta("n2", list(&ws.n2));
    for (k, row) in ws.beta0.iter().enumerate() {
        for (c, z) in row.iter().enumerate() {
            let key = format!("beta{}_{}_0", k + 1, c + 1);
            t.meta(&format!("re_{key}"), num(z.re)).meta(&format!("im_{key}"), num(z.im));
        }
    }
    t
}

fn weyl_set(ctx: &mut Ctx) -> Result<(), CliError> {
    let poles = ctx.cfg.pole_set()?;
    let truth = load_potential(ctx, &poles)?;
    let m_cut = bound_m(&truth, &poles, 0.05)?;
    integration_check(ctx, &truth, &poles)?;
    let ws = sample_weyl_set(&truth, &poles, ctx.cfg.spectral.eta, &zeta(ctx.cfg), m_cut)?;
    ctx.log(&format!("Weyl set sampled; N2 = {:?}", ws.n2));
    ctx.diag.num("m_cut", m_cut);
    ctx.diag.num("truncation_bound", ws.truncation_bound);
    let rep = recover_from_weyl_set(&ws, &poles, &ctx.cfg.grid_spec()?)?;
    report_diagnostics(ctx, &rep);
    ctx.check(
        "projector_error",
        projector_error(&rep.field, &truth)?,
        ctx.cfg.tolerances.roundtrip,
    );
    ctx.emit("weyl_set.csv", &mut weyl_set_table(&ws))?;
    ctx.emit("beta.csv", &mut potential_table(&rep.field))
}

fn solution(cfg: &SgSolutionConfig) -> Box<dyn SgSolution> {
    match *cfg {
        SgSolutionConfig::Kink { velocity } => Box::new(Kink { v: velocity }),
        SgSolutionConfig::Constant { value } => Box::new(Constant(value)),
    }
}

/// Boundary samples t, ω(0, t), ω_x(0, t) on a symmetric uniform window.
fn boundary_from_table(t: &Table) -> Result<BoundaryData, String> {
    let col = |name: &str| t.column(name).ok_or_else(|| format!("missing column {name}"));
    let (ct, c0, c1) = (col("t")?, col("omega0")?, col("omega1")?);
    let first = t.rows.first().ok_or("no samples")?[ct];
    let horizon = -first;
    let bd = BoundaryData::new(
        horizon,
        t.rows.iter().map(|r| r[c0]).collect(),
        t.rows.iter().map(|r| r[c1]).collect(),
    )
    .map_err(|e| e.to_string())?;
    for (j, r) in t.rows.iter().enumerate() {
        if (r[ct] - bd.time(j)).abs() > 1e-9 * horizon.max(1.0) {
            return Err(format!("t = {} at row {} is off the uniform window [-T, T]", r[ct], j + 1));
        }
    }
    Ok(bd)
}

fn boundary_table(bd: &BoundaryData) -> Table {
    let mut t = Table::new(vec!["t".into(), "omega0".into(), "omega1".into()]);
    t.rows = (0..=2 * bd.n)
        .map(|j| vec![bd.time(j), bd.omega0[j], bd.omega1[j]])
        .collect();
    t.meta("horizon", num(bd.horizon));
    t
}

fn sg(ctx: &mut Ctx) -> Result<(), CliError> {
    let sgc = &ctx.cfg.sg;
    let eta = ctx.cfg.spectral.eta;
    let known = ctx.cfg.paths.input.is_none().then(|| solution(&sgc.solution));
    let bd = match (&ctx.cfg.paths.input, &known) {
        (Some(path), _) => Table::read(path)
            .and_then(|t| boundary_from_table(&t))
            .map_err(|e| ConfigError::new("paths.input", e))?,
        (None, Some(sol)) => {
            let dt = 1.0 / sgc.steps_per_unit as f64;
            let horizon = match sgc.horizon {
                Some(h) => h,
                None => {
                    // M̂ from a provisional window, then T = 20/(|η| − M̂/4).
                    let probe = BoundaryData::from_solution(sol.as_ref(), 3.0, 3 * sgc.steps_per_unit)?;
                    let m_hat = TimePotentials::new(&probe)?.cutoff()?;
                    let gap = eta.abs() - m_hat / 4.0;
                    if !(gap > 0.0) {
                        return Err(ConfigError::new(
                            "spectral.eta",
                            format!("must lie below -M/4 = {} for this boundary data", -m_hat / 4.0),
                        )
                        .into());
                    }
                    20.0 / gap
                }
            };
            let n = (horizon / dt).ceil().max(4.0) as usize;
            BoundaryData::from_solution(sol.as_ref(), n as f64 * dt, n)?
        }
        (None, None) => unreachable!("a solution is always configured"),
    };
    ctx.log(&format!("boundary window T = {}, {} steps per side", bd.horizon, bd.n));
    ctx.diag.num("horizon", bd.horizon);
    ctx.diag.num("derivative_bound", bd.derivative_bound());
    let spectral = SgSpectral {
        eta,
        zeta: zeta(ctx.cfg),
        horizon_tol: sgc.horizon_tol,
    };
    let grid = ctx.cfg.grid_spec()?;
    let mut cols = vec!["t".to_string(), "x".into(), "cos_omega".into()];
    if known.is_some() {
        cols.extend(["exact".into(), "error".into()]);
    }
    let mut table = Table::new(cols);
    for (i, &t) in sgc.times.iter().enumerate() {
        let out = recover_cos_omega(&bd, t, &grid, &spectral)?;
        ctx.log(&format!("cos omega recovered at t = {t}"));
        ctx.diag.num(format!("t{}", i + 1), t);
        ctx.diag.num(format!("t{}_horizon_change", i + 1), out.horizon_change);
        ctx.diag.num(format!("t{}_identity_residual", i + 1), out.report.identity_residual);
        let mut worst = 0.0_f64;
        for (x, v) in out.x.iter().zip(&out.value) {
            let mut row = vec![t, *x, *v];
            if let Some(sol) = &known {
                let exact = sol.omega(*x, t).cos();
                worst = worst.max((v - exact).abs());
                row.extend([exact, (v - exact).abs()]);
            }
            table.rows.push(row);
        }
        if known.is_some() {
            ctx.check(&format!("t{}_max_error", i + 1), worst, ctx.cfg.tolerances.roundtrip);
        }
    }
    ctx.emit("boundary.csv", &mut boundary_table(&bd))?;
    ctx.emit("cos_omega.csv", &mut table)
}

/// Built-in identity cases on the single-pole system with Φ = [1, 0].
fn selftest(ctx: &mut Ctx) -> Result<(), CliError> {
    let poles = PoleSet::new(vec![0.0], vec![1])?;
    let lambda = C64::new(0.5, 1.0);
    let grid = GridSpec::new(1.0, 512)?;

    let ones = vec![ONE; grid.node_count()];
    let g = resolvent_apply(&poles, 0, lambda, &ones, grid.h())?;
    let resolvent = grid
        .nodes()
        .zip(&g)
        .map(|(x, gi)| (gi - (I * x / lambda).exp() / lambda).norm())
        .fold(0.0, f64::max);
    ctx.check("resolvent_closed_form", resolvent, 1e-10);

    let phi = PhiColumns::from_fn(grid, 1, |_, _| ([ONE, ZERO], [ZERO; 2], [ZERO; 2]));
    let node = assemble_s(phi, &poles, Contour::default())?;
    ctx.check("identity_residual", identity_residual(&node), 1e-10);

    let sweep = inverse_sweep(&node)?;
    let transfer = transfer_profile(&node, &sweep, lambda)?
        .iter()
        .enumerate()
        .map(|(r, w)| (*w - Mat2::diag((I * grid.node(r) / lambda).exp(), ONE)).max_abs())
        .fold(0.0, f64::max);
    ctx.check("transfer_diagonal_exponential", transfer, 1e-6);

    let row = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
    let q = gauge_q(&row)?;
    ctx.check("gauge_unitarity", (q.adjoint() * q - Mat2::identity()).max_abs(), 1e-14);
    ctx.log("selftest done");
    Ok(())
}
