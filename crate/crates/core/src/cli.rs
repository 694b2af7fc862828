//! Command-line front end.
//!
//! Every subcommand reads an optional TOML config (`--config`), applies
//! flag overrides, writes `<command>.csv` and `<command>_summary.txt` into
//! the output directory and returns 0 on pass, 1 on a failed check or
//! runtime error, 2 on a usage error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bundle::{SectionPatch, TrigSeriesSection};
use crate::error::{Error, Result};
use crate::integrate::{exact_solution, simulate, trend, SimulationConfig};
use crate::lagrangian::LagrangianDensity;
use crate::multihamiltonian::{
    assemble_structure_matrices, bridges_form_residual, ddw_residual, ddw_to_bridges, equivalence_check,
    integer_rank,
};
use crate::noether::{divergence_residual, SymmetryGenerator};
use crate::patterns::{hessian_index, IndexOptions, Primitive};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "multisym", version, about = "Multisymplectic field theory checks, simulation and pattern index")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML file with the subcommand's settings
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the effective settings as TOML and exit
    #[arg(long, global = true)]
    print_config: bool,
    /// Seed for randomized sample points
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "MULTISYM_OUTDIR", default_value = "out")]
    outdir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the structure matrices of a model
    Derive(ModelArgs),
    /// Compare de Donder–Weyl and Euler–Lagrange residuals on random patches
    EquivalenceCheck(EquivalenceArgs),
    /// Divergence of a Noether current on an exact solution
    NoetherCheck(NoetherArgs),
    /// Box-scheme run with conservation diagnostics
    Simulate(SimulateArgs),
    /// Hessian index of a diagonal periodic pattern
    PatternIndex(PatternArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    fiber_dim: Option<usize>,
    #[arg(long)]
    potential: Option<String>,
}

#[derive(Debug, Args)]
struct EquivalenceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    patches: Option<usize>,
}

#[derive(Debug, Args)]
struct NoetherArgs {
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    solution: Option<String>,
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Debug, Args)]
struct PatternArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated wavevector
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    k: Option<Vec<f64>>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    free: Option<usize>,
    #[arg(long)]
    primitive: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeriveConfig {
    pub model: String,
    pub n: usize,
    pub fiber_dim: usize,
    pub potential: String,
}

impl Default for DeriveConfig {
    fn default() -> Self {
        Self {
            model: "nonlinear_wave".into(),
            n: 1,
            fiber_dim: 1,
            potential: "zero".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub model: String,
    pub n: usize,
    pub fiber_dim: usize,
    pub potential: String,
    pub patches: usize,
    pub points_per_patch: usize,
    pub modes: usize,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            model: "nonlinear_wave".into(),
            n: 1,
            fiber_dim: 1,
            potential: "sine_gordon".into(),
            patches: 100,
            points_per_patch: 3,
            modes: 3,
            amplitude: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoetherConfig {
    pub potential: String,
    pub solution: String,
    pub params: BTreeMap<String, f64>,
    pub generator: String,
    pub points: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for NoetherConfig {
    fn default() -> Self {
        Self {
            potential: "klein_gordon(1)".into(),
            solution: "kg_plane_wave".into(),
            params: BTreeMap::new(),
            generator: "time_translation".into(),
            points: 64,
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternConfig {
    pub model: String,
    pub n: usize,
    pub potential: String,
    pub k: Vec<f64>,
    pub amplitude: f64,
    pub free: usize,
    /// Empty for the default steps.
    pub deltas: Vec<f64>,
    pub primitive: String,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            model: "nonlinear_wave".into(),
            n: 0,
            potential: "duffing(-1, 0.5)".into(),
            k: vec![1.0],
            amplitude: 0.8,
            free: 0,
            deltas: Vec::new(),
            primitive: "p_dphi".into(),
        }
    }
}

enum Outcome {
    Pass,
    Fail(String),
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::UnknownName(_)
            | Error::InvalidParameter(_)
            | Error::UnsupportedModel(_)
            | Error::UnsupportedDimension(_)
            | Error::ShapeMismatch { .. }
    )
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Pass) => EXIT_PASS,
        Ok(Outcome::Fail(msg)) => {
            eprintln!("check failed: {msg}");
            EXIT_FAIL
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage(&e) {
                EXIT_USAGE
            } else {
                EXIT_FAIL
            }
        }
    }
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", p.display(), e.message())))
        }
    }
}

fn print_config<T: Serialize>(cfg: &T) -> Result<Outcome> {
    print!("{}", toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?);
    Ok(Outcome::Pass)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

struct Output {
    dir: PathBuf,
    name: &'static str,
}

impl Output {
    fn new(dir: &Path, name: &'static str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            name,
        })
    }

    fn csv_path(&self) -> PathBuf {
        self.dir.join(format!("{}.csv", self.name))
    }

    fn csv(&self, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.csv_path())?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn summary(&self, lines: &[(&str, String)]) -> Result<()> {
        let mut s = String::new();
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        fs::write(self.dir.join(format!("{}_summary.txt", self.name)), s)?;
        Ok(())
    }
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    let c = cli.common;
    let path = c.config.as_deref();
    match cli.command {
        Command::Derive(a) => {
            let mut cfg: DeriveConfig = load(path)?;
            set(&mut cfg.model, a.model);
            set(&mut cfg.n, a.n);
            set(&mut cfg.fiber_dim, a.fiber_dim);
            set(&mut cfg.potential, a.potential);
            if c.print_config {
                return print_config(&cfg);
            }
            derive(&cfg, &c.outdir)
        }
        Command::EquivalenceCheck(a) => {
            let mut cfg: EquivalenceConfig = load(path)?;
            set(&mut cfg.model, a.model.model);
            set(&mut cfg.n, a.model.n);
            set(&mut cfg.fiber_dim, a.model.fiber_dim);
            set(&mut cfg.potential, a.model.potential);
            set(&mut cfg.patches, a.patches);
            set(&mut cfg.seed, c.seed);
            if c.print_config {
                return print_config(&cfg);
            }
            equivalence(&cfg, &c.outdir)
        }
        Command::NoetherCheck(a) => {
            let mut cfg: NoetherConfig = load(path)?;
            set(&mut cfg.potential, a.potential);
            set(&mut cfg.solution, a.solution);
            set(&mut cfg.generator, a.generator);
            set(&mut cfg.points, a.points);
            set(&mut cfg.seed, c.seed);
            if c.print_config {
                return print_config(&cfg);
            }
            noether(&cfg, &c.outdir)
        }
        Command::Simulate(a) => {
            let mut cfg: SimulationConfig = match path {
                Some(_) => load(path)?,
                None => SimulationConfig::default(),
            };
            set(&mut cfg.potential, a.potential);
            set(&mut cfg.grid.nx, a.nx);
            set(&mut cfg.grid.dt, a.dt);
            set(&mut cfg.grid.t_end, a.t_end);
            if c.print_config {
                return print_config(&cfg);
            }
            run_simulation(&cfg, &c.outdir)
        }
        Command::PatternIndex(a) => {
            let mut cfg: PatternConfig = load(path)?;
            set(&mut cfg.model, a.model.model);
            set(&mut cfg.n, a.model.n);
            set(&mut cfg.potential, a.model.potential);
            set(&mut cfg.k, a.k);
            set(&mut cfg.amplitude, a.amplitude);
            set(&mut cfg.free, a.free);
            set(&mut cfg.primitive, a.primitive);
            if a.model.fiber_dim.is_some_and(|d| d != 1) {
                return Err(Error::UnsupportedModel("patterns need fiber_dim = 1".into()));
            }
            if c.print_config {
                return print_config(&cfg);
            }
            pattern(&cfg, &c.outdir)
        }
    }
}

fn format_matrix(m: &nalgebra::DMatrix<i32>) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:>3}", m[(r, c)])).collect();
        let _ = writeln!(s, "[{} ]", row.join(""));
    }
    s
}

fn derive(cfg: &DeriveConfig, outdir: &Path) -> Result<Outcome> {
    let l = LagrangianDensity::builtin(&cfg.model, cfg.n, cfg.fiber_dim, &cfg.potential)?;
    let spec = l.spec();
    let sm = assemble_structure_matrices(spec);
    let names: Vec<String> = if spec.n_space() == 1 {
        vec!["M".into(), "K".into()]
    } else {
        (0..spec.base_dim()).map(|mu| format!("omega{mu}")).collect()
    };
    let mut layout = vec!["y".to_string()];
    layout.extend((0..spec.base_dim()).map(|mu| format!("p{mu}")));
    println!("model = {}", l.name());
    println!("n = {}, fiber_dim = {}, Z = ({})", spec.n_space(), spec.fiber_dim(), layout.join(", "));
    let mut rows = Vec::new();
    let mut ok = true;
    for (mu, name) in names.iter().enumerate() {
        let m = sm.omega(mu);
        println!("{name} =\n{}", format_matrix(m));
        ok &= m.transpose() == -m.clone() && integer_rank(m) == 2 * spec.fiber_dim();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                rows.push(vec![name.clone(), r.to_string(), c.to_string(), m[(r, c)].to_string()]);
            }
        }
    }
    let out = Output::new(outdir, "derive")?;
    out.csv(&["matrix", "row", "col", "value"].map(String::from), &rows)?;
    out.summary(&[
        ("model", l.name()),
        ("n", spec.n_space().to_string()),
        ("fiber_dim", spec.fiber_dim().to_string()),
        ("state_dim", sm.d.to_string()),
        ("skew_rank_2n", ok.to_string()),
    ])?;
    Ok(if ok { Outcome::Pass } else { Outcome::Fail("structure matrices".into()) })
}

fn equivalence(cfg: &EquivalenceConfig, outdir: &Path) -> Result<Outcome> {
    use rand::Rng;
    let l = LagrangianDensity::builtin(&cfg.model, cfg.n, cfg.fiber_dim, &cfg.potential)?;
    let spec = l.spec().clone();
    let nb = spec.base_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let (mut worst_fiber, mut worst_p, mut worst_bridges) = (0.0f64, 0.0f64, 0.0f64);
    let mut passed = true;
    for patch_id in 0..cfg.patches {
        let section = TrigSeriesSection::random(nb, spec.fiber_dim(), cfg.modes, cfg.amplitude, &mut rng);
        let patch = SectionPatch::new(section);
        let xs: Vec<Vec<f64>> = (0..cfg.points_per_patch)
            .map(|_| (0..nb).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        let report = equivalence_check(&l, &patch, &xs)?;
        passed &= report.passed;
        worst_fiber = worst_fiber.max(report.max_fiber_mismatch);
        worst_p = worst_p.max(report.max_momentum_residual);
        for s in &report.samples {
            let mismatch = s
                .r_y
                .iter()
                .zip(&s.euler_lagrange)
                .fold(0.0f64, |m, (r, e)| m.max((r + e).abs()));
            let gap = if spec.n_space() == 1 {
                let b = bridges_form_residual(&l, &patch, &s.x)?;
                let d = ddw_to_bridges(&ddw_residual(&l, &patch, &s.x)?);
                (b - d).amax()
            } else {
                0.0
            };
            worst_bridges = worst_bridges.max(gap);
            let mut row = vec![patch_id.to_string()];
            row.extend(s.x.iter().map(|v| f(*v)));
            row.extend([f(mismatch), f(s.r_p_norm), f(gap)]);
            rows.push(row);
        }
    }
    let bridges_ok = worst_bridges <= 1e-10;
    let mut header = vec!["patch".to_string()];
    header.extend((0..nb).map(|mu| format!("x{mu}")));
    header.extend(["fiber_mismatch", "momentum_residual", "bridges_gap"].map(String::from));
    let out = Output::new(outdir, "equivalence-check")?;
    out.csv(&header, &rows)?;
    out.summary(&[
        ("model", l.name()),
        ("seed", cfg.seed.to_string()),
        ("patches", cfg.patches.to_string()),
        ("max_fiber_mismatch", f(worst_fiber)),
        ("max_momentum_residual", f(worst_p)),
        ("max_bridges_gap", f(worst_bridges)),
        ("passed", (passed && bridges_ok).to_string()),
    ])?;
    println!("max |r_y + E| = {worst_fiber:e}, max |r_p| = {worst_p:e}, max bridges gap = {worst_bridges:e}");
    Ok(if passed && bridges_ok {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("equivalence residual {worst_fiber:e}, bridges gap {worst_bridges:e}"))
    })
}

fn generator(name: &str, l: &LagrangianDensity) -> Result<SymmetryGenerator> {
    let spec = l.spec();
    match name {
        "time_translation" => Ok(SymmetryGenerator::time_translation(spec)),
        "space_translation" => Ok(SymmetryGenerator::space_translation(spec, 1)),
        "fiber_shift" => Ok(SymmetryGenerator::fiber_shift(spec, vec![1.0])),
        other => Err(Error::UnknownName(other.to_string())),
    }
}

fn noether(cfg: &NoetherConfig, outdir: &Path) -> Result<Outcome> {
    use rand::Rng;
    let l = LagrangianDensity::builtin("nonlinear_wave", 1, 1, &cfg.potential)?;
    let xi = generator(&cfg.generator, &l)?;
    let patch = exact_solution(&cfg.solution, &cfg.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let xs: Vec<Vec<f64>> = (0..cfg.points)
        .map(|_| vec![rng.gen_range(0.0..=5.0), rng.gen_range(-5.0..=5.0)])
        .collect();
    let field = divergence_residual(&l, &xi, &patch, &xs)?;
    let rows: Vec<Vec<String>> = field
        .points
        .iter()
        .zip(&field.currents)
        .zip(&field.divergences)
        .map(|((x, j), d)| vec![f(x[0]), f(x[1]), f(j[0]), f(j[1]), f(*d)])
        .collect();
    let max_div = field.max_abs_divergence();
    let ok = max_div <= cfg.tolerance;
    let out = Output::new(outdir, "noether-check")?;
    out.csv(&["x0", "x1", "J0", "J1", "div_J"].map(String::from), &rows)?;
    out.summary(&[
        ("lagrangian", field.lagrangian.clone()),
        ("generator", field.generator.clone()),
        ("solution", cfg.solution.clone()),
        ("seed", cfg.seed.to_string()),
        ("max_abs_div", f(max_div)),
        ("tolerance", f(cfg.tolerance)),
        ("passed", ok.to_string()),
    ])?;
    println!("max |div J| = {max_div:e} (tolerance {:e})", cfg.tolerance);
    Ok(if ok {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("max |div J| = {max_div:e}"))
    })
}

fn run_simulation(cfg: &SimulationConfig, outdir: &Path) -> Result<Outcome> {
    let out = Output::new(outdir, "simulate")?;
    let result = simulate(cfg, Some(&out.csv_path()))?;
    let t: Vec<f64> = result.rows.iter().map(|r| r.t).collect();
    let e: Vec<f64> = result.rows.iter().map(|r| r.energy).collect();
    let m: Vec<f64> = result.rows.iter().map(|r| r.momentum).collect();
    let drift = |v: &[f64]| {
        let v0 = v[0];
        v.iter().fold(0.0f64, |a, x| a.max((x - v0).abs())) / v0.abs().max(f64::MIN_POSITIVE)
    };
    let (es, ese) = trend(&t, &e);
    let (ms, mse) = trend(&t, &m);
    let max_div = result.rows.iter().fold(0.0f64, |a, r| a.max(r.max_div_residual));
    out.summary(&[
        ("steps", result.steps.to_string()),
        ("max_newton_iterations", result.max_newton_iterations.to_string()),
        ("energy_rel_drift", f(drift(&e))),
        ("momentum_rel_drift", f(drift(&m))),
        ("energy_slope", f(es)),
        ("energy_slope_se", f(ese)),
        ("momentum_slope", f(ms)),
        ("momentum_slope_se", f(mse)),
        ("max_div_residual", f(max_div)),
    ])?;
    println!(
        "{} steps, energy drift {:e}, momentum drift {:e}",
        result.steps,
        drift(&e),
        drift(&m)
    );
    Ok(Outcome::Pass)
}

fn pattern(cfg: &PatternConfig, outdir: &Path) -> Result<Outcome> {
    let l = LagrangianDensity::builtin(&cfg.model, cfg.n, 1, &cfg.potential)?;
    let primitive: Primitive = cfg.primitive.parse()?;
    let opts = IndexOptions {
        free: cfg.free,
        deltas: cfg.deltas.clone(),
        primitive,
    };
    let r = hessian_index(&l, &cfg.k, cfg.amplitude, &opts)?;
    let rows: Vec<Vec<String>> = (0..r.orbit.chi.len())
        .map(|i| vec![f(r.orbit.chi[i]), f(r.orbit.f[i]), f(r.orbit.df[i])])
        .collect();
    let out = Output::new(outdir, "pattern-index")?;
    out.csv(&["chi", "f", "df"].map(String::from), &rows)?;
    let list = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(", ");
    let mut lines = vec![
        ("model", l.name()),
        ("k", list(&r.k)),
        ("amplitude", f(r.amplitude)),
        ("levels", list(&r.levels)),
        ("hessian", list(r.hessian.transpose().as_slice())),
        ("asymmetry", f(r.asymmetry)),
        ("determinant", f(r.determinant)),
        ("index", r.index.to_string()),
        ("degenerate", r.degenerate.to_string()),
    ];
    lines.push(("closure", f(r.orbit.closure)));
    out.summary(&lines)?;
    println!(
        "k = [{}], I = [{}], det = {:e}, index = {}, degenerate = {}",
        list(&r.k),
        list(&r.levels),
        r.determinant,
        r.index,
        r.degenerate
    );
    Ok(if r.asymmetry <= 1e-4 {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("Hessian asymmetry {:e}", r.asymmetry))
    })
}
