//! Command-line entry points for every pipeline stage.

use crate::config::{Config, ConfigError};
use crate::testbed::SaddleTestbed;
use crate::verify::{run_all, VerifyOptions};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use coldbend_core::geometry::schema::BoundaryDoc;
use coldbend_core::geometry::{PanelBoundary, QuadBaseMesh};
use coldbend_core::panel::{mirrored_init, shape_distance, simulate_panel, InitMode, PanelRecord};
use coldbend_dataset::{
    dataset_stats, enrich_dataset, family_dataset, generate_dataset, saddle_family, simulate_family, Dataset, DatasetHeader,
    SaddleParams, Split,
};
use coldbend_design::{initialize_design, DesignState, Problem, ReferenceSurface};
use coldbend_service::{Service, MODEL_ENV};
use coldbend_surrogate::metrics::{evaluate, STRESS_LIMIT};
use coldbend_surrogate::{train, MdnModel, ModelMeta};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

/// How a failed run is reported to the shell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    Validation = 2,
    Numerical = 3,
    Io = 4,
}

/// Failures raised by the commands themselves.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

#[derive(Parser, Debug)]
#[command(name = "coldbend", version, about = "Cold-bent glass panels: simulation, surrogate training and facade design")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file overriding configuration defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Single configuration override, e.g. `panel.material.thickness=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate one panel to its equilibrium and report its stress.
    Simulate(SimulateArgs),
    /// Build, enrich and inspect training datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train the surrogate on one or more datasets.
    Train(TrainArgs),
    /// Accuracy of a model on a dataset split.
    Eval(EvalArgs),
    /// Optimize a quad-mesh facade design.
    Optimize(OptimizeArgs),
    /// Run the design service over HTTP.
    Serve(ServeArgs),
    /// Run the invariant suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Boundary document (JSON) to simulate.
    #[arg(long, conflicts_with_all = ["saddle", "flat_demo"])]
    pub boundary: Option<PathBuf>,
    /// Twisted rectangle `width,height,twist` (mm).
    #[arg(long, value_delimiter = ',', conflicts_with = "flat_demo")]
    pub saddle: Option<Vec<f64>>,
    /// Simulate a random planar boundary, which must come out stress free.
    #[arg(long)]
    pub flat_demo: bool,
    /// Also simulate from the mirrored first equilibrium.
    #[arg(long)]
    pub both_modes: bool,
    /// Write the panel records here (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum DatasetCommand {
    /// Simulate random panels into a dataset.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Simulate the twisted-rectangle family in both of its modes.
    Family {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Add second equilibria found from a model's predictions.
    Enrich {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summary statistics.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Datasets to train on; validation records come from their splits.
    #[arg(long, required = true)]
    pub dataset: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the per-epoch losses here (JSON).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_parser = ["validation", "train"], default_value = "validation")]
    pub split: String,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    /// Quad mesh (OBJ); omit to use the saddle testbed.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Reference surface (OBJ) the design should stay close to.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Optimized base mesh (OBJ).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration reports (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Default model; falls back to the environment variable.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Random cases per suite.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
}

/// Maps an error chain to its exit code.
pub fn classify(e: &anyhow::Error) -> Failure {
    use coldbend_core::Error as C;
    for cause in e.chain() {
        if cause.is::<std::io::Error>() {
            return Failure::Io;
        }
        if let Some(c) = cause.downcast_ref::<CliError>() {
            return match c {
                CliError::Validation(_) => Failure::Validation,
                CliError::Numerical(_) => Failure::Numerical,
            };
        }
        if cause.is::<ConfigError>() || cause.is::<serde_json::Error>() || cause.is::<clap::Error>() {
            return Failure::Validation;
        }
        if let Some(c) = cause.downcast_ref::<C>() {
            return match c {
                C::Io(_) => Failure::Io,
                C::Invalid(_) | C::Format(_) => Failure::Validation,
                C::Numerical(_) | C::Linalg(_) => Failure::Numerical,
            };
        }
        if cause.is::<coldbend_core::shell::SolveError>() {
            return Failure::Numerical;
        }
        if let Some(c) = cause.downcast_ref::<coldbend_surrogate::Error>() {
            use coldbend_surrogate::Error as S;
            return match c {
                S::Io(_) => Failure::Io,
                S::Invalid(_) | S::Format(_) => Failure::Validation,
                S::NonFinite(_) | S::Diverged { .. } => Failure::Numerical,
            };
        }
        if let Some(c) = cause.downcast_ref::<coldbend_dataset::Error>() {
            use coldbend_dataset::Error as D;
            match c {
                D::Io(_) => return Failure::Io,
                D::Format(_) => return Failure::Validation,
                _ => {}
            }
        }
        if let Some(c) = cause.downcast_ref::<coldbend_design::Error>() {
            use coldbend_design::Error as G;
            match c {
                G::Invalid(_) => return Failure::Validation,
                G::Numerical(_) | G::Linalg(_) => return Failure::Numerical,
                _ => {}
            }
        }
        if let Some(c) = cause.downcast_ref::<coldbend_service::Error>() {
            use coldbend_service::Error as V;
            match c {
                V::Io(_) => return Failure::Io,
                V::Mesh(_) | V::Invalid(_) | V::NotFound(_) | V::Busy(_) => return Failure::Validation,
                _ => {}
            }
        }
    }
    Failure::Numerical
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Failure::Validation as i32 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = classify(&e);
            log::error!("{e:#}");
            eprintln!("error: {e:#}");
            code as i32
        }
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<Config> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let mut settings = cli.set.clone();
    if let Some(s) = cli.seed {
        settings.push(format!("seed={s}"));
    }
    // subcommand flags are overrides of the same configuration
    match &cli.command {
        Command::Dataset(DatasetCommand::Generate { count: Some(n), .. }) => settings.push(format!("dataset.count={n}")),
        Command::Dataset(DatasetCommand::Family { count: Some(n), .. }) => settings.push(format!("family.count={n}")),
        Command::Train(TrainArgs { epochs: Some(n), .. }) => settings.push(format!("train.max_epochs={n}")),
        Command::Optimize(OptimizeArgs { iterations: Some(n), .. }) => settings.push(format!("optimize.iterations={n}")),
        _ => {}
    }
    Ok(Config::resolve(file.as_ref(), &settings)?)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let cfg = resolve(&cli)?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!(CliError::Validation("--jobs must be at least 1".into()));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(j).build_global().is_err() {
            log::warn!("worker pool already initialized; --jobs ignored");
        }
    }
    log::info!("command: {:?}", cli.command);
    log::info!("resolved config: {}", serde_json::to_string(&cfg)?);
    match cli.command {
        Command::Simulate(a) => simulate(&cfg, a),
        Command::Dataset(d) => dataset(&cfg, d),
        Command::Train(a) => train_cmd(&cfg, a),
        Command::Eval(a) => eval(a),
        Command::Optimize(a) => optimize(&cfg, a),
        Command::Serve(a) => serve(a),
        Command::Verify(a) => verify(&cfg, a),
    }
}

fn print_json<T: Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)?).with_context(|| format!("writing {}", path.display()))
}

fn model_path(arg: Option<PathBuf>) -> anyhow::Result<PathBuf> {
    arg.or_else(|| std::env::var_os(MODEL_ENV).map(PathBuf::from))
        .ok_or_else(|| CliError::Validation(format!("no model given: pass --model or set {MODEL_ENV}")).into())
}

fn load_model(arg: Option<PathBuf>) -> anyhow::Result<MdnModel> {
    let p = model_path(arg)?;
    MdnModel::load(&p).with_context(|| format!("loading model {}", p.display()))
}

fn load_dataset(p: &Path) -> anyhow::Result<Dataset> {
    Dataset::load(p).with_context(|| format!("loading dataset {}", p.display()))
}

/// Tolerances of the planar-boundary demo.
const FLAT_ENERGY_TOL: f64 = 1e-8;
const FLAT_STRESS_TOL: f64 = 1e-6;

#[derive(Serialize)]
struct SimulateOutput {
    first: PanelRecord,
    energy: f64,
    second: Option<PanelRecord>,
    separation: Option<f64>,
}

fn simulate(cfg: &Config, a: SimulateArgs) -> anyhow::Result<()> {
    let boundary: PanelBoundary = if a.flat_demo {
        crate::verify::flat_boundary_for_seed(cfg.seed)
    } else if let Some(p) = &a.boundary {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let doc: BoundaryDoc = serde_json::from_str(&text)?;
        doc.boundary()?
    } else if let Some(s) = &a.saddle {
        if s.len() != 3 {
            bail!(CliError::Validation("--saddle takes width,height,twist".into()));
        }
        SaddleParams { width: s[0], height: s[1], twist: s[2] }.boundary()?
    } else {
        bail!(CliError::Validation("give --boundary, --saddle or --flat-demo".into()));
    };
    boundary.validate()?;
    let first = simulate_panel(&boundary, &InitMode::ZeroTwist, &cfg.panel)?;
    let mut out = SimulateOutput { first: first.record.clone(), energy: first.equilibrium.energy, second: None, separation: None };
    if a.both_modes {
        let init = mirrored_init(&boundary, &first.fit.patch)?;
        let second = simulate_panel(&boundary, &InitMode::Patch(init), &cfg.panel)?;
        out.separation = Some(shape_distance(&first.record.shape, &second.record.shape));
        out.second = Some(second.record);
    }
    if let Some(p) = &a.out {
        write_json(p, &out)?;
    }
    if a.flat_demo {
        println!("sigma = {:.6} MPa (sigma_true {:.1e}, W {:.1e})", out.first.sigma, out.first.sigma_true, out.energy);
        if !(out.energy <= FLAT_ENERGY_TOL && out.first.sigma_true <= FLAT_STRESS_TOL) {
            bail!(CliError::Numerical("planar boundary did not give a stress-free panel".into()));
        }
        return Ok(());
    }
    print_json(&out)
}

fn dataset(cfg: &Config, d: DatasetCommand) -> anyhow::Result<()> {
    match d {
        DatasetCommand::Generate { out, .. } => {
            let ds = generate_dataset(&cfg.generate())?;
            ds.save(&out).with_context(|| format!("writing {}", out.display()))?;
            print_json(&dataset_stats(&ds))
        }
        DatasetCommand::Family { out, .. } => {
            let params = saddle_family(cfg.family.count, &cfg.family.ranges);
            let members: Vec<_> = simulate_family(&params, &cfg.panel).into_iter().flatten().collect();
            let g = cfg.generate();
            let header = DatasetHeader::new(cfg.panel, g.seed, g.split_seed, 0.0);
            let ds = family_dataset(&members, cfg.enrich.novelty, header)?;
            ds.save(&out).with_context(|| format!("writing {}", out.display()))?;
            let two = members.iter().filter(|m| m.separation >= cfg.enrich.novelty).count();
            log::info!("{} of {} members simulated, {two} with two modes", members.len(), params.len());
            print_json(&dataset_stats(&ds))
        }
        DatasetCommand::Enrich { dataset, model, out } => {
            let model = load_model(model)?;
            let mut ds = load_dataset(&dataset)?;
            let (new, report) = enrich_dataset(&model, &ds, &cfg.enrich())?;
            ds.append_enriched(new);
            ds.save(&out).with_context(|| format!("writing {}", out.display()))?;
            print_json(&report)
        }
        DatasetCommand::Stats { dataset } => print_json(&dataset_stats(&load_dataset(&dataset)?)),
    }
}

fn train_cmd(cfg: &Config, a: TrainArgs) -> anyhow::Result<()> {
    let mut paths = a.dataset.iter();
    let mut ds = load_dataset(paths.next().expect("clap requires one dataset"))?;
    for p in paths {
        ds.merge(load_dataset(p)?);
    }
    let (tr, val) = (ds.samples_of(Split::Train), ds.samples_of(Split::Validation));
    log::info!("training on {} records, validating on {}", tr.len(), val.len());
    let meta = ModelMeta::with_material(ds.header.material);
    let (model, report) = train(&tr, &val, &cfg.train(), meta, |s| {
        log::info!("epoch {}: train NLL {:.4}, validation NLL {:.4}", s.epoch, s.train_nll, s.val_nll);
    })?;
    model.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(h) = &a.history {
        write_json(h, &report)?;
    }
    log::info!("best validation NLL {:.4} at epoch {} ({} improving epochs)", report.best_val_nll, report.best_epoch, report.improving_epochs);
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let model = load_model(a.model)?;
    let ds = load_dataset(&a.dataset)?;
    let split = if a.split == "train" { Split::Train } else { Split::Validation };
    let data = ds.samples_of(split);
    if data.is_empty() {
        bail!(CliError::Validation(format!("the dataset has no {} records", a.split)));
    }
    let r = evaluate(&model, &data, Some(&ds.sigma_true_of(split)))?;
    if a.json {
        return print_json(&r);
    }
    println!("records                     {}", r.count);
    println!("negative log-likelihood     {:.4}", r.nll);
    println!("shape MAE                   {:.3} mm (closest mode {:.3} mm)", r.shape_mae, r.shape_mae_closest);
    println!("stress MAE                  {:.3} MPa (closest mode {:.3} MPa)", r.stress_mae, r.stress_mae_closest);
    println!("stress MAE, 50-65 MPa       {:.3} MPa", r.stress_mae_region);
    println!("global-mean stress MAE      {:.3} MPa", r.baseline_stress_mae);
    println!("false negatives at {STRESS_LIMIT} MPa   {:.2} %", 100.0 * r.false_negative_rate);
    println!("false positives at {STRESS_LIMIT} MPa   {:.2} %", 100.0 * r.false_positive_rate);
    Ok(())
}

fn read_obj(p: &Path) -> anyhow::Result<QuadBaseMesh> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(QuadBaseMesh::parse_obj(&text)?)
}

fn optimize(cfg: &Config, a: OptimizeArgs) -> anyhow::Result<()> {
    let model = load_model(a.model)?;
    let (mesh, reference) = match &a.mesh {
        Some(p) => {
            let mesh = read_obj(p)?;
            let reference = match &a.reference {
                Some(r) => Some(ReferenceSurface::from_quad_mesh(&read_obj(r)?)?),
                None => None,
            };
            (mesh, reference)
        }
        None => {
            let t = SaddleTestbed::default();
            (t.mesh()?, Some(t.reference()?))
        }
    };
    let mut state: DesignState = initialize_design(&mesh, &model, reference.as_ref(), &cfg.optimize)?;
    let problem = Problem::new(&state, &model, reference.as_ref(), cfg.optimize.clone())?;
    let before = problem.evaluate(&state)?;
    log::info!(
        "initial: energy {:.4e}, {} of {} panels above {} MPa, mean kink {:.3} deg",
        before.energy,
        before.violating,
        before.faces,
        cfg.optimize.weights.sigma_max,
        before.mean_kink_deg
    );
    let reports = problem.run(&mut state, |r, _| {
        log::info!(
            "iteration {}: energy {:.4e} -> {:.4e}, {} violating, mean kink {:.3} deg{}",
            r.iteration,
            r.energy_start,
            r.energy_end,
            r.report.violating,
            r.report.mean_kink_deg,
            if r.accepted { "" } else { " (step rejected)" }
        );
        true
    })?;
    std::fs::write(&a.out, state.mesh()?.to_obj()).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.report {
        write_json(p, &serde_json::json!({ "initial": before, "iterations": reports }))?;
    }
    let after = reports.last().map(|r| r.report.clone()).unwrap_or(before.clone());
    print_json(&serde_json::json!({
        "initial": { "violating": before.violating, "mean_kink_deg": before.mean_kink_deg, "energy": before.energy },
        "final": { "violating": after.violating, "mean_kink_deg": after.mean_kink_deg, "energy": after.energy },
    }))
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let model = model_path(a.model)?;
    let svc = std::sync::Arc::new(Service::new(Some(model.to_string_lossy().into_owned())));
    // load eagerly so a bad model fails at startup
    svc.model(None)?;
    let addr: std::net::SocketAddr =
        format!("{}:{}", a.host, a.port).parse().map_err(|e| CliError::Validation(format!("bad address: {e}")))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(coldbend_service::serve(addr, svc))?;
    Ok(())
}

fn verify(cfg: &Config, a: VerifyArgs) -> anyhow::Result<()> {
    let results = run_all(&VerifyOptions { seed: cfg.seed, cases: a.cases.max(1) });
    for r in &results {
        println!(
            "{} {}: worst {:.3e}, tolerance {:.0e}, {} cases",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.worst,
            r.tolerance,
            r.cases
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        bail!(CliError::Numerical(format!("{failed} suite(s) failed")));
    }
    Ok(())
}
