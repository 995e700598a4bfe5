//! `ontop`: train, evaluate and compare top-sample linear classifiers.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ontop::eval::{default_curve_taus, report, write_curve_csv};
use ontop::experiment::{
    grid_search, load, reproduce_comparison, with_pool, write_comparison_csv, write_json, zero_audit,
    write_zero_audit_csv, DataFormat, Grid, Manifest, MethodTemplate, Splits, COMPARISON_METHODS,
};
use ontop::{
    drop_positives, split, synth_example, train, AdamConfig, Criterion, Dataset, Init, Method, Model, ObjectiveSpec,
    SplitSpec, SurrogateLoss, TrainConfig,
};

#[derive(Parser)]
#[command(name = "ontop", version, about = "Linear classifiers for accuracy at the top")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes model.json and history.csv
    Train(TrainArgs),
    /// Evaluate a model; writes report.json, pr_curve.csv and ptau_curve.csv
    Eval(EvalArgs),
    /// Write only the precision-recall and precision-at-tau curves
    Curve(EvalArgs),
    /// Grid search with validation-based selection
    Grid(GridArgs),
    /// Write the two-feature synthetic example as CSV
    Synth(SynthArgs),
    /// Compare thresholds and objectives at w1 = (0,0) and w2 = (1,0) against closed forms
    Reproduce(ReproduceArgs),
}

fn existing_path(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.exists() {
        Ok(p)
    } else {
        Err(format!("`{s}` does not exist"))
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|_| {
        let tokens: Vec<&str> = Method::ALL.iter().map(|m| m.token()).collect();
        format!("unknown method `{s}`; expected one of {}", tokens.join(", "))
    })
}

fn parse_loss(s: &str) -> Result<SurrogateLoss, String> {
    s.parse().map_err(|e: ontop::Error| e.to_string())
}

fn parse_fracs(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| "expected three comma-separated fractions".to_string())
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: ontop::Error| e.to_string())
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Libsvm,
}

impl From<Format> for DataFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => DataFormat::Csv,
            Format::Libsvm => DataFormat::Libsvm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Zeros,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    Train,
    Valid,
    Test,
    All,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset file
    #[arg(long, value_parser = existing_path)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// CSV label column
    #[arg(long, default_value = "y")]
    label: String,
    /// Label value marking positive samples
    #[arg(long, default_value = "1")]
    pos: String,
    /// Train/validation/test fractions, e.g. 0.5,0.25,0.25
    #[arg(long, value_parser = parse_fracs)]
    split: Option<[f64; 3]>,
    /// Split per class
    #[arg(long)]
    stratified: bool,
}

impl DataArgs {
    fn load(&self) -> ontop::Result<Dataset> {
        load(&self.data, self.format.into(), &self.label, &self.pos)
    }

    fn split_spec(&self, seed: u64) -> Option<SplitSpec> {
        self.split.as_ref().map(|f| SplitSpec {
            train_frac: f[0],
            valid_frac: f[1],
            test_frac: f[2],
            seed,
            stratified: self.stratified,
        })
    }

    /// The requested part of the dataset, or all of it without `--split`.
    fn part(&self, part: Part, seed: u64) -> ontop::Result<Dataset> {
        let d = self.load()?;
        let Some(spec) = self.split_spec(seed) else {
            return Ok(d);
        };
        let (train, valid, test) = split(&d, &spec)?;
        Ok(match part {
            Part::Train => train,
            Part::Valid => valid,
            Part::Test => test,
            Part::All => d,
        })
    }
}

#[derive(Args, Clone)]
struct OptimArgs {
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Number of minibatches per epoch; 1 is full batch
    #[arg(long, default_value_t = 1)]
    minibatches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "zeros")]
    init: InitArg,
    /// Project onto the unit ball after each step (default: only for grill and grill-np)
    #[arg(long)]
    project: Option<bool>,
    #[arg(long, default_value_t = 0.01)]
    step_size: f64,
}

impl OptimArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.iters,
            adam: AdamConfig {
                step_size: self.step_size,
                ..AdamConfig::default()
            },
            n_minibatch: self.minibatches,
            seed: self.seed,
            project_unit_ball: self.project,
            init: match self.init {
                InitArg::Zeros => Init::Zeros,
                InitArg::Uniform => Init::Uniform,
            },
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, value_parser = parse_loss, default_value = "hinge")]
    loss: SurrogateLoss,
    #[command(flatten)]
    optim: OptimArgs,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// model.json written by `train`
    #[arg(long, value_parser = existing_path)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Part to evaluate when `--split` is given
    #[arg(long, value_enum, default_value = "test")]
    part: Part,
    /// Split seed; defaults to the model's training seed
    #[arg(long)]
    seed: Option<u64>,
    /// Taus for the quantile and Neyman-Pearson criteria
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05")]
    taus: Vec<f64>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// Experiment manifest (JSON); replaces the single-dataset flags
    #[arg(long, value_parser = existing_path, conflicts_with_all = ["data", "method"])]
    manifest: Option<PathBuf>,
    #[arg(long, value_parser = existing_path, requires = "method")]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, default_value = "y")]
    label: String,
    #[arg(long, default_value = "1")]
    pos: String,
    #[arg(long, value_parser = parse_method, requires = "data")]
    method: Option<Method>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_parser = parse_loss, default_value = "hinge")]
    loss: SurrogateLoss,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Taus for the reported criteria
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// Train/validation/test fractions
    #[arg(long, value_parser = parse_fracs, default_value = "0.5,0.25,0.25")]
    split: [f64; 3],
    #[arg(long)]
    stratified: bool,
    /// Selection criterion: top, quantile:TAU or np:TAU
    #[arg(long, value_parser = parse_criterion, default_value = "top")]
    select: Criterion,
    #[command(flatten)]
    optim: OptimArgs,
    /// Worker threads; 0 uses one per core
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Samples per class (the file has 2n + 1 rows)
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of positives to remove
    #[arg(long)]
    drop_positives: Option<f64>,
    /// Output CSV file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file; the table is also printed
    #[arg(long)]
    out: Option<PathBuf>,
}

/// model.json contents.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    #[serde(flatten)]
    model: Model,
}

fn usage_error(msg: String) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn create_dir(dir: &Path) -> ontop::Result<()> {
    fs::create_dir_all(dir).map_err(|e| ontop::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: String) -> ontop::Result<()> {
    fs::write(path, text).map_err(|e| ontop::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_train(a: &TrainArgs) -> ontop::Result<()> {
    let mut missing = Vec::new();
    if a.method.needs_tau() && a.tau.is_none() {
        missing.push("--tau");
    }
    if a.method.needs_beta() && a.beta.is_none() {
        missing.push("--beta");
    }
    if a.method.needs_k() && a.k.is_none() {
        missing.push("--k");
    }
    if !missing.is_empty() {
        usage_error(format!("method `{}` requires {}", a.method, missing.join(", ")));
    }
    let rule = a.method.rule(a.k, a.tau, a.beta)?;
    let spec = ObjectiveSpec::new(rule, a.loss, a.lambda)?;
    let cfg = a.optim.config();
    let d = a.data.part(Part::Train, cfg.seed)?;
    let model = train(&spec, &d, &cfg)?;
    log::info!("trained {} on {} samples, t = {}", spec.rule, d.n(), model.t_final);

    create_dir(&a.out)?;
    let mut history = String::from("iteration,objective,w_norm\n");
    for (i, h) in model.history.iter().enumerate() {
        history.push_str(&format!("{i},{},{}\n", h.objective, h.w_norm));
    }
    write_text(&a.out.join("history.csv"), history)?;
    let file = ModelFile {
        version: ontop::VERSION.to_string(),
        model,
    };
    write_json(&file, a.out.join("model.json"))
}

fn read_model(path: &Path) -> ontop::Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| ontop::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str::<ModelFile>(&text)?.model)
}

fn cmd_eval(a: &EvalArgs, curves_only: bool) -> ontop::Result<()> {
    let model = read_model(&a.model)?;
    let d = a.data.part(a.part, a.seed.unwrap_or(model.config.seed))?;
    if d.n_features() != model.w.len() {
        return Err(ontop::Error::DimensionMismatch {
            expected: model.w.len(),
            found: d.n_features(),
        });
    }
    let r = report(&model.w, model.t_final, &d, &a.taus, &default_curve_taus())?;
    create_dir(&a.out)?;
    write_curve_csv(&r.pr_curve, "recall", a.out.join("pr_curve.csv"))?;
    write_curve_csv(&r.ptau_curve, "tau", a.out.join("ptau_curve.csv"))?;
    if !curves_only {
        r.write_json(a.out.join("report.json"))?;
        println!("precision {} recall {}", r.precision, r.recall);
        for (name, v) in &r.criteria {
            println!("{name} {v}");
        }
    }
    Ok(())
}

fn cmd_grid(a: &GridArgs) -> ontop::Result<()> {
    if let Some(path) = &a.manifest {
        let m = Manifest::from_file(path)?;
        let out = with_pool(a.jobs, || ontop::experiment::run_manifest(&m))??;
        return out.write(&a.out);
    }
    let (Some(data), Some(method)) = (&a.data, a.method) else {
        usage_error("grid requires --manifest or both --data and --method".into());
    };
    if method.needs_tau() && a.tau.is_none() {
        usage_error(format!("method `{method}` requires --tau"));
    }
    let mut grid = Grid {
        methods: vec![method],
        ..Grid::default()
    };
    if let Some(v) = &a.betas {
        grid.betas = v.clone();
    }
    if let Some(v) = &a.lambdas {
        grid.lambdas = v.clone();
    }
    if let Some(v) = &a.ks {
        grid.ks = v.clone();
    }
    if let Some(v) = &a.taus {
        grid.taus = v.clone();
    }
    let cfg = a.optim.config();
    let d = load(data, a.format.into(), &a.label, &a.pos)?;
    let spec = SplitSpec {
        train_frac: a.split[0],
        valid_frac: a.split[1],
        test_frac: a.split[2],
        seed: cfg.seed,
        stratified: a.stratified,
    };
    let name = data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    let splits = Splits::new(name, &d, &spec)?;
    let template = MethodTemplate {
        method,
        tau: a.tau,
        loss: a.loss,
    };
    let (best, records) = with_pool(a.jobs, || grid_search(&template, &grid, &splits, &cfg, &a.select))??;
    create_dir(&a.out)?;
    write_json(&records, a.out.join("runs.json"))?;
    write_json(
        &serde_json::json!({
            "criterion": a.select.to_string(),
            "direction": "maximize",
            "record": best,
        }),
        a.out.join("selected.json"),
    )?;
    write_zero_audit_csv(&zero_audit(&records), a.out.join("zero_audit.csv"))?;
    println!("selected {:?} with validation {} = {}", best.hyper, a.select, best.get("valid", &a.select).unwrap_or(f64::NAN));
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> ontop::Result<()> {
    let mut d = synth_example(a.n, a.seed)?;
    if let Some(frac) = a.drop_positives {
        d = drop_positives(&d, frac, a.seed)?;
    }
    d.write_csv(&a.out)
}

fn cmd_reproduce(a: &ReproduceArgs) -> ontop::Result<()> {
    let rows = reproduce_comparison(a.n, &COMPARISON_METHODS, a.tau, a.beta, a.k, a.seed)?;
    println!(
        "{:<10} {:<5} {:>12} {:>12} {:>12} {:>12}",
        "method", "point", "t_measured", "t_closed", "f_measured", "f_closed"
    );
    for r in &rows {
        println!(
            "{:<10} {:<5} {:>12.5} {:>12.5} {:>12.5} {:>12.5}",
            r.method.token(),
            r.point,
            r.t_measured,
            r.t_closed,
            r.f_measured,
            r.f_closed
        );
    }
    if let Some(out) = &a.out {
        write_comparison_csv(&rows, out)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a, false),
        Command::Curve(a) => cmd_eval(a, true),
        Command::Grid(a) => cmd_grid(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
