//! Grid search with validation-based selection, rank tables, the zero-objective
//! audit, per-iteration timing and the two-point synthetic comparison.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, load_libsvm, split, synth_example, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{criterion_from_scores, Criterion};
use crate::objective::{objective, ObjectiveSpec};
use crate::solver::{train, TrainConfig, Trainer};
use crate::surrogate::SurrogateLoss;
use crate::threshold::{scores, threshold, Method};

/// Hyperparameter grid. `lambdas` are ignored for the methods in
/// [`Grid::fixed_lambda`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub betas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub ks: Vec<usize>,
    pub taus: Vec<f64>,
    pub methods: Vec<Method>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            betas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
            lambdas: vec![0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            ks: vec![1, 3, 5, 10, 15, 20],
            taus: vec![0.01, 0.05],
            methods: Method::ALL.to_vec(),
        }
    }
}

/// Regularization used for methods whose grid sweeps another parameter.
pub const FIXED_LAMBDA: f64 = 0.001;

impl Grid {
    pub fn fixed_lambda(method: Method) -> Option<f64> {
        match method {
            Method::TopPushK | Method::PatMat | Method::PatMatNp => Some(FIXED_LAMBDA),
            _ => None,
        }
    }

    /// Name of the hyperparameter the grid sweeps for `method`.
    pub fn swept(method: Method) -> &'static str {
        match method {
            Method::TopPushK => "k",
            Method::PatMat | Method::PatMatNp => "beta",
            _ => "lambda",
        }
    }

    pub fn points(&self, method: Method) -> Vec<Hyper> {
        match method {
            Method::TopPushK => self
                .ks
                .iter()
                .map(|&k| Hyper { k: Some(k), beta: None, lambda: FIXED_LAMBDA })
                .collect(),
            Method::PatMat | Method::PatMatNp => self
                .betas
                .iter()
                .map(|&b| Hyper { k: None, beta: Some(b), lambda: FIXED_LAMBDA })
                .collect(),
            _ => self
                .lambdas
                .iter()
                .map(|&l| Hyper { k: None, beta: None, lambda: l })
                .collect(),
        }
    }

    /// One template per method, repeated for each tau where the method takes one.
    pub fn templates(&self, loss: SurrogateLoss) -> Vec<MethodTemplate> {
        let mut out = Vec::new();
        for &method in &self.methods {
            if method.needs_tau() {
                out.extend(self.taus.iter().map(|&tau| MethodTemplate { method, tau: Some(tau), loss }));
            } else {
                out.push(MethodTemplate { method, tau: None, loss });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub lambda: f64,
}

impl Hyper {
    fn swept_value(&self, method: Method) -> f64 {
        match Grid::swept(method) {
            "k" => self.k.unwrap_or(0) as f64,
            "beta" => self.beta.unwrap_or(f64::NAN),
            _ => self.lambda,
        }
    }
}

/// A method with its tau and surrogate fixed; the grid fills in the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodTemplate {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default)]
    pub loss: SurrogateLoss,
}

impl MethodTemplate {
    pub fn spec(&self, h: &Hyper) -> Result<ObjectiveSpec> {
        let rule = self.method.rule(h.k, self.tau, h.beta)?;
        ObjectiveSpec::new(rule, self.loss, h.lambda)
    }

    /// `patmat(tau=0.05)`, `toppush`.
    pub fn label(&self) -> String {
        match self.tau {
            Some(tau) => format!("{}(tau={tau})", self.method),
            None => self.method.to_string(),
        }
    }
}

/// Train, validation and test parts of one named dataset.
#[derive(Debug, Clone)]
pub struct Splits {
    pub name: String,
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

impl Splits {
    pub fn new(name: impl Into<String>, d: &Dataset, spec: &SplitSpec) -> Result<Self> {
        let (train, valid, test) = split(d, spec)?;
        Ok(Splits { name: name.into(), train, valid, test })
    }
}

/// Outcome of training one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub dataset: String,
    pub template: MethodTemplate,
    pub hyper: Hyper,
    pub seed: u64,
    /// Split name to criterion label to value.
    pub criteria: BTreeMap<String, BTreeMap<String, f64>>,
    /// Training objective at the final weights and at zero.
    pub f_final: f64,
    pub f_zero: f64,
    pub ms_per_iter: f64,
    pub w: Vec<f64>,
    pub t_final: f64,
}

impl RunRecord {
    pub fn get(&self, split: &str, c: &Criterion) -> Option<f64> {
        self.criteria.get(split)?.get(&c.to_string()).copied()
    }

    pub fn better_than_zero(&self) -> bool {
        self.f_final < self.f_zero
    }
}

fn criteria_on(w: &[f64], d: &Dataset, list: &[Criterion]) -> Result<BTreeMap<String, f64>> {
    let z = scores(w, d)?;
    list.iter()
        .map(|c| Ok((c.to_string(), criterion_from_scores(c, &z, d.labels())?)))
        .collect()
}

/// Trains one grid point and evaluates `list` on every split.
pub fn run_point(
    template: &MethodTemplate,
    hyper: &Hyper,
    splits: &Splits,
    cfg: &TrainConfig,
    list: &[Criterion],
) -> Result<RunRecord> {
    let spec = template.spec(hyper)?;
    let start = Instant::now();
    let model = train(&spec, &splits.train, cfg)?;
    let ms_per_iter = start.elapsed().as_secs_f64() * 1e3 / cfg.iterations as f64;
    let zero = vec![0.0; splits.train.n_features()];
    let mut criteria = BTreeMap::new();
    for (name, d) in [("train", &splits.train), ("valid", &splits.valid), ("test", &splits.test)] {
        criteria.insert(name.to_string(), criteria_on(&model.w, d, list)?);
    }
    Ok(RunRecord {
        method: template.label(),
        dataset: splits.name.clone(),
        template: *template,
        hyper: *hyper,
        seed: cfg.seed,
        criteria,
        f_final: objective(&spec, &model.w, &splits.train)?,
        f_zero: objective(&spec, &zero, &splits.train)?,
        ms_per_iter,
        w: model.w,
        t_final: model.t_final,
    })
}

/// Trains every grid point of `template` in the current rayon pool. Records
/// come back in grid order; failed points are logged and dropped.
pub fn run_grid(
    template: &MethodTemplate,
    grid: &Grid,
    splits: &Splits,
    cfg: &TrainConfig,
    list: &[Criterion],
) -> Result<Vec<RunRecord>> {
    let points = grid.points(template.method);
    if points.is_empty() {
        return Err(Error::invalid(format!("empty grid for {}", template.method)));
    }
    let results: Vec<Result<RunRecord>> = points
        .par_iter()
        .map(|h| run_point(template, h, splits, cfg, list))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    for (h, r) in points.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => log::warn!("{} on {} with {:?} failed: {e}", template.label(), splits.name, h),
        }
    }
    if records.is_empty() {
        return Err(Error::NoSuccessfulRun);
    }
    Ok(records)
}

/// The record with the largest validation value of `c`; the first one wins ties.
pub fn select<'a>(records: &'a [RunRecord], c: &Criterion) -> Result<&'a RunRecord> {
    let mut best: Option<(&RunRecord, f64)> = None;
    for r in records {
        let v = r
            .get("valid", c)
            .ok_or_else(|| Error::invalid(format!("record lacks validation value for {c}")))?;
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((r, v));
        }
    }
    best.map(|(r, _)| r).ok_or(Error::NoSuccessfulRun)
}

/// Runs the grid and selects by maximizing `select_by` on the validation split.
pub fn grid_search(
    template: &MethodTemplate,
    grid: &Grid,
    splits: &Splits,
    cfg: &TrainConfig,
    select_by: &Criterion,
) -> Result<(RunRecord, Vec<RunRecord>)> {
    let mut list = Criterion::all_for(&grid.taus);
    if !list.contains(select_by) {
        list.push(*select_by);
    }
    let records = run_grid(template, grid, splits, cfg, &list)?;
    let best = select(&records, select_by)?.clone();
    Ok((best, records))
}

/// Runs `f` on a dedicated pool with `jobs` workers (0 means one per core).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "condition", rename_all = "snake_case")]
pub enum Verdict {
    All,
    Some(String),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroAuditRow {
    pub method: String,
    pub dataset: String,
    pub verdict: Verdict,
    pub n_better: usize,
    pub n_total: usize,
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

/// Describes the set of swept values that beat zero, as a one-sided bound
/// when the winners form a prefix or suffix of the sorted values.
fn condition(name: &str, mut cells: Vec<(f64, bool)>) -> String {
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    cells.dedup_by(|a, b| {
        if a.0 == b.0 {
            b.1 &= a.1;
            true
        } else {
            false
        }
    });
    let wins: Vec<f64> = cells.iter().filter(|c| c.1).map(|c| c.0).collect();
    let n_win = wins.len();
    if cells[..n_win].iter().all(|c| c.1) {
        format!("{name} <= {}", fmt_value(wins[n_win - 1]))
    } else if cells[cells.len() - n_win..].iter().all(|c| c.1) {
        format!("{name} >= {}", fmt_value(wins[0]))
    } else {
        let list: Vec<String> = wins.iter().map(|v| fmt_value(*v)).collect();
        format!("{name} in {{{}}}", list.join(", "))
    }
}

/// Per method and dataset: whether `f(w_final) < f(0)` for all, some or none
/// of the hyperparameters.
pub fn zero_audit(records: &[RunRecord]) -> Vec<ZeroAuditRow> {
    let mut groups: BTreeMap<(String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.method.clone(), r.dataset.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, dataset), rs)| {
            let n_better = rs.iter().filter(|r| r.better_than_zero()).count();
            let verdict = if n_better == rs.len() {
                Verdict::All
            } else if n_better == 0 {
                Verdict::None
            } else {
                let m = rs[0].template.method;
                let cells = rs.iter().map(|r| (r.hyper.swept_value(m), r.better_than_zero())).collect();
                Verdict::Some(condition(Grid::swept(m), cells))
            };
            ZeroAuditRow { method, dataset, verdict, n_better, n_total: rs.len() }
        })
        .collect()
}

pub fn write_zero_audit_csv(rows: &[ZeroAuditRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["method", "dataset", "verdict", "condition", "n_better", "n_total"])?;
    for r in rows {
        let (verdict, cond) = match &r.verdict {
            Verdict::All => ("all", String::new()),
            Verdict::Some(c) => ("some", c.clone()),
            Verdict::None => ("none", String::new()),
        };
        wtr.write_record([
            r.method.as_str(),
            r.dataset.as_str(),
            verdict,
            cond.as_str(),
            &r.n_better.to_string(),
            &r.n_total.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// One value of a method on a dataset under a criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: String,
    pub dataset: String,
    pub criterion: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub criteria: Vec<String>,
    /// `ranks[i][j]`: average rank of method `i` under criterion `j`.
    pub ranks: Vec<Vec<f64>>,
}

/// Ranks with 1 for the largest value; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Per criterion, ranks the methods on each dataset and averages over datasets.
pub fn rank_table(cells: &[Cell], methods: &[String], datasets: &[String], criteria: &[String]) -> Result<RankTable> {
    let lookup: BTreeMap<(&str, &str, &str), f64> = cells
        .iter()
        .map(|c| ((c.method.as_str(), c.dataset.as_str(), c.criterion.as_str()), c.value))
        .collect();
    let mut ranks = vec![vec![0.0; criteria.len()]; methods.len()];
    for (j, crit) in criteria.iter().enumerate() {
        for ds in datasets {
            let values = methods
                .iter()
                .map(|m| {
                    lookup.get(&(m.as_str(), ds.as_str(), crit.as_str())).copied().ok_or_else(|| {
                        Error::MissingCell {
                            method: m.clone(),
                            dataset: ds.clone(),
                            criterion: crit.clone(),
                        }
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            for (i, r) in average_ranks(&values).into_iter().enumerate() {
                ranks[i][j] += r / datasets.len() as f64;
            }
        }
    }
    Ok(RankTable {
        methods: methods.to_vec(),
        criteria: criteria.to_vec(),
        ranks,
    })
}

impl RankTable {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut wtr = csv::Writer::from_path(path)?;
        let mut header = vec!["method".to_string()];
        header.extend(self.criteria.iter().cloned());
        wtr.write_record(&header)?;
        for (m, row) in self.methods.iter().zip(&self.ranks) {
            let mut rec = vec![m.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))
    }
}

pub const TIMING_SAMPLES: usize = 21;

/// Median wall time in milliseconds of [`TIMING_SAMPLES`] iterations run
/// after `warmup` untimed ones.
pub fn timing_probe(spec: &ObjectiveSpec, d: &Dataset, cfg: &TrainConfig, warmup: usize) -> Result<f64> {
    if warmup == 0 {
        return Err(Error::invalid("warmup must be at least 1"));
    }
    let mut trainer = Trainer::new(*spec, d, *cfg)?;
    for _ in 0..warmup {
        trainer.step()?;
    }
    let mut times = Vec::with_capacity(TIMING_SAMPLES);
    for _ in 0..TIMING_SAMPLES {
        let start = Instant::now();
        trainer.step()?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    Ok(times[TIMING_SAMPLES / 2])
}

/// Threshold and objective at a point, measured and in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub point: String,
    pub t_measured: f64,
    pub t_closed: f64,
    pub f_measured: f64,
    pub f_closed: f64,
}

/// Closed-form `(t, f)` on the synthetic example at `w1 = (0, 0)` (`second = false`)
/// or `w2 = (1, 0)`, in the large-`n` limit with the hinge loss and no regularization.
pub fn closed_form(method: Method, second: bool, tau: f64, beta: f64, k: usize) -> Result<(f64, f64)> {
    let pm = (1.0 - tau) / beta;
    Ok(match (method, second) {
        (Method::PatMat, false) => (pm, 1.0 + pm),
        (Method::PatMat, true) => (pm, 0.5 + pm),
        (Method::Grill, false) => (0.0, 2.0),
        (Method::Grill, true) => {
            // the false positives add 0.5 (1 - t)^2 at t = 1 - 2 tau
            let t = 1.0 - 2.0 * tau;
            (t, 0.5 + t + 0.5 * (1.0 - t) * (1.0 - t))
        }
        (Method::TopPush | Method::TopPushK | Method::TopMean, false) => (0.0, 1.0),
        (Method::TopPush, true) => (2.0, 2.5),
        (Method::TopPushK, true) => (2.0 / k as f64, 0.5 + 2.0 / k as f64),
        (Method::TopMean, true) => (1.0 - tau, 1.5 - tau),
        _ => return Err(Error::invalid(format!("no closed form for {method}"))),
    })
}

/// Evaluates `t` and `f` at `w1 = (0, 0)` and `w2 = (1, 0)` on `synth_example(n, seed)`.
pub fn reproduce_comparison(
    n: usize,
    methods: &[Method],
    tau: f64,
    beta: f64,
    k: usize,
    seed: u64,
) -> Result<Vec<ComparisonRow>> {
    if n < 1000 {
        return Err(Error::invalid("the comparison needs n >= 1000"));
    }
    let d = synth_example(n, seed)?;
    let mut rows = Vec::new();
    for &method in methods {
        let rule = method.rule(Some(k), Some(tau), Some(beta))?;
        let spec = ObjectiveSpec::new(rule, SurrogateLoss::Hinge, 0.0)?;
        for (name, w, second) in [("w1", [0.0, 0.0], false), ("w2", [1.0, 0.0], true)] {
            let (t_closed, f_closed) = closed_form(method, second, tau, beta, k)?;
            rows.push(ComparisonRow {
                method,
                point: name.to_string(),
                t_measured: threshold(&spec.rule, &w, &d, spec.loss)?.t,
                t_closed,
                f_measured: objective(&spec, &w, &d)?,
                f_closed,
            });
        }
    }
    Ok(rows)
}

pub const COMPARISON_METHODS: [Method; 5] =
    [Method::TopPush, Method::TopPushK, Method::Grill, Method::PatMat, Method::TopMean];

pub fn write_comparison_csv(rows: &[ComparisonRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["method", "point", "t_measured", "t_closed", "f_measured", "f_closed"])?;
    for r in rows {
        wtr.write_record([
            r.method.token().to_string(),
            r.point.clone(),
            r.t_measured.to_string(),
            r.t_closed.to_string(),
            r.f_measured.to_string(),
            r.f_closed.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    #[default]
    Csv,
    Libsvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub format: DataFormat,
    /// CSV label column and the value marking positives.
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "default_pos")]
    pub pos: String,
    pub split: SplitSpec,
}

fn default_label() -> String {
    "y".into()
}

fn default_pos() -> String {
    "1".into()
}

pub fn load(path: impl AsRef<Path>, format: DataFormat, label: &str, pos: &str) -> Result<Dataset> {
    match format {
        DataFormat::Csv => load_csv(path, label, pos),
        DataFormat::Libsvm => load_libsvm(path),
    }
}

/// Experiment description read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub datasets: Vec<DatasetEntry>,
    /// Method instances; defaults to the grid's methods crossed with its taus.
    #[serde(default)]
    pub methods: Vec<MethodTemplate>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub train: TrainConfig,
    /// Each seed reruns every dataset with that seed for splitting and training.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Selection criteria, e.g. `top`, `quantile:0.05`, `np:0.01`.
    pub select: Vec<String>,
    #[serde(default)]
    pub loss: SurrogateLoss,
    #[serde(default = "default_true")]
    pub timing: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_true() -> bool {
    true
}

impl Manifest {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text)?;
        // relative dataset paths are taken from the manifest's directory
        if let Some(dir) = path.parent() {
            for d in &mut m.datasets {
                if d.path.is_relative() {
                    d.path = dir.join(&d.path);
                }
            }
        }
        Ok(m)
    }

    pub fn templates(&self) -> Vec<MethodTemplate> {
        if self.methods.is_empty() {
            self.grid.templates(self.loss)
        } else {
            self.methods.clone()
        }
    }

    pub fn criteria(&self) -> Result<Vec<Criterion>> {
        if self.select.is_empty() {
            return Err(Error::invalid("manifest lists no selection criterion"));
        }
        self.select.iter().map(|s| s.parse()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub criterion: String,
    /// Winners are chosen by maximizing the criterion on the validation split.
    pub direction: String,
    pub record: RunRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub dataset: String,
    pub ms_per_iter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub selections: Vec<Selection>,
    pub ranks: RankTable,
    pub audit: Vec<ZeroAuditRow>,
    pub timing: Vec<TimingRow>,
}

/// Runs every method instance on every dataset and seed, then selects,
/// ranks, audits and times.
pub fn run_manifest(m: &Manifest) -> Result<ExperimentOutput> {
    let select_by = m.criteria()?;
    let templates = m.templates();
    let mut list = Criterion::all_for(&m.grid.taus);
    for c in &select_by {
        if !list.contains(c) {
            list.push(*c);
        }
    }
    let mut records = Vec::new();
    let mut selections = Vec::new();
    let mut cells = Vec::new();
    let mut timing = Vec::new();
    let mut dataset_names = Vec::new();
    for entry in &m.datasets {
        let full = load(&entry.path, entry.format, &entry.label, &entry.pos)?;
        for &seed in &m.seeds {
            let name = if m.seeds.len() > 1 {
                format!("{}#{seed}", entry.name)
            } else {
                entry.name.clone()
            };
            log::info!("dataset {name}");
            let splits = Splits::new(name.clone(), &full, &SplitSpec { seed, ..entry.split })?;
            let cfg = TrainConfig { seed, ..m.train };
            for t in &templates {
                let recs = run_grid(t, &m.grid, &splits, &cfg, &list)?;
                for c in &select_by {
                    let best = select(&recs, c)?;
                    cells.push(Cell {
                        method: t.label(),
                        dataset: name.clone(),
                        criterion: c.to_string(),
                        value: best.get("test", c).unwrap_or(f64::NAN),
                    });
                    selections.push(Selection {
                        criterion: c.to_string(),
                        direction: "maximize".into(),
                        record: best.clone(),
                    });
                }
                if m.timing {
                    let best = select(&recs, &select_by[0])?;
                    let spec = t.spec(&best.hyper)?;
                    timing.push(TimingRow {
                        method: t.label(),
                        dataset: name.clone(),
                        ms_per_iter: timing_probe(&spec, &splits.train, &cfg, 5)?,
                    });
                }
                records.extend(recs);
            }
            dataset_names.push(name);
        }
    }
    let methods: Vec<String> = templates.iter().map(|t| t.label()).collect();
    let criteria: Vec<String> = select_by.iter().map(|c| c.to_string()).collect();
    let ranks = rank_table(&cells, &methods, &dataset_names, &criteria)?;
    let audit = zero_audit(&records);
    Ok(ExperimentOutput { records, selections, ranks, audit, timing })
}

impl ExperimentOutput {
    /// Writes `runs.json`, `selected.json`, `rank_table.csv`, `zero_audit.csv`
    /// and `timing.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&self.records, dir.join("runs.json"))?;
        write_json(&self.selections, dir.join("selected.json"))?;
        self.ranks.write_csv(dir.join("rank_table.csv"))?;
        write_zero_audit_csv(&self.audit, dir.join("zero_audit.csv"))?;
        let path = dir.join("timing.csv");
        let mut wtr = csv::Writer::from_path(&path)?;
        wtr.write_record(["method", "dataset", "ms_per_iter"])?;
        for r in &self.timing {
            wtr.write_record([r.method.as_str(), r.dataset.as_str(), &r.ms_per_iter.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io(&path, e))
    }
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
