//! Batch command-line driver.
//!
//! Every subcommand resolves its settings from three layers, later layers
//! winning: a flat `key = value` config file (`--config`), environment
//! variables named `BOTSHARE_<KEY>` (upper case, `.` written as `__`), and
//! command-line flags. Settings are validated before any input is read.
//! All outputs are rendered in memory first and then written atomically.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{run_experiment, ExperimentOptions, Metric, TestMode};
use crate::features::{account_vector, assemble_matrix, FeatureSet};
use crate::ingest::{load_botometer, load_joined, load_profiles, Dataset, View};
use crate::kv;
use crate::numeric::{derive_seed, name_tag};
use crate::regress::{fit, Algorithm, ModelSpec, TrainedModel};
use crate::report::Format;
use crate::synth::{self, SynthConfig, SynthPaths};

pub const ENV_PREFIX: &str = "BOTSHARE_";

#[derive(Debug, Parser)]
#[command(name = "botshare", version, about = "Bot-followee share regression workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the feature matrix of each requested set as CSV.
    Features(CommonArgs),
    /// Cross-validate algorithms on feature sets and render comparison tables.
    Experiment(CommonArgs),
    /// Fit one algorithm on the whole view and save the model as JSON.
    Train(TrainArgs),
    /// Apply a saved model to profiles and print `account_id,predicted_pct`.
    Predict(PredictArgs),
    /// Generate a synthetic dataset with a planted linear target.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// Flat key = value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `all`, `credulous`, or both comma-separated.
    #[arg(long)]
    pub view: Option<String>,
    /// Feature sets: `classa`, `botometer`, `all_features` (`all`), comma-separated.
    #[arg(long)]
    pub set: Option<String>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// `mae`, `rmse`, or both comma-separated.
    #[arg(long)]
    pub metric: Option<String>,
    /// Algorithm names, comma-separated.
    #[arg(long)]
    pub algorithms: Option<String>,
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub botometer: Option<PathBuf>,
    /// Any config key, as `key=value`; repeatable.
    #[arg(short = 'D', long = "define", value_name = "KEY=VALUE")]
    pub define: Vec<String>,
}

#[derive(Debug, Args, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Clone)]
pub struct PredictArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Clone)]
pub struct SynthArgs {
    /// Flat key = value generator config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving the three dataset files.
    #[arg(long)]
    pub out: PathBuf,
    /// Any generator key, as `key=value`; repeatable.
    #[arg(short = 'D', long = "define", value_name = "KEY=VALUE")]
    pub define: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    File(PathBuf, usize),
    Env(String),
    Flag,
}

#[derive(Debug, Clone, PartialEq)]
struct Setting {
    value: String,
    source: Source,
}

impl Setting {
    fn label(&self) -> (String, usize) {
        match &self.source {
            Source::File(p, line) => (p.display().to_string(), *line),
            Source::Env(name) => (name.clone(), 0),
            Source::Flag => ("<command line>".into(), 0),
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (file, line) = self.label();
        kv::value(&file, key, &self.value, line)
    }

    /// File-sourced paths are relative to the config file.
    fn path(&self) -> PathBuf {
        let p = PathBuf::from(&self.value);
        match &self.source {
            Source::File(cfg, _) if p.is_relative() => {
                cfg.parent().map(|d| d.join(&p)).unwrap_or(p)
            }
            _ => p,
        }
    }
}

type Settings = BTreeMap<String, Setting>;

fn env_key(name: &str) -> Option<String> {
    name.strip_prefix(ENV_PREFIX)
        .map(|k| k.to_ascii_lowercase().replace("__", "."))
}

/// Config file, then environment, then flags.
fn layered(
    config: Option<&Path>,
    env: &[(String, String)],
    flags: Vec<(String, String)>,
    known: impl Fn(&str) -> bool,
) -> Result<Settings> {
    let mut out = Settings::new();
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (key, (value, line)) in kv::parse(&text, &path.display().to_string())? {
            if !known(&key) {
                return Err(Error::Config(format!(
                    "{}:{line}: unknown key {key:?}",
                    path.display()
                )));
            }
            let source = Source::File(path.to_path_buf(), line);
            out.insert(key, Setting { value, source });
        }
    }
    for (name, value) in env {
        match env_key(name) {
            Some(key) if known(&key) => {
                let source = Source::Env(name.clone());
                out.insert(key, Setting { value: value.clone(), source });
            }
            Some(_) => log::warn!("ignoring {name}: not a setting of this command"),
            None => {}
        }
    }
    for (key, value) in flags {
        if !known(&key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        out.insert(key, Setting { value, source: Source::Flag });
    }
    Ok(out)
}

fn defines(raw: &[String]) -> Result<Vec<(String, String)>> {
    raw.iter()
        .map(|d| {
            d.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("--define expects key=value, got {d:?}")))
        })
        .collect()
}

fn list<T: std::str::FromStr<Err = Error>>(raw: &str) -> Result<Vec<T>> {
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("empty list {raw:?}")));
    }
    Ok(items)
}

const RUN_KEYS: [&str; 18] = [
    "ground_truth",
    "profiles",
    "botometer",
    "snapshot_time",
    "view",
    "sets",
    "algorithms",
    "k",
    "repeats",
    "seed",
    "alpha",
    "test",
    "metric",
    "format",
    "out",
    "threads",
    "predictions",
    "model",
];

fn is_run_key(key: &str) -> bool {
    RUN_KEYS.contains(&key) || key.starts_with("param.")
}

/// Validated settings shared by the dataset-driven subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ground_truth: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub botometer: Option<PathBuf>,
    pub snapshot_time: DateTime<Utc>,
    pub views: Vec<View>,
    pub sets: Vec<FeatureSet>,
    /// Hyperparameters applied; seeds are left to the experiment.
    pub algorithms: Vec<ModelSpec>,
    pub options: ExperimentOptions,
    pub metrics: Vec<Metric>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Also write per-cell out-of-fold predictions.
    pub predictions: bool,
    pub model: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ground_truth: None,
            profiles: None,
            botometer: None,
            snapshot_time: synth::default_snapshot(),
            views: vec![View::AllHumans],
            sets: FeatureSet::ALL.to_vec(),
            algorithms: Algorithm::ALL.into_iter().map(ModelSpec::new).collect(),
            options: ExperimentOptions::default(),
            metrics: Metric::ALL.to_vec(),
            format: Format::Markdown,
            out: None,
            threads: None,
            predictions: false,
            model: None,
        }
    }
}

impl RunConfig {
    /// Parses a config file's text alone, as if no flags or environment
    /// were given.
    pub fn parse(text: &str, file: &Path) -> Result<Self> {
        let mut s = Settings::new();
        for (key, (value, line)) in kv::parse(text, &file.display().to_string())? {
            if !is_run_key(&key) {
                return Err(Error::Config(format!("{}:{line}: unknown key {key:?}", file.display())));
            }
            s.insert(key, Setting { value, source: Source::File(file.to_path_buf(), line) });
        }
        Self::from_settings(&s)
    }

    fn from_settings(s: &Settings) -> Result<Self> {
        let mut c = RunConfig::default();
        let get = |k: &str| s.get(k);
        c.ground_truth = get("ground_truth").map(Setting::path);
        c.profiles = get("profiles").map(Setting::path);
        c.botometer = get("botometer").map(Setting::path);
        c.model = get("model").map(Setting::path);
        c.out = get("out").map(Setting::path);
        if let Some(v) = get("snapshot_time") {
            c.snapshot_time = v.parse("snapshot_time")?;
        }
        if let Some(v) = get("view") {
            c.views = list(&v.value)?;
        }
        if let Some(v) = get("sets") {
            c.sets = list(&v.value)?;
        }
        if let Some(v) = get("metric") {
            c.metrics = list(&v.value)?;
        }
        if let Some(v) = get("format") {
            c.format = v.value.parse()?;
        }
        if let Some(v) = get("algorithms") {
            c.algorithms = if v.value.trim().eq_ignore_ascii_case("all") {
                RunConfig::default().algorithms
            } else {
                list::<Algorithm>(&v.value)?.into_iter().map(ModelSpec::new).collect()
            };
        }
        if let Some(v) = get("k") {
            c.options.k = v.parse("k")?;
        }
        if let Some(v) = get("repeats") {
            c.options.repeats = v.parse("repeats")?;
        }
        if let Some(v) = get("seed") {
            c.options.seed = v.parse("seed")?;
        }
        if let Some(v) = get("alpha") {
            c.options.alpha = v.parse("alpha")?;
        }
        if let Some(v) = get("test") {
            c.options.mode = match v.value.to_ascii_lowercase().as_str() {
                "corrected" => TestMode::Corrected,
                "naive" => TestMode::Naive,
                other => return Err(Error::Config(format!("test must be corrected or naive, got {other:?}"))),
            };
        }
        if let Some(v) = get("threads") {
            c.threads = Some(v.parse("threads")?);
        }
        if let Some(v) = get("predictions") {
            c.predictions = v.parse("predictions")?;
        }
        for (key, v) in s.range("param.".to_string()..) {
            let Some(rest) = key.strip_prefix("param.") else { break };
            let (alg, name) = rest
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("{key}: expected param.<algorithm>.<name>")))?;
            let alg: Algorithm = alg.parse()?;
            let value: f64 = v.parse(key)?;
            let spec = c
                .algorithms
                .iter_mut()
                .find(|s| s.algorithm() == alg)
                .ok_or_else(|| Error::Config(format!("{key}: {alg} is not among the selected algorithms")))?;
            *spec = spec.clone().with_param(name, value)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let o = &self.options;
        if o.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", o.k)));
        }
        if o.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(o.alpha > 0.0 && o.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", o.alpha)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.algorithms {
            if !seen.insert(s.algorithm()) {
                return Err(Error::Config(format!("{} listed twice", s.algorithm())));
            }
        }
        Ok(())
    }

    fn require<'a>(&self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| Error::Config(format!("missing required setting {key}")))
    }

    /// Ground truth joined with profiles and, when configured, scores.
    pub fn load_dataset(&self) -> Result<Dataset> {
        load_joined(
            self.require(&self.ground_truth, "ground_truth")?,
            self.require(&self.profiles, "profiles")?,
            self.botometer.as_deref(),
            self.snapshot_time,
        )
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }
}

fn common_flags(a: &CommonArgs) -> Result<Vec<(String, String)>> {
    let mut f = Vec::new();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            f.push((k.to_string(), v));
        }
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    put("seed", a.seed.map(|s| s.to_string()));
    put("view", a.view.clone());
    put("sets", a.set.clone());
    put("out", path(&a.out));
    put("threads", a.threads.map(|t| t.to_string()));
    put("metric", a.metric.clone());
    put("algorithms", a.algorithms.clone());
    put("ground_truth", path(&a.ground_truth));
    put("profiles", path(&a.profiles));
    put("botometer", path(&a.botometer));
    f.extend(defines(&a.define)?);
    Ok(f)
}

fn run_config(a: &CommonArgs, env: &[(String, String)], extra: Vec<(String, String)>) -> Result<RunConfig> {
    let mut flags = common_flags(a)?;
    flags.extend(extra);
    RunConfig::from_settings(&layered(a.config.as_deref(), env, flags, is_run_key)?)
}

/// Files to write once everything has been rendered.
type Outputs = Vec<(PathBuf, Vec<u8>)>;

fn commit(outputs: Outputs) -> Result<()> {
    for (path, bytes) in outputs {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        crate::write_atomic(&path, &bytes)?;
    }
    Ok(())
}

fn matrix_csv(d: &Dataset, set: FeatureSet) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    assemble_matrix(d, set)?.write_csv(&mut buf)?;
    Ok(buf)
}

/// One CSV per set; `out` is a file for a single set and a directory
/// (`features_<set>.csv`) otherwise.
pub fn cmd_features(cfg: &RunConfig, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let [view] = cfg.views[..] else {
        return Err(Error::Config("features takes exactly one view".into()));
    };
    let d = cfg.load_dataset()?.with_view(view)?;
    let mut outputs = Outputs::new();
    for &set in &cfg.sets {
        let bytes = matrix_csv(&d, set)?;
        match (&cfg.out, cfg.sets.len()) {
            (None, _) => outputs.push((PathBuf::new(), bytes)),
            (Some(p), 1) => outputs.push((p.clone(), bytes)),
            (Some(dir), _) => outputs.push((dir.join(format!("features_{}.csv", set.key())), bytes)),
        }
    }
    if cfg.out.is_none() {
        for (_, bytes) in outputs {
            stdout.write_all(&bytes).map_err(|e| Error::io("<stdout>", e))?;
        }
        return Ok(());
    }
    commit(outputs)
}

/// Runs the experiment for every configured view. Without `out`, tables go
/// to `stdout`; with it, the directory receives `<view>_<metric>.md|csv`,
/// `<view>_results.json` and, on request, per-cell predictions.
pub fn cmd_experiment(cfg: &RunConfig, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let base = cfg.load_dataset()?;
    let views: Vec<Dataset> = cfg
        .views
        .iter()
        .map(|&v| base.with_view(v))
        .collect::<Result<_>>()?;
    let mut outputs = Outputs::new();
    let mut printed = String::new();
    for d in &views {
        let res = run_experiment(d, &cfg.sets, &cfg.algorithms, &cfg.options)?;
        let view = d.view().label();
        for &m in &cfg.metrics {
            let table = res.table(m)?;
            let text = table.render(cfg.format);
            match &cfg.out {
                Some(dir) => {
                    let ext = match cfg.format {
                        Format::Markdown => "md",
                        Format::Csv => "csv",
                    };
                    outputs.push((dir.join(format!("{view}_{}.{ext}", m.label().to_ascii_lowercase())), text.into_bytes()));
                }
                None => {
                    if !printed.is_empty() {
                        printed.push('\n');
                    }
                    printed.push_str(&text);
                }
            }
        }
        if let Some(dir) = &cfg.out {
            outputs.push((dir.join(format!("{view}_results.json")), res.to_json()?.into_bytes()));
            if cfg.predictions {
                let plan = res.plan.as_ref().expect("fresh result carries its plan");
                for set in &res.feature_sets {
                    let m = assemble_matrix(d, *set)?;
                    for c in res.cells.iter().filter(|c| c.result.feature_set == *set) {
                        let mut buf = Vec::new();
                        c.result.write_predictions_csv(&mut buf, plan, &m)?;
                        let name = format!("{view}_{}_{}.csv", set.key(), c.result.algorithm.name());
                        outputs.push((dir.join("predictions").join(name), buf));
                    }
                }
            }
        }
    }
    if cfg.out.is_none() {
        stdout.write_all(printed.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
        return Ok(());
    }
    commit(outputs)
}

/// Fits the single configured algorithm on the single configured set.
pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let ([spec], [set], [view]) = (&cfg.algorithms[..], &cfg.sets[..], &cfg.views[..]) else {
        return Err(Error::Config("train takes exactly one algorithm, one set and one view".into()));
    };
    let out = cfg.require(&cfg.out, "out")?;
    let d = cfg.load_dataset()?.with_view(*view)?;
    let m = assemble_matrix(&d, *set)?;
    let spec = if spec.is_stochastic() && spec.seed().is_none() {
        spec.clone()
            .with_seed(derive_seed(cfg.options.seed, name_tag(spec.algorithm().name())))
    } else {
        spec.clone()
    };
    let model = fit(&spec, &m)?;
    let mut buf = Vec::new();
    model.write_json(&mut buf)?;
    commit(vec![(out.to_path_buf(), buf)])
}

/// Predictions for every profile, in file order, clamped to `[0, 100]`.
pub fn cmd_predict(cfg: &RunConfig, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let model = TrainedModel::load(cfg.require(&cfg.model, "model")?)?;
    let profiles = load_profiles(cfg.require(&cfg.profiles, "profiles")?)?;
    let scores = match &cfg.botometer {
        Some(p) => load_botometer(p)?,
        None => Vec::new(),
    };
    let by_id: BTreeMap<&str, _> = scores.iter().map(|s| (s.account_id.as_str(), s)).collect();
    let mut text = String::from("account_id,predicted_pct\n");
    for p in &profiles {
        let x = account_vector(
            model.feature_set(),
            Some(p),
            by_id.get(p.account_id.as_str()).copied(),
            &p.account_id,
            cfg.snapshot_time,
        )?;
        let y = model.predict(&x)?.clamp(0.0, 100.0);
        text.push_str(&format!("{},{}\n", p.account_id, y));
    }
    match &cfg.out {
        Some(p) => commit(vec![(p.clone(), text.into_bytes())]),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<SynthPaths> {
    let data = synth::generate(cfg)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let paths = SynthPaths::in_dir(out);
    data.write(&paths)?;
    Ok(paths)
}

fn synth_config(a: &SynthArgs, env: &[(String, String)]) -> Result<SynthConfig> {
    let mut flags = Vec::new();
    if let Some(s) = a.seed {
        flags.push(("seed".to_string(), s.to_string()));
    }
    flags.extend(defines(&a.define)?);
    let s = layered(a.config.as_deref(), env, flags, |k| SynthConfig::KEYS.contains(&k))?;
    let mut cfg = SynthConfig::default();
    for (key, setting) in &s {
        let (file, line) = setting.label();
        cfg.set(key, &setting.value, &file, line)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Executes a parsed command against an explicit environment.
pub fn execute(cli: Cli, env: &[(String, String)], stdout: &mut dyn Write) -> Result<()> {
    let mut buf = Vec::new();
    execute_buffered(cli, env, &mut buf)?;
    stdout.write_all(&buf).map_err(|e| Error::io("<stdout>", e))
}

fn execute_buffered(cli: Cli, env: &[(String, String)], stdout: &mut Vec<u8>) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let cfg = synth_config(&a, env)?;
            cmd_synth(&cfg, &a.out).map(|_| ())
        }
        Command::Features(a) => {
            let cfg = run_config(&a, env, Vec::new())?;
            cfg.pool()?.install(|| cmd_features(&cfg, stdout))
        }
        Command::Experiment(a) => {
            let cfg = run_config(&a, env, Vec::new())?;
            cfg.pool()?.install(|| cmd_experiment(&cfg, stdout))
        }
        Command::Train(a) => {
            let cfg = run_config(&a.common, env, Vec::new())?;
            cfg.pool()?.install(|| cmd_train(&cfg))
        }
        Command::Predict(a) => {
            let model = vec![("model".to_string(), a.model.display().to_string())];
            let cfg = run_config(&a.common, env, model)?;
            cfg.pool()?.install(|| cmd_predict(&cfg, stdout))
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Usage errors exit through clap with code 2.
pub fn run<I, T>(args: I, env: &[(String, String)], stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli, env, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// The process environment restricted to this tool's prefix.
pub fn prefixed_env() -> Vec<(String, String)> {
    std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect()
}
