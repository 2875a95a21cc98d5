//! The `credyn` command line: `generate`, `features`, `study` and `explain`
//! driven by a TOML run config.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::boost::{BoostedModel, GridSpec};
use crate::error::{Error, Result};
use crate::features::{read_matrix, write_matrix, Experiment, FeatureGroup, FeatureMatrix};
use crate::hash::keyed;
use crate::io::{atomic_write, read_cohort, read_edges, read_panel, write_cohort, write_edges, write_panel};
use crate::select::SelectionConfig;
use crate::shap::{group_importance, mean_abs_shap};
use crate::study::{build_feature_matrices, build_snapshots, run_study, write_report, Snapshot, StudyConfig};
use crate::synth::{generate_population, PopulationConfig};

pub const ENV_SEED: &str = "CREDYN_SEED";
pub const ENV_OUT: &str = "CREDYN_OUT";

/// Input locations. Unset entries default to the files `generate` writes
/// under `<out>/data`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub panel: Option<PathBuf>,
    pub cohort: Option<PathBuf>,
    pub eownet: Option<PathBuf>,
    pub familynet: Option<PathBuf>,
    pub out: PathBuf,
}

/// Study options other than selection and the tuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyOptions {
    pub tuning_fraction: f64,
    pub tuning_folds: usize,
    pub cv_folds: usize,
    pub explain_sample: usize,
    pub lowess_frac: f64,
    /// Write every fold model under `<out>/study/models`.
    pub save_models: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        let d = StudyConfig::default();
        StudyOptions {
            tuning_fraction: d.tuning_fraction,
            tuning_folds: d.tuning_folds,
            cv_folds: d.cv_folds,
            explain_sample: d.explain_sample,
            lowess_frac: d.lowess_frac,
            save_models: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the generator, the tuning split, folds and explanation samples.
    pub seed: u64,
    pub experiments: Vec<Experiment>,
    pub first_month: u32,
    pub last_month: u32,
    pub paths: Paths,
    pub population: PopulationConfig,
    pub selection: SelectionConfig,
    pub grid: GridSpec,
    pub study: StudyOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            experiments: Experiment::ALL.to_vec(),
            first_month: 1,
            last_month: 12,
            paths: Paths {
                out: PathBuf::from("out"),
                ..Paths::default()
            },
            population: PopulationConfig::default(),
            selection: SelectionConfig::default(),
            grid: GridSpec::default(),
            study: StudyOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Applies `CREDYN_SEED` / `CREDYN_OUT` from `env`.
    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(s) = env(ENV_SEED) {
            self.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::config(ENV_SEED, format!("not an unsigned integer: {s:?}")))?;
        }
        if let Some(o) = env(ENV_OUT) {
            self.paths.out = PathBuf::from(o);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.first_month == 0 || self.first_month > self.last_month {
            return Err(Error::config("first_month", "must satisfy 1 <= first_month <= last_month"));
        }
        if self.paths.out.as_os_str().is_empty() {
            return Err(Error::config("paths.out", "must not be empty"));
        }
        self.population().validate()?;
        self.study_config().validate()
    }

    pub fn population(&self) -> PopulationConfig {
        PopulationConfig {
            seed: self.seed,
            ..self.population.clone()
        }
    }

    pub fn study_config(&self) -> StudyConfig {
        StudyConfig {
            seed: self.seed,
            months: self.last_month,
            experiments: self.experiments.clone(),
            tuning_fraction: self.study.tuning_fraction,
            tuning_folds: self.study.tuning_folds,
            cv_folds: self.study.cv_folds,
            explain_sample: self.study.explain_sample,
            lowess_frac: self.study.lowess_frac,
            keep_models: self.study.save_models,
            selection: self.selection,
            grid: self.grid.clone(),
        }
    }

    fn data_path(&self, set: &Option<PathBuf>, file: &str) -> PathBuf {
        set.clone().unwrap_or_else(|| self.paths.out.join("data").join(file))
    }

    pub fn panel_path(&self) -> PathBuf {
        self.data_path(&self.paths.panel, "panel.csv")
    }

    pub fn cohort_path(&self) -> PathBuf {
        self.data_path(&self.paths.cohort, "cohort.csv")
    }

    pub fn eownet_path(&self) -> PathBuf {
        self.data_path(&self.paths.eownet, "eownet.csv")
    }

    pub fn familynet_path(&self) -> PathBuf {
        self.data_path(&self.paths.familynet, "familynet.csv")
    }

    pub fn features_dir(&self) -> PathBuf {
        self.paths.out.join("features")
    }

    pub fn study_dir(&self) -> PathBuf {
        self.paths.out.join("study")
    }
}

#[derive(Debug, Parser)]
#[command(name = "credyn", version, about = "Month-by-month credit scoring dynamics")]
pub struct Cli {
    /// TOML run config; defaults apply when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed and CREDYN_SEED
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; overrides the config and CREDYN_OUT
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic population: panel, cohort and both networks
    Generate,
    /// Write one feature matrix per snapshot month
    Features,
    /// Run the full study and write the report and figure tables
    Study,
    /// SHAP importance of a saved model on one month's features
    Explain {
        /// Model JSON written by `study` with save_models enabled
        #[arg(long)]
        model: PathBuf,
        /// Snapshot month whose feature matrix is explained
        #[arg(long, default_value_t = 1)]
        month: u32,
    },
}

/// Resolves the run config: file, then environment, then flags.
pub fn resolve_config(cli: &Cli, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env(env)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.paths.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let pop = generate_population(&cfg.population())?;
    write_panel(&cfg.panel_path(), &pop.panel)?;
    write_cohort(&cfg.cohort_path(), &pop.cohort)?;
    write_edges(&cfg.eownet_path(), &pop.eownet)?;
    write_edges(&cfg.familynet_path(), &pop.familynet)
}

struct Inputs {
    snapshots: Vec<Snapshot>,
    matrices: Vec<FeatureMatrix>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let panel = read_panel(&cfg.panel_path())?;
    let cohort = read_cohort(&cfg.cohort_path())?;
    let eownet = read_edges(&cfg.eownet_path(), &panel)?;
    let familynet = read_edges(&cfg.familynet_path(), &panel)?;
    let snapshots: Vec<Snapshot> = build_snapshots(&panel, &cohort, cfg.last_month)?
        .into_iter()
        .filter(|s| s.month_since_grant >= cfg.first_month)
        .collect();
    let matrices = build_feature_matrices(&panel, &eownet, &familynet, &snapshots)?;
    Ok(Inputs { snapshots, matrices })
}

fn month_file(month: u32) -> String {
    format!("month_{month:02}.csv")
}

pub fn cmd_features(cfg: &RunConfig) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let dir = cfg.features_dir();
    for (s, m) in inputs.snapshots.iter().zip(&inputs.matrices) {
        write_matrix(&dir.join(month_file(s.month_since_grant)), m, Some(&s.labels()))?;
    }
    Ok(())
}

pub fn cmd_study(cfg: &RunConfig) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let report = run_study(&inputs.snapshots, &inputs.matrices, &cfg.study_config())?;
    let dir = cfg.study_dir();
    write_report(&dir, &report)?;
    if cfg.study.save_models {
        for c in &report.cells {
            for (fold, model) in c.models.iter().enumerate() {
                let name = format!("{}_m{:02}_fold{}.json", c.experiment.as_str(), c.month, fold);
                model.save(&dir.join("models").join(name))?;
            }
        }
    }
    Ok(())
}

pub fn cmd_explain(cfg: &RunConfig, model_path: &Path, month: u32) -> Result<PathBuf> {
    let model = BoostedModel::load(model_path)?;
    let features = cfg.features_dir().join(month_file(month));
    if !features.exists() {
        return Err(Error::MissingInput(features));
    }
    let (matrix, _) = read_matrix(&features)?;
    let names: Vec<String> = model.feature_names().into_iter().map(str::to_string).collect();
    let x = matrix.select_columns(&names)?;
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    order.sort_by_key(|&i| (keyed(x.rows[i], cfg.seed), x.rows[i]));
    order.truncate(cfg.study.explain_sample);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| x.row(i)).collect();
    let per_feature = mean_abs_shap(&model, &rows)?;
    let shares = group_importance(&model, &rows)?;
    let mut per_group = [0.0; FeatureGroup::ALL.len()];
    for (entry, v) in model.schema.iter().zip(&per_feature) {
        per_group[FeatureGroup::ALL.iter().position(|&g| g == entry.group).expect("known group")] += v;
    }
    let stem = model_path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let out = cfg.paths.out.join("explain").join(format!("{stem}_m{month:02}_importance.csv"));
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    atomic_write(&out, |w| {
        writeln!(w, "level,name,group,mean_abs_shap,share")?;
        for (entry, v) in model.schema.iter().zip(&per_feature) {
            let share = (shares.total > 0.0).then(|| v / shares.total);
            writeln!(w, "feature,{},{},{},{}", entry.name, entry.group.as_str(), v, fmt(share))?;
        }
        for (g, v) in FeatureGroup::ALL.iter().zip(per_group) {
            let share = (shares.total > 0.0).then(|| v / shares.total);
            writeln!(w, "group,{0},{0},{1},{2}", g.as_str(), v, fmt(share))?;
        }
        let borrower: f64 = FeatureGroup::ALL
            .iter()
            .zip(per_group)
            .filter(|(g, _)| g.is_borrower())
            .map(|(_, v)| v)
            .sum();
        writeln!(w, "side,borrower,,{},{}", borrower, fmt(shares.borrower_share))?;
        writeln!(w, "side,network,,{},{}", shares.total - borrower, fmt(shares.network_share))
    })?;
    Ok(out)
}

/// Runs the CLI and returns the process exit code. Errors are reported on
/// `stderr` as a single `error[<kind>]: <message>` line.
pub fn run<I, T>(args: I, env: impl Fn(&str) -> Option<String>, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "error[usage]: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match execute(&cli, env) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error[{}]: {}", e.kind(), msg);
            1
        }
    }
}

fn execute(cli: &Cli, env: impl Fn(&str) -> Option<String>) -> Result<()> {
    let cfg = resolve_config(cli, env)?;
    let work = || match &cli.command {
        Command::Generate => cmd_generate(&cfg),
        Command::Features => cmd_features(&cfg),
        Command::Study => cmd_study(&cfg),
        Command::Explain { model, month } => cmd_explain(&cfg, model, *month).map(|_| ()),
    };
    match cli.threads {
        Some(0) => Err(Error::config("threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(work),
        None => work(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_and_unknown_keys() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        let err = RunConfig::from_toml("sed = 3").unwrap_err();
        assert_eq!(err.kind(), "config");
    }

    #[test]
    fn env_then_flags_override() {
        let cli = Cli::try_parse_from(["credyn", "--seed", "9", "generate"]).unwrap();
        let env = |k: &str| match k {
            ENV_SEED => Some("5".to_string()),
            ENV_OUT => Some("/tmp/x".to_string()),
            _ => None,
        };
        let cfg = resolve_config(&cli, env).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.paths.out, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.population().seed, 9);
        assert_eq!(cfg.panel_path(), PathBuf::from("/tmp/x/data/panel.csv"));
        let cli = Cli::try_parse_from(["credyn", "study"]).unwrap();
        assert_eq!(resolve_config(&cli, env).unwrap().seed, 5);
        let bad = |k: &str| (k == ENV_SEED).then(|| "abc".to_string());
        assert_eq!(resolve_config(&cli, bad).unwrap_err().kind(), "config");
    }

    #[test]
    fn unknown_flag_is_a_one_line_error() {
        let mut err = Vec::new();
        let code = run(["credyn", "study", "--fast"], |_| None, &mut err);
        assert_eq!(code, 2);
        let text = String::from_utf8(err).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("error[usage]: "));
        assert!(text.contains("--fast"));
    }

    #[test]
    fn month_range_is_validated() {
        let cfg = RunConfig {
            first_month: 5,
            last_month: 4,
            ..RunConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().kind(), "config");
    }
}
