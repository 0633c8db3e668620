//! Command-line surface: `simulate`, `importance`, `report`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 compute
//! error. All randomness flows from one `--seed` through documented
//! stream derivations: 0 synthetic data, 1 split, 2 model, 3 permutation
//! scores, 4 patch sampling.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{
    self, generate_synthetic, load_table, Dataset, SchemaConfig, SyntheticTruth, TaskKind,
};
use crate::error::{Error, Result};
use crate::importance::{
    fit_minipatch_ensemble, mp_occlusion_scores, occl_importance_all, perm_importance_all,
    ImportanceMethod, MinipatchConfig, PermOptions, PermutationStrategy,
};
use crate::learners::ModelSpec;
use crate::metrics::{BiasMetricKind, LossMetricKind};
use crate::report::{
    render_chart, MinipatchSettings, ReportDocument, ResolvedConfig, SyntheticSource,
};
use crate::rng::derive_seed;

/// Seed stream ids hanging off `--seed`.
pub mod streams {
    pub const SYNTHETIC: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const MODEL: u64 = 2;
    pub const PERMUTATION: u64 = 3;
    pub const PATCHES: u64 = 4;
}

/// Shipped schema presets, resolvable by name.
pub const ADULT_SCHEMA: &str = include_str!("../schemas/adult.json");
pub const GERMAN_SCHEMA: &str = include_str!("../schemas/german.json");

#[derive(Parser)]
#[command(
    name = "fairfeat",
    version,
    about = "Feature importance scores for fairness and accuracy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark dataset with known signal and bias
    Simulate(SimulateArgs),
    /// Compute per-feature fairness and accuracy importance scores
    Importance(Box<ImportanceArgs>),
    /// Render the chart and text summary for an existing report
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum TaskArg {
    Classification,
    Regression,
}

impl From<TaskArg> for TaskKind {
    fn from(value: TaskArg) -> Self {
        match value {
            TaskArg::Classification => TaskKind::Classification,
            TaskArg::Regression => TaskKind::Regression,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    /// Permutation with retraining
    Perm,
    /// Direct occlusion (one refit per feature)
    Occl,
    /// Minipatch occlusion
    Mp,
}

impl From<MethodArg> for ImportanceMethod {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Perm => ImportanceMethod::Permutation,
            MethodArg::Occl => ImportanceMethod::OcclusionDirect,
            MethodArg::Mp => ImportanceMethod::OcclusionMinipatch,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "classification")]
    task: TaskArg,
    #[arg(long, default_value_t = 1000)]
    n_samples: usize,
    #[arg(long, default_value_t = 10)]
    n_features: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset path; truth and schema files are written next to it
    #[arg(long, default_value = "synthetic.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ImportanceArgs {
    /// Delimiter-separated dataset with a header row
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Schema JSON path, or a shipped preset name (adult, german)
    #[arg(long)]
    schema: Option<String>,
    /// Generate the dataset instead of loading one
    #[arg(long, value_enum)]
    synthetic: Option<TaskArg>,
    #[arg(long, default_value_t = 1000)]
    n_samples: usize,
    #[arg(long, default_value_t = 10)]
    n_features: usize,
    /// Seed for the synthetic dataset (default: derived from --seed)
    #[arg(long)]
    data_seed: Option<u64>,
    /// Expected task; errors if the dataset disagrees
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    /// Model preset (rf, tree, logreg, linreg) or inline spec JSON
    #[arg(long, default_value = "rf")]
    model: String,
    #[arg(long, value_enum, default_value = "mp")]
    method: MethodArg,
    /// Bias metric h (dp_diff, dp_comp, reg_dp); default by task
    #[arg(long)]
    metric: Option<String>,
    /// Loss metric (error, mse); default by task
    #[arg(long)]
    loss: Option<String>,
    /// Permutation repetitions per feature
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    /// Rows per patch as a fraction of N
    #[arg(long = "n-frac", default_value_t = 0.2)]
    n_frac: f64,
    /// Features per patch as a fraction of M
    #[arg(long = "m-frac", default_value_t = 0.2)]
    m_frac: f64,
    /// Number of minipatches
    #[arg(long = "K", default_value_t = 2000)]
    k_patches: usize,
    /// Held-out fraction of the train/test split
    #[arg(long, default_value_t = 0.2)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "fairfeat-out")]
    out_dir: PathBuf,
    /// Evaluate scores on the training rows instead of the held-out rows
    #[arg(long)]
    in_sample: bool,
    /// Classic permutation variant: permute at evaluation time only,
    /// without retraining
    #[arg(long)]
    no_refit: bool,
    /// Keep the protected column in the feature matrix (one-hot)
    #[arg(long)]
    keep_protected_feature: bool,
    /// Skip writing chart.svg
    #[arg(long)]
    no_chart: bool,
    /// Re-run the configuration embedded in a report.json (other flags
    /// except --out-dir and --no-chart are ignored)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a report.json
    report: PathBuf,
    /// Chart output path (default: chart.svg next to the report)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point: parse, dispatch, and map errors to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Importance(args) => cmd_importance(&args),
        Command::Report(args) => cmd_report(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(serde::Serialize)]
struct TruthDocument<'a> {
    task: TaskKind,
    seed: u64,
    feature_names: &'a [String],
    #[serde(flatten)]
    truth: &'a SyntheticTruth,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let task: TaskKind = args.task.into();
    let (ds, truth) = generate_synthetic(task, args.n_samples, args.n_features, args.seed)?;

    let mut csv = String::new();
    for name in ds.feature_names() {
        csv.push_str(name);
        csv.push(',');
    }
    csv.push_str("y,z\n");
    let targets = ds.target().values();
    let groups = ds.groups().values();
    for i in 0..ds.n_samples() {
        for j in 0..ds.n_features() {
            csv.push_str(&ds.features()[[i, j]].to_string());
            csv.push(',');
        }
        match task {
            TaskKind::Classification => csv.push_str(&format!("{}", targets[i] as u8)),
            TaskKind::Regression => csv.push_str(&targets[i].to_string()),
        }
        csv.push_str(&format!(",{}\n", groups[i]));
    }
    write_file(&args.out, &csv)?;

    let truth_doc = TruthDocument {
        task,
        seed: args.seed,
        feature_names: ds.feature_names(),
        truth: &truth,
    };
    let truth_path = sibling(&args.out, "_truth.json");
    write_file(
        &truth_path,
        &serde_json::to_string_pretty(&truth_doc).expect("truth serialization cannot fail"),
    )?;

    let schema = SchemaConfig {
        target: "y".into(),
        positive_class: match task {
            TaskKind::Classification => Some("1".into()),
            TaskKind::Regression => None,
        },
        protected: "z".into(),
        categorical: vec![],
        drop_missing: false,
        delimiter: ',',
        ignore: vec![],
        missing_values: vec![String::new(), "?".into(), "NA".into()],
        keep_protected: false,
    };
    let schema_path = sibling(&args.out, "_schema.json");
    write_file(
        &schema_path,
        &serde_json::to_string_pretty(&schema).expect("schema serialization cannot fail"),
    )?;

    println!(
        "wrote {} ({} rows, {} columns), {}, {}",
        args.out.display(),
        ds.n_samples(),
        ds.n_features() + 2,
        truth_path.display(),
        schema_path.display()
    );
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Resolve `--schema` as a file path first, then as a preset name.
fn resolve_schema(spec: &str) -> Result<SchemaConfig> {
    let path = Path::new(spec);
    if path.exists() {
        return SchemaConfig::from_path(path);
    }
    match spec {
        "adult" | "adult.json" => SchemaConfig::from_json(ADULT_SCHEMA),
        "german" | "german.json" => SchemaConfig::from_json(GERMAN_SCHEMA),
        other => Err(Error::Document {
            kind: "schema",
            reason: format!("{other:?} is neither a readable file nor a preset (adult, german)"),
        }),
    }
}

fn resolve_model(spec: &str) -> Result<ModelSpec> {
    match spec {
        "rf" => Ok(ModelSpec::RandomForest {
            trees: 100,
            max_depth: None,
            min_leaf: None,
            max_features: None,
            bootstrap: true,
            seed: None,
        }),
        "tree" => Ok(ModelSpec::DecisionTree {
            max_depth: None,
            min_leaf: None,
            max_features: None,
            seed: None,
        }),
        "logreg" => ModelSpec::from_json(r#"{"kind": "logistic_regression"}"#),
        "linreg" => ModelSpec::from_json(r#"{"kind": "linear_regression"}"#),
        json => ModelSpec::from_json(json),
    }
}

fn cmd_importance(args: &ImportanceArgs) -> Result<()> {
    let (config, loader_warnings, dataset) = if let Some(config_path) = &args.config {
        let text = std::fs::read_to_string(config_path).map_err(|source| Error::Io {
            path: config_path.display().to_string(),
            source,
        })?;
        let document = ReportDocument::from_json(&text)?;
        let config = document.config;
        let (dataset, warnings) = realize_dataset(&config)?;
        (config, warnings, dataset)
    } else {
        resolve_config(args)?
    };

    let document = execute(&config, &dataset, loader_warnings)?;

    std::fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io {
        path: args.out_dir.display().to_string(),
        source,
    })?;
    write_file(&args.out_dir.join("report.json"), &document.to_json())?;
    write_file(&args.out_dir.join("scores.csv"), &document.to_csv())?;
    if !args.no_chart {
        write_file(&args.out_dir.join("chart.svg"), &render_chart(&document))?;
    }
    print!("{}", document.summary());
    println!("artifacts in {}", args.out_dir.display());
    Ok(())
}

/// Build the resolved config and load the dataset from CLI flags.
fn resolve_config(args: &ImportanceArgs) -> Result<(ResolvedConfig, Vec<String>, Dataset)> {
    let method: ImportanceMethod = args.method.into();

    let (data, schema, synthetic) = match (&args.data, args.synthetic) {
        (Some(path), None) => {
            let schema_name = args
                .schema
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("--data requires --schema".into()))?;
            let mut schema = resolve_schema(schema_name)?;
            if args.keep_protected_feature {
                schema.keep_protected = true;
            }
            (Some(path.display().to_string()), Some(schema), None)
        }
        (None, Some(task)) => {
            let source = SyntheticSource {
                task: task.into(),
                n_samples: args.n_samples,
                n_features: args.n_features,
                seed: args
                    .data_seed
                    .unwrap_or_else(|| derive_seed(args.seed, streams::SYNTHETIC)),
            };
            (None, None, Some(source))
        }
        (None, None) => {
            return Err(Error::InvalidParameter(
                "dataset source missing: pass --data with --schema, or --synthetic".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with prevents this"),
    };

    let mut config = ResolvedConfig {
        data,
        schema,
        synthetic,
        task: TaskKind::Classification, // placeholder until the data is realized
        model: resolve_model(&args.model)?
            .with_default_seed(derive_seed(args.seed, streams::MODEL)),
        method,
        bias_metric: BiasMetricKind::DpComplementRatio, // placeholder
        loss_metric: LossMetricKind::ClassificationError, // placeholder
        repetitions: args.repetitions,
        refit: !args.no_refit,
        in_sample: args.in_sample,
        split_fraction: args.split,
        seed: args.seed,
        minipatch: None,
        keep_protected_feature: args.keep_protected_feature,
    };

    let (dataset, warnings) = realize_dataset(&config)?;
    let task = dataset.task();
    if let Some(expected) = args.task {
        let expected: TaskKind = expected.into();
        if expected != task {
            return Err(Error::Incompatible(format!(
                "--task {expected} but the dataset target is {task}"
            )));
        }
    }
    config.task = task;
    config.bias_metric = match &args.metric {
        Some(name) => BiasMetricKind::parse(name)?,
        None => BiasMetricKind::default_for(task),
    };
    config.loss_metric = match &args.loss {
        Some(name) => LossMetricKind::parse(name)?,
        None => LossMetricKind::default_for(task),
    };
    if config.bias_metric.task() != task {
        return Err(Error::Incompatible(format!(
            "bias metric {} applies to {} tasks, dataset is {task}",
            config.bias_metric.name(),
            config.bias_metric.task()
        )));
    }
    if config.loss_metric.task() != task {
        return Err(Error::Incompatible(format!(
            "loss metric {} applies to {} tasks, dataset is {task}",
            config.loss_metric.name(),
            config.loss_metric.task()
        )));
    }
    if method == ImportanceMethod::OcclusionMinipatch {
        let mp = MinipatchConfig::from_fractions(
            dataset.n_samples(),
            dataset.n_features(),
            args.n_frac,
            args.m_frac,
            args.k_patches,
            derive_seed(args.seed, streams::PATCHES),
        );
        config.minipatch = Some(MinipatchSettings {
            n_frac: args.n_frac,
            m_frac: args.m_frac,
            patch_count: args.k_patches,
            rows_per_patch: mp.rows_per_patch,
            features_per_patch: mp.features_per_patch,
        });
    }
    Ok((config, warnings, dataset))
}

/// Load or generate the dataset a resolved config describes.
fn realize_dataset(config: &ResolvedConfig) -> Result<(Dataset, Vec<String>)> {
    match (&config.data, &config.synthetic) {
        (Some(path), _) => {
            let schema = config.schema.as_ref().ok_or_else(|| Error::Document {
                kind: "report",
                reason: "config names a data file but carries no schema".into(),
            })?;
            let outcome = load_table(Path::new(path), schema)?;
            Ok((outcome.dataset, outcome.warnings))
        }
        (None, Some(source)) => {
            let (ds, _) =
                generate_synthetic(source.task, source.n_samples, source.n_features, source.seed)?;
            Ok((ds, Vec::new()))
        }
        (None, None) => Err(Error::Document {
            kind: "report",
            reason: "config carries neither a data file nor synthetic parameters".into(),
        }),
    }
}

/// Run the configured method and assemble the report document.
fn execute(
    config: &ResolvedConfig,
    dataset: &Dataset,
    loader_warnings: Vec<String>,
) -> Result<ReportDocument> {
    let pair = dataset::split(
        dataset,
        config.split_fraction,
        derive_seed(config.seed, streams::SPLIT),
    )?;
    let eval = if config.in_sample {
        &pair.train
    } else {
        &pair.test
    };

    let report = match config.method {
        ImportanceMethod::Permutation => {
            let opts = PermOptions {
                repetitions: config.repetitions,
                refit: config.refit,
                strategy: PermutationStrategy::Seeded,
            };
            perm_importance_all(
                &pair.train,
                eval,
                &config.model,
                config.bias_metric,
                config.loss_metric,
                &opts,
                derive_seed(config.seed, streams::PERMUTATION),
            )?
        }
        ImportanceMethod::OcclusionDirect => occl_importance_all(
            &pair.train,
            eval,
            &config.model,
            config.bias_metric,
            config.loss_metric,
            config.seed,
        )?,
        ImportanceMethod::OcclusionMinipatch => {
            let settings = config.minipatch.as_ref().ok_or_else(|| Error::Document {
                kind: "report",
                reason: "minipatch method without minipatch settings".into(),
            })?;
            let mp_config = MinipatchConfig {
                rows_per_patch: settings.rows_per_patch,
                features_per_patch: settings.features_per_patch,
                patch_count: settings.patch_count,
                seed: derive_seed(config.seed, streams::PATCHES),
            };
            let ensemble = fit_minipatch_ensemble(
                dataset,
                &config.model,
                &mp_config,
                config.bias_metric,
                config.loss_metric,
            )?;
            let mut report = mp_occlusion_scores(&ensemble)?;
            // Model-level numbers come from one full fit on the split,
            // independent of the patch ensemble.
            let baseline = crate::importance::fit_baseline(
                &pair.train,
                eval,
                &config.model,
                config.bias_metric,
                config.loss_metric,
            )?;
            report.model_accuracy = baseline.accuracy;
            report.model_fairness_dp_ratio = baseline.dp_ratio;
            report
        }
    };

    Ok(ReportDocument::assemble(
        config.clone(),
        report,
        loader_warnings,
    ))
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.report).map_err(|source| Error::Io {
        path: args.report.display().to_string(),
        source,
    })?;
    let document = ReportDocument::from_json(&text)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.report.with_file_name("chart.svg"));
    write_file(&out, &render_chart(&document))?;
    print!("{}", document.summary());
    println!("chart written to {}", out.display());
    Ok(())
}
