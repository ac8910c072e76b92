use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use btmodel::block_model::{
    simulate_chain, CategoryParams, EntityLayout, Model, ModelParams, SimulationConfig, SubsetParams,
};
use btmodel::classifier::{evaluate, feature_importance_report, split_train_test, train_gbdt, GbdtParams};
use btmodel::features::{extract_features, FeatureConfig, FeatureMatrix, Schema};
use btmodel::graph_core::Category;
use btmodel::inference::{fit_bta, fit_btea, utxo_value_ccdf, write_ccdf};
use btmodel::io::{parse_blocks, parse_labels, read_json, write_blocks, write_json, write_labels, LabelTable};
use btmodel::privacy::{
    simulate_attack, write_curves, AliasGeometry, AliasPartition, AliasSource, AttackAxis, AttackConfig,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

/// Block-stream simulation, fitting, privacy attacks and entity classification.
#[derive(Parser, Debug)]
#[command(name = "btmodel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a block stream (blocks.jsonl) and its labels (labels.csv).
    Simulate(SimulateArgs),
    /// Fit model parameters to a block stream.
    Fit(FitArgs),
    /// Curves of the fraction of hidden addresses an observer discovers.
    Attack(AttackArgs),
    /// Per-entity feature matrix.
    Features(FeaturesArgs),
    /// Train and evaluate the entity classifier.
    Classify(ClassifyArgs),
    /// Plot data derived from a block stream.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Address,
    Entity,
}

#[derive(Parser, Debug)]
struct SimulateArgs {
    /// ModelParams JSON; defaults are used when omitted.
    #[arg(long)]
    params: Option<PathBuf>,
    /// CategoryParams JSON for the entity model.
    #[arg(long)]
    cat_params: Option<PathBuf>,
    /// SubsetParams JSON.
    #[arg(long)]
    subset_params: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "entity")]
    model: ModelKind,
    #[arg(long, default_value_t = 40)]
    entities_per_category: u32,
    #[arg(long, default_value_t = 1000)]
    blocks: u64,
    /// Fail instead of minting boundary funds when inputs run out.
    #[arg(long)]
    no_auto_fund: bool,
    #[arg(long, env = "BTMODEL_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser, Debug)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Labels CSV; enables per-category fits.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the fitted ModelParams JSON here.
    #[arg(long)]
    params_out: Option<PathBuf>,
    /// Also write the fitted CategoryParams JSON here (needs labels).
    #[arg(long)]
    cat_params_out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AxisKind {
    /// Transactions of the attacked entity.
    Entity,
    /// Transactions of the whole chain.
    Chain,
}

#[derive(Parser, Debug)]
struct AttackArgs {
    #[arg(long)]
    cat_params: Option<PathBuf>,
    /// JSON map category -> {"sizes": [...], "probs": [...]}; random
    /// compositions per trial when omitted.
    #[arg(long)]
    aliases: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    n_aliases: usize,
    #[arg(long, default_value_t = 100)]
    n_addresses: usize,
    #[arg(long, default_value_t = 1000)]
    txs: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, value_enum, default_value = "entity")]
    axis: AxisKind,
    #[arg(long, default_value_t = 40)]
    entities_per_category: u32,
    #[arg(long, env = "BTMODEL_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser, Debug)]
struct FeaturesArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Labels CSV; without it entities are multi-input clusters.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Schema JSON; defaults to schema.json next to the output.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = FeatureConfig::default().motif_cap)]
    motif_cap: u64,
    #[arg(long, env = "BTMODEL_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Parser, Debug)]
struct ClassifyArgs {
    #[arg(long)]
    features: PathBuf,
    /// Schema JSON; defaults to schema.json next to the features.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = GbdtParams::default().n_rounds)]
    rounds: usize,
    #[arg(long, env = "BTMODEL_SEED", default_value_t = 0)]
    seed: u64,
    /// Classification report JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    confusion_out: Option<PathBuf>,
    #[arg(long)]
    importance_out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ReportCommand {
    /// 1 − CDF of output UTXO values, with log10 columns.
    UtxoCdf {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AliasSpec {
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

fn load_or_default<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => Ok(read_json(p)?),
        None => Ok(T::default()),
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

/// Creates missing parent directories of an output path.
fn ensure_parent(path: &Path) -> Result<&Path> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(path)
}

fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    Ok(write_json(ensure_parent(path)?, value)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let params: ModelParams = load_or_default(a.params.as_deref())?;
    let subset: SubsetParams = load_or_default(a.subset_params.as_deref())?;
    let model = match a.model {
        ModelKind::Address => {
            if a.cat_params.is_some() {
                bail!("--cat-params needs --model entity");
            }
            Model::address(params)
        }
        ModelKind::Entity => {
            let cats: CategoryParams = load_or_default(a.cat_params.as_deref())?;
            Model::entity(params, cats, EntityLayout::uniform(a.entities_per_category))
        }
    };
    let cfg = SimulationConfig { auto_fund: !a.no_auto_fund, ..SimulationConfig::new(a.blocks, a.seed) };
    let out = simulate_chain(model, subset, cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    write_blocks(create(&a.out.join("blocks.jsonl"))?, &out.blocks)?;
    if a.model == ModelKind::Entity {
        let labels = LabelTable::from_rows(out.labels)?;
        write_labels(create(&a.out.join("labels.csv"))?, &labels)?;
    }
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let blocks = parse_blocks(&a.input)?;
    let report = match &a.labels {
        Some(l) => fit_btea(&blocks, &parse_labels(l)?)?,
        None => fit_bta(&blocks)?,
    };
    save_json(&a.out, &report)?;
    if let Some(p) = &a.params_out {
        save_json(p, &report.model_params())?;
    }
    if let Some(p) = &a.cat_params_out {
        let cats = report.category_params().context("no labeled categories to write")?;
        save_json(p, &cats)?;
    }
    Ok(())
}

fn attack(a: AttackArgs) -> Result<()> {
    let cats: CategoryParams = load_or_default(a.cat_params.as_deref())?;
    let mut cfg = AttackConfig::new(a.txs, a.trials, a.seed);
    cfg.axis = match a.axis {
        AxisKind::Entity => AttackAxis::EntityTransactions,
        AxisKind::Chain => AttackAxis::ChainTransactions { entities_per_category: a.entities_per_category },
    };
    cfg.aliases = match &a.aliases {
        None => AliasSource::Random(AliasGeometry { n_aliases: a.n_aliases, n_addresses: a.n_addresses }),
        Some(path) => {
            let specs: BTreeMap<Category, AliasSpec> = read_json(path)?;
            let mut fixed = BTreeMap::new();
            for (c, s) in specs {
                let spec = cats.get(c).with_context(|| format!("{c} has aliases but no category parameters"))?;
                fixed.insert(c, AliasPartition::from_sizes(&s.sizes, s.probs, spec.lambda_in)?);
            }
            AliasSource::Fixed(fixed)
        }
    };
    let curves = simulate_attack(&cats, &cfg)?;
    write_curves(&curves, create(&a.out)?)?;
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let blocks = parse_blocks(&a.input)?;
    let labels = a.labels.as_deref().map(parse_labels).transpose()?;
    let cfg = FeatureConfig { motif_cap: a.motif_cap, motif_seed: a.seed, ..FeatureConfig::default() };
    let m = extract_features(&blocks, labels.as_ref(), &cfg)?;
    let schema = a.schema.unwrap_or_else(|| sibling(&a.out, "schema.json"));
    ensure_parent(&a.out)?;
    m.save(&a.out, ensure_parent(&schema)?)?;
    Ok(())
}

fn labeled_rows(m: FeatureMatrix) -> FeatureMatrix {
    let keep: Vec<usize> = (0..m.labels.len()).filter(|&i| m.labels[i] != Category::Unknown).collect();
    FeatureMatrix {
        entity_ids: keep.iter().map(|&i| m.entity_ids[i]).collect(),
        labels: keep.iter().map(|&i| m.labels[i]).collect(),
        rows: keep.iter().map(|&i| m.rows[i].clone()).collect(),
        columns: m.columns,
    }
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let schema_path = a.schema.clone().unwrap_or_else(|| sibling(&a.features, "schema.json"));
    let schema: Schema = read_json(&schema_path)?;
    let m = labeled_rows(FeatureMatrix::read_csv(&a.features, &schema.columns)?);
    if m.rows.is_empty() {
        bail!("{} has no labeled rows", a.features.display());
    }
    let (train, test, split) = split_train_test(&m, a.train_fraction, a.seed)?;
    let params = GbdtParams { n_rounds: a.rounds, ..GbdtParams::default() };
    let model = train_gbdt(&train, &params)?;
    let mut report = evaluate(&model, &test)?;
    report.split = Some(split);
    save_json(&a.out, &report)?;
    if let Some(p) = &a.model_out {
        fs::write(ensure_parent(p)?, model.to_json()).with_context(|| format!("cannot write {}", p.display()))?;
    }
    if let Some(p) = &a.confusion_out {
        report.write_confusion_csv(create(p)?)?;
    }
    if let Some(p) = &a.importance_out {
        save_json(p, &feature_importance_report(&model))?;
    }
    Ok(())
}

fn report(r: ReportCommand) -> Result<()> {
    match r {
        ReportCommand::UtxoCdf { input, out } => {
            let blocks = parse_blocks(&input)?;
            write_ccdf(&utxo_value_ccdf(&blocks), create(&out)?)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Attack(a) => attack(a),
        Command::Features(a) => features(a),
        Command::Classify(a) => classify(a),
        Command::Report(r) => report(r),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
