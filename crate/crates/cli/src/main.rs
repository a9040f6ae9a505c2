//! `multibias`: debias word embeddings and image features, and measure how
//! much bias survives.

mod output;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use multibias::bias_def::{
    default_definition, load_bias_definition, load_group_manifest, load_pair_manifest, quad_specs,
    BiasDefinition, BiasKind, DEFAULT_TEXT_KINDS, QUAD_LABELS,
};
use multibias::eval::{
    cluster_eval, project_2d, reports_to_csv, reports_to_table, ClusterEvalConfig,
};
use multibias::sentiment::{load_vad, valence_sequence};
use multibias::text_debias::{bias_direction, multi_debias, top_biased, DoubleHardParams};
use multibias::vectors::save_embeddings;
use multibias::visual::{visual_debias, VisualMethod};
use multibias::{derive_seed, EmbeddingSet, PairGroups, QuadGroups};

use output::{json, open, read_vectors, Outputs};

/// Sub-seed streams derived from `--seed`.
const STREAM_DOUBLE_HARD: u64 = 1;
const STREAM_EVAL: u64 = 2;

#[derive(Parser)]
#[command(
    name = "multibias",
    version,
    about = "Multi-bias debiasing for word embeddings and image features"
)]
struct Cli {
    /// Print progress messages
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove bias directions from vectors
    Debias {
        #[command(subcommand)]
        command: DebiasCommand,
    },
    /// Evaluate debiasing quality
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Export vectors for plotting
    Export {
        #[command(subcommand)]
        command: ExportCommand,
    },
    /// Sentiment lexicon lookups
    Lexicon {
        #[command(subcommand)]
        command: LexiconCommand,
    },
}

#[derive(Subcommand)]
enum DebiasCommand {
    /// Multi-bias Double-Hard Debias of a word embedding file
    Text(TextArgs),
    /// Visual Hard Debias and/or Projection Debias of image feature vectors
    Visual(VisualArgs),
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Top-N k-means clustering accuracy before and after debiasing
    Cluster(ClusterArgs),
}

#[derive(Subcommand)]
enum ExportCommand {
    /// Project vectors onto their top two principal components
    #[command(name = "2d")]
    TwoD(ExportArgs),
}

#[derive(Subcommand)]
enum LexiconCommand {
    /// Print the valence of each token
    Valence(ValenceArgs),
}

#[derive(Args, Serialize)]
struct BiasArgs {
    /// Directory of `<kind>.tsv` pair files (default: the shipped definitions)
    #[arg(long)]
    specs: Option<PathBuf>,
    /// Bias kinds in processing order
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TEXT_KINDS.map(String::from))]
    order: Vec<String>,
}

#[derive(Args, Serialize)]
struct TextArgs {
    /// Embedding file: one `token v1 v2 ...` line per word
    #[arg(long)]
    embeddings: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    bias: BiasArgs,
    /// Debiased embedding file to write
    #[arg(long)]
    out: PathBuf,
    /// JSON audit trace to write
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Leading principal components tried as frequency directions
    #[arg(long, default_value_t = 20)]
    k_candidates: usize,
    /// Words taken from each side of a bias direction for the candidate search
    #[arg(long, default_value_t = 500)]
    pool_per_pole: usize,
    /// Neutralize only; leave the defining words untouched
    #[arg(long)]
    skip_equalize: bool,
    /// k-means restarts per clustering
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Digits after the decimal point in the written vectors
    #[arg(long, default_value_t = 6)]
    precision: usize,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Hard,
    Projection,
    Both,
}

impl From<Method> for VisualMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Hard => VisualMethod::Hard,
            Method::Projection => VisualMethod::Projection,
            Method::Both => VisualMethod::Both,
        }
    }
}

#[derive(Args, Serialize)]
struct VisualArgs {
    /// Image feature file: one `image_id v1 v2 ...` line per image
    #[arg(long)]
    vectors: PathBuf,
    /// Matched-image manifest (`group<TAB>image_id`), needed by `hard` and `both`
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Feature file holding the manifest's images (default: --vectors)
    #[arg(long)]
    pair_vectors: Option<PathBuf>,
    /// Group manifest (`label<TAB>path`) naming female, male, young and old
    /// image files, needed by `projection` and `both`
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Both)]
    method: Method,
    /// Debiased feature file to write
    #[arg(long)]
    out: PathBuf,
    /// JSON file receiving the learned directions
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    precision: usize,
}

#[derive(Args, Serialize)]
struct ClusterArgs {
    /// Vectors before debiasing; bias directions and pools come from these
    #[arg(long)]
    before: PathBuf,
    /// Vectors after debiasing
    #[arg(long)]
    after: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    bias: BiasArgs,
    /// Pool sizes N (half from each side of the bias direction)
    #[arg(long, value_delimiter = ',', default_values_t = [100, 500, 1000])]
    tops: Vec<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// JSON report to write
    #[arg(long)]
    report: PathBuf,
    /// CSV report to write (`kind,n,before,after`)
    #[arg(long)]
    csv: Option<PathBuf>,
    /// 2D coordinates (`id,x,y`) of the debiased vectors selected at the
    /// largest N for the first bias kind
    #[arg(long)]
    points_2d: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExportArgs {
    #[arg(long)]
    vectors: PathBuf,
    /// File of tokens (whitespace separated) to keep; default keeps all
    #[arg(long)]
    tokens: Option<PathBuf>,
    /// CSV to write (`id,x,y`)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ValenceArgs {
    /// NRC VAD lexicon (`Word<TAB>Valence<TAB>Arousal<TAB>Dominance`)
    #[arg(long)]
    lexicon: PathBuf,
    /// Text file to tokenize on whitespace (instead of positional tokens)
    #[arg(long, conflicts_with = "tokens")]
    input: Option<PathBuf>,
    /// Output file (default: standard output)
    #[arg(long)]
    out: Option<PathBuf>,
    tokens: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Debias {
            command: DebiasCommand::Text(args),
        } => debias_text(&args),
        Command::Debias {
            command: DebiasCommand::Visual(args),
        } => debias_visual(&args),
        Command::Eval {
            command: EvalCommand::Cluster(args),
        } => eval_cluster(&args),
        Command::Export {
            command: ExportCommand::TwoD(args),
        } => export_2d(&args),
        Command::Lexicon {
            command: LexiconCommand::Valence(args),
        } => lexicon_valence(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Loads the definitions named by `--order`, from `--specs` when given.
fn load_definitions(bias: &BiasArgs) -> Result<Vec<BiasDefinition>> {
    if bias.order.is_empty() {
        bail!("--order names no bias kinds");
    }
    bias.order
        .iter()
        .map(|kind| match &bias.specs {
            Some(dir) => {
                let path = dir.join(format!("{kind}.tsv"));
                let kind = BiasKind::new(kind.as_str())?;
                load_bias_definition(kind, open(&path)?)
                    .with_context(|| format!("invalid bias definition `{}`", path.display()))
            }
            None => default_definition(kind).ok_or_else(|| {
                anyhow!(
                    "no shipped definition for `{kind}` (known: {}); pass --specs",
                    DEFAULT_TEXT_KINDS.join(", ")
                )
            }),
        })
        .collect()
}

fn embeddings_bytes(set: &EmbeddingSet, precision: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    save_embeddings(set, &mut buf, precision)?;
    Ok(buf)
}

fn debias_text(args: &TextArgs) -> Result<()> {
    let defs = load_definitions(&args.bias)?;
    let set = read_vectors(&args.embeddings)?;
    let params = DoubleHardParams {
        k_candidates: args.k_candidates,
        n_per_pole: args.pool_per_pole,
        kmeans_seed: derive_seed(args.seed, STREAM_DOUBLE_HARD),
        kmeans_restarts: args.restarts,
        skip_equalize: args.skip_equalize,
        ..DoubleHardParams::default()
    };
    let (debiased, traces) = multi_debias(&set, &defs, &params).map_err(|e| {
        let done: Vec<String> = e.completed.iter().map(|t| t.kind.to_string()).collect();
        let done = if done.is_empty() {
            String::new()
        } else {
            format!(" (completed: {})", done.join(", "))
        };
        anyhow!("{e}{done}")
    })?;

    #[derive(Serialize)]
    struct Trace<'a> {
        config: &'a TextArgs,
        params: DoubleHardParams,
        stages: Vec<multibias::text_debias::DebiasTrace>,
    }
    let mut outputs = Outputs::default();
    outputs.add(&args.out, &embeddings_bytes(&debiased, args.precision)?)?;
    outputs.add(
        &args.trace,
        &json(&Trace {
            config: args,
            params,
            stages: traces,
        })?,
    )?;
    outputs.commit()
}

fn load_quads(manifest: &Path) -> Result<QuadGroups> {
    let specs = load_group_manifest(open(manifest)?)
        .with_context(|| format!("invalid group manifest `{}`", manifest.display()))?;
    let specs = quad_specs(&specs).with_context(|| format!("in `{}`", manifest.display()))?;
    let base = manifest.parent().unwrap_or(Path::new(""));
    let sets = specs
        .iter()
        .map(|g| read_vectors(&base.join(&g.member_source)))
        .collect::<Result<Vec<_>>>()?;
    QuadGroups::from_sets([&sets[0], &sets[1], &sets[2], &sets[3]])
        .with_context(|| format!("in `{}`", manifest.display()))
}

fn debias_visual(args: &VisualArgs) -> Result<()> {
    let set = read_vectors(&args.vectors)?;
    let method = VisualMethod::from(args.method);
    let pairs = match (&args.pairs, method) {
        (None, VisualMethod::Projection) => None,
        (None, _) => bail!("--method {} needs --pairs", method_name(args.method)),
        (Some(path), _) => {
            let manifest = load_pair_manifest(open(path)?)
                .with_context(|| format!("invalid pair manifest `{}`", path.display()))?;
            let source = match &args.pair_vectors {
                Some(p) => read_vectors(p)?,
                None => set.clone(),
            };
            Some(
                PairGroups::from_manifest(&source, &manifest)
                    .with_context(|| format!("in pair manifest `{}`", path.display()))?,
            )
        }
    };
    let quads = match (&args.groups, method) {
        (None, VisualMethod::Hard) => None,
        (None, _) => bail!("--method {} needs --groups", method_name(args.method)),
        (Some(path), _) => Some(load_quads(path)?),
    };
    let (debiased, model) = visual_debias(&set, pairs.as_ref(), quads.as_ref(), method)
        .with_context(|| match &args.groups {
            Some(g) => format!("visual debias failed (groups from `{}`)", g.display()),
            None => "visual debias failed".to_string(),
        })?;

    let mut outputs = Outputs::default();
    outputs.add(&args.out, &embeddings_bytes(&debiased, args.precision)?)?;
    if let Some(path) = &args.model {
        #[derive(Serialize)]
        struct Model<'a> {
            config: &'a VisualArgs,
            hard_direction: Option<Vec<f64>>,
            quad_axes: Option<BTreeMap<&'static str, Vec<f64>>>,
        }
        let model = Model {
            config: args,
            hard_direction: model.hard_direction.map(|d| d.into_inner()),
            quad_axes: model.quad_axes.map(|axes| {
                QUAD_LABELS
                    .iter()
                    .copied()
                    .zip(axes.into_iter().map(|a| a.into_inner()))
                    .collect()
            }),
        };
        outputs.add(path, &json(&model)?)?;
    }
    outputs.commit()
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Hard => "hard",
        Method::Projection => "projection",
        Method::Both => "both",
    }
}

fn eval_cluster(args: &ClusterArgs) -> Result<()> {
    let defs = load_definitions(&args.bias)?;
    let before = read_vectors(&args.before)?;
    let after = read_vectors(&args.after)?;
    let cfg = ClusterEvalConfig {
        tops: args.tops.clone(),
        seed: derive_seed(args.seed, STREAM_EVAL),
        restarts: args.restarts,
        ..ClusterEvalConfig::text_default()
    };
    let reports = defs
        .iter()
        .map(|def| {
            cluster_eval(&before, &after, def, &cfg)
                .with_context(|| format!("evaluating bias `{}`", def.kind))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut outputs = Outputs::default();
    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a ClusterArgs,
        eval: &'a ClusterEvalConfig,
        reports: &'a [multibias::eval::ClusterReport],
    }
    outputs.add(
        &args.report,
        &json(&Report {
            config: args,
            eval: &cfg,
            reports: &reports,
        })?,
    )?;
    if let Some(path) = &args.csv {
        outputs.add(path, reports_to_csv(&reports).as_bytes())?;
    }
    if let Some(path) = &args.points_2d {
        let n = *cfg.tops.iter().max().expect("validated non-empty");
        let dir = bias_direction(&before, &defs[0])?;
        let (pos, neg) = top_biased(&before, &dir, n / 2)?;
        let indices = pos
            .iter()
            .chain(&neg)
            .map(|t| {
                after
                    .index_of(t)
                    .ok_or_else(|| anyhow!("`{t}` is missing from `{}`", args.after.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        let projection = project_2d(&after.subset(&indices)?)?;
        outputs.add(path, projection.to_csv().as_bytes())?;
    }
    outputs.commit()?;
    print!("{}", reports_to_table(&reports));
    Ok(())
}

fn export_2d(args: &ExportArgs) -> Result<()> {
    let mut set = read_vectors(&args.vectors)?;
    if let Some(path) = &args.tokens {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read `{}`", path.display()))?;
        let indices = text
            .split_whitespace()
            .map(|t| {
                set.index_of(t)
                    .ok_or_else(|| anyhow!("`{t}` is missing from `{}`", args.vectors.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        set = set.subset(&indices)?;
    }
    let projection = project_2d(&set)?;
    let mut outputs = Outputs::default();
    outputs.add(&args.out, projection.to_csv().as_bytes())?;
    outputs.commit()
}

fn lexicon_valence(args: &ValenceArgs) -> Result<()> {
    let lex = load_vad(open(&args.lexicon)?)
        .with_context(|| format!("invalid lexicon `{}`", args.lexicon.display()))?;
    let tokens: Vec<String> = match &args.input {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("cannot read `{}`", path.display()))?
            .split_whitespace()
            .map(String::from)
            .collect(),
        None => args.tokens.clone(),
    };
    let mut text = String::new();
    for (token, v) in tokens.iter().zip(valence_sequence(&tokens, &lex)) {
        text.push_str(&format!("{token}\t{v:.3}\n"));
    }
    match &args.out {
        Some(path) => {
            let mut outputs = Outputs::default();
            outputs.add(path, text.as_bytes())?;
            outputs.commit()
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}
