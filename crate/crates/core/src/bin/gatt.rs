use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gatt::attribution::{AttributionTable, Attributor, Method};
use gatt::datasets::{BaShapesConfig, DatasetBundle, GeneratorConfig, InfectionConfig};
use gatt::engine::{extract_attention, AttentionStack, GatModel};
use gatt::eval::{accuracy_experiment, run_faithfulness, Report};
use gatt::graph::{load_graph, Graph, NodeId};
use gatt::trainer::{init_model, train, Optimizer, TrainConfig};
use gatt::Error;

/// Edge attribution for graph attention networks.
#[derive(Parser)]
#[command(name = "gatt", version)]
struct Cli {
    /// Worker threads for parallel stages (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark dataset.
    Generate(GenerateArgs),
    /// Train an attention network on a generated dataset.
    Train(TrainArgs),
    /// Score edges for target nodes and write a CSV.
    Attribute(AttributeArgs),
    /// Run the faithfulness or accuracy experiment and write a JSON report.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetName {
    Infection,
    BaShapes,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    dataset: DatasetName,
    #[arg(long)]
    seed: u64,
    /// Output file; the JSON goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerName {
    Adam,
    Sgd,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset JSON written by `generate`.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Number of attention layers.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Per-head width of each hidden layer.
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// Heads in every layer (hidden layers concatenate, the last averages).
    #[arg(long, default_value_t = 1)]
    heads: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, value_enum, default_value_t = OptimizerName::Adam)]
    optimizer: OptimizerName,
    #[arg(long, default_value_t = 5e-4)]
    l2: f64,
    /// Parameters start uniform in ±init_scale/sqrt(fan_in).
    #[arg(long, default_value_t = 3f64.sqrt())]
    init_scale: f64,
    /// Per-epoch trace CSV [default: <out> with extension `trace.csv`].
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct AttributeArgs {
    /// Graph JSON (a generated dataset or any graph file).
    #[arg(long)]
    data: PathBuf,
    /// Trained model; attention is extracted on the self-looped graph.
    #[arg(long, required_unless_present = "attention", conflicts_with = "attention")]
    model: Option<PathBuf>,
    /// Precomputed attention stack JSON, used instead of a model.
    #[arg(long)]
    attention: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Comma-separated: gatt, gatt_sim, gatt_avg, avg_att, random.
    #[arg(long, default_value = "gatt")]
    methods: String,
    /// Comma-separated node indices, or `all`.
    #[arg(long, default_value = "all")]
    targets: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeName {
    Faithfulness,
    Accuracy,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeName,
    #[arg(long)]
    seed: u64,
    /// Report JSON path; the summary table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated: gatt, gatt_sim, gatt_avg, avg_att, random.
    #[arg(long, default_value = "gatt,gatt_sim,gatt_avg,avg_att,random")]
    methods: String,
    /// Random targets for the faithfulness sweep.
    #[arg(long, default_value_t = 100)]
    n_targets: usize,
    /// Per-pair CSV of scores and erasure effects (faithfulness only).
    #[arg(long)]
    raw: Option<PathBuf>,
}

fn parse_methods(s: &str) -> Result<Vec<Method>, Error> {
    let mut out: Vec<Method> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Validation("--methods is empty".into()));
    }
    Ok(out)
}

fn parse_targets(s: &str, graph: &Graph) -> Result<Vec<NodeId>, Error> {
    if s.trim() == "all" {
        return Ok((0..graph.num_nodes()).collect());
    }
    let mut out = Vec::new();
    for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let v = t
            .parse::<NodeId>()
            .map_err(|_| Error::Validation(format!("bad target {t:?}")))?;
        if v >= graph.num_nodes() {
            return Err(Error::NodeOutOfRange {
                node: v,
                num_nodes: graph.num_nodes(),
            });
        }
        out.push(v);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn require_file(path: &Path) -> Result<(), Error> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!("input file {} does not exist", path.display())))
    }
}

fn require_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Error::Validation(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Error> {
    if let Some(out) = &args.out {
        require_parent(out)?;
    }
    let config = match args.dataset {
        DatasetName::Infection => GeneratorConfig::Infection(InfectionConfig::new(args.seed)),
        DatasetName::BaShapes => GeneratorConfig::BaShapes(BaShapesConfig::new(args.seed)),
    };
    let bundle = config.generate()?;
    let g = bundle.graph();
    let summary = format!(
        "nodes: {}, directed edges: {}, classes: {}, ground-truth edges: {}",
        g.num_nodes(),
        g.num_edges(),
        g.num_classes().unwrap_or(0),
        g.ground_truth().map_or(0, |gt| gt.len())
    );
    match &args.out {
        Some(out) => {
            bundle.save(out)?;
            println!("{summary}");
            println!("wrote {}", out.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            // a closed pipe (`gatt generate | head`) is not an error
            match writeln!(out, "{}", bundle.to_json()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
                r => r.map_err(|source| Error::Io { path: "<stdout>".into(), source })?,
            }
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), Error> {
    require_file(&args.data)?;
    require_parent(&args.out)?;
    let trace_path = args
        .trace
        .clone()
        .unwrap_or_else(|| args.out.with_extension("trace.csv"));
    require_parent(&trace_path)?;
    if args.layers == 0 || args.hidden == 0 || args.heads == 0 || args.epochs == 0 {
        return Err(Error::Validation("--layers, --hidden, --heads and --epochs must be positive".into()));
    }
    let bundle = DatasetBundle::load(&args.data)?;
    let g = bundle.graph();
    let classes = g
        .num_classes()
        .ok_or_else(|| Error::MissingLabels("dataset has no labels".into()))?;
    let mut sizes = vec![g.feature_dim()];
    sizes.extend(std::iter::repeat_n(args.hidden, args.layers - 1));
    sizes.push(classes);
    let heads = vec![args.heads; args.layers];
    let cfg = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        l2_weight: args.l2,
        optimizer: match args.optimizer {
            OptimizerName::Adam => Optimizer::Adam,
            OptimizerName::Sgd => Optimizer::Sgd,
        },
        seed: args.seed,
        init_scale: args.init_scale,
        ..TrainConfig::default()
    };
    let init = init_model(args.seed, &sizes, &heads, args.init_scale)?;
    let (model, trace) = train(&init, &bundle, &cfg)?;
    model.save(&args.out)?;
    trace.save_csv(&trace_path)?;
    if let Some(last) = trace.last() {
        println!(
            "epoch {}: loss {:.4}, train acc {:.4}, val acc {:.4}",
            last.epoch, last.loss, last.train_acc, last.val_acc
        );
    }
    println!("wrote {} and {}", args.out.display(), trace_path.display());
    Ok(())
}

fn cmd_attribute(args: &AttributeArgs) -> Result<(), Error> {
    require_file(&args.data)?;
    for p in args.model.iter().chain(&args.attention) {
        require_file(p)?;
    }
    require_parent(&args.out)?;
    let methods = parse_methods(&args.methods)?;
    let graph = load_graph(&args.data)?;
    let targets = parse_targets(&args.targets, &graph)?;
    let (graph, stack) = match (&args.model, &args.attention) {
        (Some(model), _) => {
            let model = GatModel::load(model)?;
            let graph = graph.add_self_loops();
            let stack = extract_attention(&model, &graph)?;
            (graph, stack)
        }
        (None, Some(att)) => (graph, AttentionStack::load(att)?),
        (None, None) => unreachable!("clap requires one of --model and --attention"),
    };
    let attributor = Attributor::new(&stack, &graph)?;
    let table = AttributionTable::compute(&attributor, &targets, &methods, args.seed)?;
    table.save_csv(&args.out)?;
    println!("wrote {} rows to {}", table.len(), args.out.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Error> {
    require_file(&args.data)?;
    require_file(&args.model)?;
    for p in args.out.iter().chain(&args.raw) {
        require_parent(p)?;
    }
    let methods = parse_methods(&args.methods)?;
    let bundle = DatasetBundle::load(&args.data)?;
    let model = GatModel::load(&args.model)?;
    let mut report: Report = match args.mode {
        ModeName::Faithfulness => {
            let run = run_faithfulness(&model, &bundle, &methods, args.n_targets, args.seed)?;
            if let Some(raw) = &args.raw {
                run.save_raw_csv(raw)?;
            }
            run.report
        }
        ModeName::Accuracy => {
            if args.raw.is_some() {
                return Err(Error::Validation("--raw applies to faithfulness mode only".into()));
            }
            accuracy_experiment(&model, &bundle, &methods, args.seed)?.0
        }
    };
    report.config.model = Some(args.model.display().to_string());
    report.config.data = Some(args.data.display().to_string());
    print!("{}", report.summary());
    if let Some(out) = &args.out {
        report.save(out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Attribute(a) => cmd_attribute(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
