//! Command-line front end: schema, loading, queries, benchmarks, vacuum and
//! a TCP search worker.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use graphvec::bench::{self, BenchConfig};
use graphvec::dist::{self, Coordinator, Endpoint, LocalWorkers, Worker};
use graphvec::fixtures;
use graphvec::gvql::{parse, Engine, Outcome, Params, Statement};
use graphvec::index::IndexParams;
use graphvec::loader::{self, VectorFormat};
use graphvec::schema::{IndexKind, Metric};
use graphvec::storage::{Graph, GraphConfig};
use graphvec::vacuum::{self, VacuumPolicy};

/// Definitions (loading jobs, queries) kept between invocations.
const DEFS_FILE: &str = "definitions.gvql";
const SETTINGS_FILE: &str = "gv.json";

#[derive(Parser)]
#[command(
    name = "gv",
    version,
    about = "Property graph engine with vector search"
)]
struct Cli {
    /// Graph directory.
    #[arg(long, global = true, default_value = "gvdata")]
    data: PathBuf,
    /// Virtual partitions for distributed search.
    #[arg(long, global = true)]
    partitions: Option<usize>,
    /// Comma-separated worker addresses; `local` searches in this process.
    #[arg(long, global = true, value_delimiter = ',')]
    join: Vec<String>,
    /// Per-request timeout of distributed search, in milliseconds.
    #[arg(long, global = true, default_value_t = 5000)]
    timeout_ms: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Schema changes and definitions.
    Schema {
        #[command(subcommand)]
        cmd: SchemaCmd,
    },
    /// Load vertices and vectors.
    Load(LoadArgs),
    /// Run statements from a file; a file that only defines one query runs it.
    Query {
        #[arg(short = 'f', long)]
        file: Option<PathBuf>,
        #[arg(short = 'p', long)]
        params: Option<PathBuf>,
        /// Run this stored query instead of guessing.
        #[arg(long)]
        name: Option<String>,
    },
    /// Print the plan of a SELECT or of every block of a query.
    Explain {
        #[arg(short = 'f', long)]
        file: Option<PathBuf>,
        /// Inline text, used when no file is given.
        text: Option<String>,
    },
    /// Recall, throughput and latency benchmarks.
    Bench(BenchArgs),
    /// Delta and snapshot maintenance.
    Vacuum {
        #[command(subcommand)]
        cmd: VacuumCmd,
    },
    /// Serve search requests for coordinators.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7070")]
        listen: String,
        #[arg(long, default_value_t = 4)]
        threads: usize,
    },
}

#[derive(Subcommand)]
enum SchemaCmd {
    /// Apply DDL and store loading jobs and queries.
    Apply { file: PathBuf },
    /// Print the catalog as JSON.
    Show,
}

#[derive(Subcommand)]
enum VacuumCmd {
    Status,
    /// Flush every delta store and merge every pending file.
    Run,
}

#[derive(Args)]
struct LoadArgs {
    /// Run a stored loading job; bind its files with NAME=PATH.
    #[arg(long)]
    job: Option<String>,
    #[arg(value_name = "NAME=PATH")]
    files: Vec<String>,
    /// Load a .fvecs/.bvecs file into an embedding attribute.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    vertex: Option<String>,
    #[arg(long)]
    attr: Option<String>,
    /// Key of the first vector; the rest follow consecutively.
    #[arg(long, default_value_t = 0)]
    first_key: i64,
    /// Skip index building after the load.
    #[arg(long)]
    no_vacuum: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexArg {
    Hnsw,
    Flat,
}

#[derive(Args)]
struct BenchArgs {
    /// Base vectors (.fvecs/.bvecs); synthetic data when absent.
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    synthetic: usize,
    #[arg(long, default_value_t = 100)]
    nq: usize,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![16usize, 32, 64, 128, 256, 512])]
    ef: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = IndexArg::Hnsw)]
    index: IndexArg,
    #[arg(long, default_value_t = 16)]
    m: usize,
    #[arg(long, default_value_t = 128)]
    ef_construction: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Run the incremental-update versus rebuild sweep instead.
    #[arg(long)]
    update: bool,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0])]
    fractions: Vec<f64>,
    /// Write the CSV table here as well.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Bench(b) => bench_cmd(&cli, b),
        Cmd::Schema { cmd } => {
            let mut engine = open_engine(&cli)?;
            match cmd {
                SchemaCmd::Apply { file } => schema_apply(&cli, &mut engine, file),
                SchemaCmd::Show => {
                    println!("{}", engine.graph().catalog().to_json());
                    Ok(())
                }
            }
        }
        Cmd::Load(args) => load_cmd(&cli, args),
        Cmd::Query { file, params, name } => {
            query_cmd(&cli, file.as_deref(), params.as_deref(), name.as_deref())
        }
        Cmd::Explain { file, text } => {
            let engine = open_engine(&cli)?;
            let text = match (file, text) {
                (Some(f), _) => read(f)?,
                (None, Some(t)) => t.clone(),
                (None, None) => bail!("give a file with -f or the statement text"),
            };
            print!("{}", engine.explain(&text)?);
            Ok(())
        }
        Cmd::Vacuum { cmd } => {
            let engine = open_engine(&cli)?;
            let g = engine.graph();
            match cmd {
                VacuumCmd::Status => print_json(&serde_json::to_value(g.vacuum_status())?),
                VacuumCmd::Run => {
                    let r = vacuum::run_once(g, &VacuumPolicy::default(), true)?;
                    g.checkpoint()?;
                    print_json(&serde_json::to_value(r)?)
                }
            }
        }
        Cmd::Serve { listen, threads } => {
            let graph = open_graph(&cli)?;
            let listener =
                TcpListener::bind(listen).with_context(|| format!("binding {listen}"))?;
            let server = dist::serve(listener, Worker::new(graph), *threads)?;
            eprintln!("serving on {}", server.addr());
            server.wait();
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn print_json(v: &Json) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Settings {
    segment_capacity: usize,
}

fn open_graph(cli: &Cli) -> Result<Graph> {
    fs::create_dir_all(&cli.data).with_context(|| format!("creating {}", cli.data.display()))?;
    let settings_path = cli.data.join(SETTINGS_FILE);
    let settings: Settings = match fs::read_to_string(&settings_path) {
        Ok(s) => serde_json::from_str(&s).context("reading graph settings")?,
        Err(_) => {
            let s = Settings {
                segment_capacity: GraphConfig::default().segment_capacity,
            };
            fs::write(&settings_path, serde_json::to_string_pretty(&s)?)?;
            s
        }
    };
    let cfg = GraphConfig::default()
        .with_data_dir(&cli.data)
        .with_segment_capacity(settings.segment_capacity);
    Ok(Graph::open(cfg)?)
}

/// Opens the graph and re-registers stored loading jobs and queries.
fn open_engine(cli: &Cli) -> Result<Engine> {
    let graph = open_graph(cli)?;
    let mut engine = Engine::new(graph);
    engine.algorithms_mut().register("tg_louvain", |g, _| {
        Ok(graphvec::gvql::Val::Int(fixtures::label_propagation(g)?))
    });
    if let Ok(defs) = fs::read_to_string(cli.data.join(DEFS_FILE)) {
        engine
            .execute(&defs, &Params::new())
            .context("re-registering stored definitions")?;
    }
    Ok(engine)
}

fn schema_apply(cli: &Cli, engine: &mut Engine, file: &Path) -> Result<()> {
    let text = read(file)?;
    let script = parse(&text)?;
    let mut defs = String::new();
    for s in &script.statements {
        let outcome = engine.apply(&s.node, &Params::new())?;
        if matches!(s.node, Statement::LoadJob(_) | Statement::Procedure(_)) {
            defs.push_str(&s.node.to_string());
            defs.push('\n');
        }
        report(engine, outcome)?;
    }
    if !defs.is_empty() {
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(cli.data.join(DEFS_FILE))?;
        f.write_all(defs.as_bytes())?;
    }
    Ok(())
}

fn report(_engine: &Engine, outcome: Outcome) -> Result<()> {
    match outcome {
        Outcome::Applied(what) => eprintln!("applied {what}"),
        Outcome::Defined(what) => eprintln!("defined {what}"),
        Outcome::Plan(p) => print!("{p}"),
        Outcome::Result(j) => print_json(&j)?,
    }
    Ok(())
}

fn load_cmd(cli: &Cli, args: &LoadArgs) -> Result<()> {
    let engine = open_engine(cli)?;
    let g = engine.graph();
    let report = match (&args.job, &args.vectors) {
        (Some(job), None) => {
            let mut files = BTreeMap::new();
            for f in &args.files {
                let (name, path) = f
                    .split_once('=')
                    .ok_or_else(|| anyhow!("expected NAME=PATH, got `{f}`"))?;
                files.insert(name.to_string(), PathBuf::from(path));
            }
            engine.run_load_job(job, &files)?
        }
        (None, Some(path)) => {
            let vertex = args
                .vertex
                .as_deref()
                .ok_or_else(|| anyhow!("--vectors needs --vertex"))?;
            let attr = args
                .attr
                .as_deref()
                .ok_or_else(|| anyhow!("--vectors needs --attr"))?;
            let fmt = VectorFormat::from_path(path)
                .ok_or_else(|| anyhow!("{}: expected a .fvecs or .bvecs file", path.display()))?;
            let vectors = loader::read_vecs_file(path, fmt)?;
            loader::load_vectors(g, vertex, attr, &vectors, args.first_key)?
        }
        _ => bail!("give either --job with NAME=PATH files, or --vectors"),
    };
    if !args.no_vacuum {
        vacuum::run_once(g, &VacuumPolicy::default(), true)?;
    }
    g.checkpoint()?;
    print_json(&serde_json::to_value(report)?)
}

fn coordinator(
    cli: &Cli,
    graph: &Graph,
) -> Result<Option<(Arc<Coordinator>, Option<LocalWorkers>)>> {
    let timeout = Duration::from_millis(cli.timeout_ms);
    if !cli.join.is_empty() {
        let local = cli.join.iter().any(|a| a == "local");
        let workers = local.then(|| LocalWorkers::spawn(graph, 1, 2));
        let mut eps = Vec::new();
        for a in &cli.join {
            eps.push(if a == "local" {
                workers.as_ref().unwrap().endpoints().remove(0)
            } else {
                Endpoint::tcp(a.as_str()).with_context(|| format!("resolving {a}"))?
            });
        }
        return Ok(Some((
            Arc::new(Coordinator::new(eps).with_timeout(timeout)),
            workers,
        )));
    }
    match cli.partitions {
        Some(p) if p > 1 => {
            let w = LocalWorkers::spawn(graph, p, 2);
            Ok(Some((
                Arc::new(Coordinator::new(w.endpoints()).with_timeout(timeout)),
                Some(w),
            )))
        }
        _ => Ok(None),
    }
}

fn query_cmd(
    cli: &Cli,
    file: Option<&Path>,
    params: Option<&Path>,
    name: Option<&str>,
) -> Result<()> {
    let mut engine = open_engine(cli)?;
    let _workers = match coordinator(cli, engine.graph())? {
        Some((c, w)) => {
            engine = engine.with_coordinator(c);
            w
        }
        None => None,
    };
    let params: Params = match params {
        Some(p) => serde_json::from_str(&read(p)?).context("parameters must be a JSON object")?,
        None => Params::new(),
    };
    let text = match (file, name) {
        (Some(f), _) => read(f)?,
        (None, Some(_)) => String::new(),
        (None, None) => bail!("give a file with -f or a stored query with --name"),
    };
    let script = parse(&text)?;
    let mut defined = Vec::new();
    for s in &script.statements {
        if let Statement::Procedure(p) = &s.node {
            defined.push(p.name.clone());
        }
        let outcome = engine.apply(&s.node, &params)?;
        if !matches!(outcome, Outcome::Defined(_)) {
            report(&engine, outcome)?;
        }
    }
    let run = match name {
        Some(n) => Some(n.to_string()),
        None if defined.len() == 1 && script.statements.len() == 1 => defined.pop(),
        None => None,
    };
    if let Some(n) = run {
        for out in engine.run_query(&n, &params)? {
            print_json(&out)?;
        }
    }
    Ok(())
}

fn bench_cmd(cli: &Cli, b: &BenchArgs) -> Result<()> {
    let (base, queries) = match (&b.base, &b.queries) {
        (Some(bp), Some(qp)) => {
            let load = |p: &Path| -> Result<Vec<Vec<f32>>> {
                let fmt = VectorFormat::from_path(p)
                    .ok_or_else(|| anyhow!("{}: not .fvecs/.bvecs", p.display()))?;
                Ok(loader::read_vecs_file(p, fmt)?)
            };
            (load(bp)?, load(qp)?)
        }
        (None, None) => fixtures::sift_like_split(b.synthetic, b.nq, b.dim, b.seed),
        _ => bail!("--base and --queries go together"),
    };
    if b.update {
        let mut params = IndexParams::new(Metric::L2);
        params.m = b.m;
        params.ef_construction = b.ef_construction;
        let points = bench::update_bench(&base, &b.fractions, params, 3, b.seed)?;
        let csv = bench::update_csv(&points);
        if let Some(p) = &b.csv {
            fs::write(p, &csv)?;
        }
        print!("{csv}");
        return Ok(());
    }
    let cfg = BenchConfig {
        k: b.k,
        efs: b.ef.clone(),
        threads: b.threads,
        index: match b.index {
            IndexArg::Hnsw => IndexKind::Hnsw,
            IndexArg::Flat => IndexKind::Flat,
        },
        m: b.m,
        ef_construction: b.ef_construction,
        partitions: cli.partitions.unwrap_or(1),
        ..Default::default()
    };
    let report = bench::run_bench(&base, &queries, &cfg)?;
    if let Some(p) = &b.csv {
        fs::write(p, report.to_csv())?;
    }
    print_json(&json!(report))
}
