//! The `cqfd` command line.
//!
//! Exit codes: 0 success, 2 bad input (parse errors, schema errors, data
//! violating the dependencies), 3 capability mismatch (the query's class
//! does not support the request), 4 internal invariant breach.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use cqfd_core::enumerate::oracle_evaluate;
use cqfd_core::extension::{classify, extend_query, ExtensionStep, Tier, Verdict, Witness};
use cqfd_core::hardness::{boolean_product, compute_reduction_sets, gen_matmul_instance, gen_tetra_instance};
use cqfd_core::hypergraph::{Hypergraph, JoinTree, PseudoMinorOp, TraceShape};
use cqfd_core::instance::{validate_dependencies, Instance};
use cqfd_core::transform::sigma_forward;
use cqfd_core::{Error, Query, Schema};
use serde_json::json;
use thiserror::Error;

use crate::corpus::{random_matrix, rng};
use crate::io::{self, AnswerFormat, AnswerWriter, IoError};
use crate::profile::{measure_delay_profile, time_enumeration};

#[derive(Debug, Parser)]
#[command(name = "cqfd", version, about = "Conjunctive queries under functional dependencies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extend the query with its dependencies and classify it.
    Classify {
        #[command(flatten)]
        input: QueryArgs,
        /// Also print extension steps and join trees.
        #[arg(long)]
        explain: bool,
    },
    /// Print the answers of the query over an instance.
    Enumerate {
        #[command(flatten)]
        input: QueryArgs,
        /// Directory of `<relation>.csv` files, or a JSON instance file.
        #[arg(long)]
        data: PathBuf,
        /// Stop after this many answers.
        #[arg(long)]
        limit: Option<usize>,
        /// Write timing statistics as JSON to stderr.
        #[arg(long)]
        stats: bool,
        /// Use the backtracking evaluator (any query class).
        #[arg(long)]
        oracle: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: AnswerFormat,
    },
    /// Check an instance against the dependencies.
    Validate {
        #[command(flatten)]
        input: QueryArgs,
        #[arg(long)]
        data: PathBuf,
    },
    /// Measure preprocessing time and delay on growing seeded instances.
    Bench {
        #[command(flatten)]
        input: QueryArgs,
        /// Instance sizes in tuples.
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Also write `profile.json` here.
        #[arg(long, env = "CQFD_OUT")]
        out: Option<PathBuf>,
    },
    /// Generate derived queries and hard instances.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Write the extended query and its dependencies, and with `--data`
    /// the instance mapped onto the extended query.
    FdExtend {
        #[command(flatten)]
        input: QueryArgs,
        /// Instance of the original query to transform (needs `--out`).
        #[arg(long, requires = "out")]
        data: Option<PathBuf>,
        /// Output directory (stdout if absent).
        #[arg(long, env = "CQFD_OUT")]
        out: Option<PathBuf>,
    },
    /// Encode two random Boolean matrices as an instance of the extended
    /// query (acyclic, not free-connex queries).
    Matmul {
        #[command(flatten)]
        input: QueryArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        density: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, env = "CQFD_OUT")]
        out: PathBuf,
    },
    /// Encode a hypergraph as an instance of the extended query whose
    /// answer says whether it contains Tetra(k) (cyclic queries, unary
    /// dependencies).
    Tetra {
        #[command(flatten)]
        input: QueryArgs,
        /// JSON hypergraph `{"vertices": [...], "edges": [[...], ...]}`.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, env = "CQFD_OUT")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// File holding the query, e.g. `Q(x, y) :- R(x, z), S(z, y).`
    #[arg(long)]
    pub query: PathBuf,
    /// File with one dependency per line, e.g. `R : 1 -> 2` or `R : 1 -> 2 @ 3`.
    #[arg(long)]
    pub deps: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Io { stage: &'static str, source: IoError },
    #[error("{stage}: {source}")]
    Core { stage: &'static str, source: Error },
    #[error("{stage}: {message}")]
    Input { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Capability { stage: &'static str, message: String },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Schema(_) | Error::Precondition(_) => 2,
        Error::Usage(_) | Error::Structure(_) | Error::Unsupported(_) => 3,
        Error::Internal(_) => 4,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { source, .. } => source.core().map_or(2, core_exit_code),
            CliError::Core { source, .. } => core_exit_code(source),
            CliError::Input { .. } => 2,
            CliError::Capability { .. } => 3,
            CliError::Output(e) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
            CliError::Output(_) => 4,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn at<T>(stage: &'static str, r: Result<T, Error>) -> CliResult<T> {
    r.map_err(|source| CliError::Core { stage, source })
}

fn io_at<T>(stage: &'static str, r: Result<T, IoError>) -> CliResult<T> {
    r.map_err(|source| CliError::Io { stage, source })
}

fn load(input: &QueryArgs) -> CliResult<(Query, Schema)> {
    let q = io_at("reading query", io::read_query(&input.query))?;
    let s = io_at("reading dependencies", io::read_schema(&q, input.deps.as_deref()))?;
    Ok((q, s))
}

fn load_data(path: &Path, q: &Query) -> CliResult<Instance> {
    if !path.exists() {
        return Err(CliError::Input { stage: "reading data", message: format!("{} does not exist", path.display()) });
    }
    io_at("reading data", io::read_instance(path, q))
}

/// Parses `args` and runs the command, writing to `out` and `err`; returns
/// the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            if code != 0 {
                let _ = writeln!(err, "error: {e}");
            }
            code
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    match cmd {
        Command::Classify { input, explain } => cmd_classify(&input, explain, out),
        Command::Enumerate { input, data, limit, stats, oracle, format } => {
            cmd_enumerate(&input, &data, limit, stats, oracle, format, out, err)
        }
        Command::Validate { input, data } => cmd_validate(&input, &data, out),
        Command::Bench { input, sizes, seed, repeats, out: dir } => {
            cmd_bench(&input, &sizes, seed, repeats, dir.as_deref(), out)
        }
        Command::Gen(GenCommand::FdExtend { input, data, out: dir }) => {
            cmd_fd_extend(&input, data.as_deref(), dir.as_deref(), out)
        }
        Command::Gen(GenCommand::Matmul { input, n, density, seed, out: dir }) => {
            cmd_matmul(&input, n, density, seed, &dir, out)
        }
        Command::Gen(GenCommand::Tetra { input, graph, out: dir }) => cmd_tetra(&input, &graph, &dir, out),
    }
}

fn atom_label(q: &Query, id: usize) -> String {
    q.atoms().get(id).map_or_else(|| "head".to_string(), |a| a.to_string())
}

fn join_tree_lines(q: &Query, t: &JoinTree) -> Vec<String> {
    if t.links().is_empty() {
        return t.nodes().iter().map(|&n| format!("    {}", atom_label(q, n))).collect();
    }
    t.links().iter().map(|&(a, b)| format!("    {} — {}", atom_label(q, a), atom_label(q, b))).collect()
}

fn step_line(v: &Verdict, st: &ExtensionStep) -> String {
    let deps = v.extension.original_schema.deps();
    let q = &v.extension.original;
    let lhs = |l: &BTreeSet<cqfd_core::Var>| l.iter().map(|x| x.name()).collect::<Vec<_>>().join(", ");
    match st {
        ExtensionStep::Atom { atom, dep, source, lhs: l, added, fresh } => {
            let mut s = format!(
                "atom {} ({}) gains {added}: {{{}}} -> {added} by [{}] on atom {}",
                atom + 1,
                q.atoms()[*atom].relation,
                lhs(l),
                deps[*dep],
                source + 1
            );
            for (k, f) in fresh {
                s.push_str(&format!("; atom {} gains fresh {f}", k + 1));
            }
            s
        }
        ExtensionStep::Head { dep, source, lhs: l, added } => {
            format!("head gains {added}: {{{}}} -> {added} by [{}] on atom {}", lhs(l), deps[*dep], source + 1)
        }
    }
}

fn cmd_classify(input: &QueryArgs, explain: bool, out: &mut dyn Write) -> CliResult<i32> {
    let (q, s) = load(input)?;
    let v = at("classify", classify(&q, &s))?;
    let plus = &v.extension.extended;
    writeln!(out, "query: {q}")?;
    let deps = s.deps_text();
    writeln!(out, "dependencies:{}", if deps.is_empty() { " none" } else { "" })?;
    for line in deps.lines() {
        writeln!(out, "    {line}")?;
    }
    writeln!(out, "extended query: {plus}")?;
    let ext_deps = v.extension.schema.deps_text();
    writeln!(out, "extended dependencies:{}", if ext_deps.is_empty() { " none" } else { "" })?;
    for line in ext_deps.lines() {
        writeln!(out, "    {line}")?;
    }
    writeln!(out, "verdict: {}", v.summary())?;
    match &v.witness {
        Witness::FreeConnex { join_tree, with_head } => {
            writeln!(out, "witness: join tree of the extended query{}", if with_head.is_some() { " plus head" } else { "" })?;
            if explain {
                for l in join_tree_lines(plus, with_head.as_ref().unwrap_or(join_tree)) {
                    writeln!(out, "{l}")?;
                }
            }
        }
        Witness::HeadPath { path, join_tree } => {
            writeln!(out, "witness: head-path {path}")?;
            if explain {
                writeln!(out, "join tree:")?;
                for l in join_tree_lines(plus, join_tree) {
                    writeln!(out, "{l}")?;
                }
            }
        }
        Witness::PseudoMinor(trace) => {
            let shape = match trace.shape {
                TraceShape::CliqueRemoval => "vertex and edge removals",
                TraceShape::CycleContraction => "removals and edge contractions",
            };
            writeln!(out, "witness: Tetra({}) pseudo-minor by {shape} ({} operations)", trace.k, trace.ops.len())?;
            if explain {
                for op in &trace.ops {
                    writeln!(out, "    {}", op_text(plus, op))?;
                }
            }
        }
    }
    writeln!(out, "applicability: {}", v.complexity.applicability)?;
    if explain {
        writeln!(out, "extension steps:{}", if v.extension.steps.is_empty() { " none" } else { "" })?;
        for st in &v.extension.steps {
            writeln!(out, "    {}", step_line(&v, st))?;
        }
    }
    Ok(0)
}

fn op_text(q: &Query, op: &PseudoMinorOp) -> String {
    match op {
        PseudoMinorOp::RemoveEdge { edge, container } => {
            format!("remove edge of {} (inside {})", atom_label(q, *edge), atom_label(q, *container))
        }
        other => other.to_string(),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_enumerate(
    input: &QueryArgs,
    data: &Path,
    limit: Option<usize>,
    stats: bool,
    oracle: bool,
    format: AnswerFormat,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<i32> {
    let (q, s) = load(input)?;
    let inst = load_data(data, &q)?;
    let bad = validate_dependencies(&inst, &s);
    if !bad.is_empty() {
        let first = bad[0].describe(inst.symbols());
        return Err(CliError::Input {
            stage: "enumerate",
            message: format!("the data violates {} dependency group(s), e.g. {first}", bad.len()),
        });
    }
    let v = at("classify", classify(&q, &s))?;
    if oracle {
        let mut writer = AnswerWriter::new(&mut *out, format, q.head())?;
        if v.tier != Tier::FdFreeConnex {
            log::warn!("{}; answering with the backtracking evaluator", v.summary());
        }
        let start = Instant::now();
        let answers = at("enumerate", oracle_evaluate(&q, &inst))?;
        let mut n = 0;
        for a in answers.iter().take(limit.unwrap_or(usize::MAX)) {
            writer.write(a, inst.symbols())?;
            n += 1;
        }
        writer.finish()?;
        if stats {
            let doc = json!({ "engine": "oracle", "total_nanos": start.elapsed().as_nanos() as u64, "answers": n });
            writeln!(err, "{doc}")?;
        }
        return Ok(0);
    }
    if v.tier != Tier::FdFreeConnex {
        return Err(CliError::Capability {
            stage: "enumerate",
            message: format!("{} — constant-delay enumeration needs an FD-free-connex query; use --oracle", v.summary()),
        });
    }
    let mut writer = AnswerWriter::new(&mut *out, format, q.head())?;
    let mut failure: Option<std::io::Error> = None;
    let run = at(
        "enumerate",
        time_enumeration(&q, &s, &inst, limit, |a, symbols| {
            if failure.is_none() {
                if let Err(e) = writer.write(a, symbols) {
                    failure = Some(e);
                }
            }
        }),
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    writer.finish()?;
    if stats {
        let engine = if s.all_fds() { "constant-delay" } else { "constant-delay+dedup" };
        writeln!(err, "{}", run.to_json(engine))?;
    }
    Ok(0)
}

fn cmd_validate(input: &QueryArgs, data: &Path, out: &mut dyn Write) -> CliResult<i32> {
    let (q, s) = load(input)?;
    let inst = load_data(data, &q)?;
    let bad = validate_dependencies(&inst, &s);
    if bad.is_empty() {
        writeln!(out, "ok: {} tuples satisfy {} dependencies", inst.total_tuples(), s.deps().len())?;
        return Ok(0);
    }
    for v in &bad {
        writeln!(out, "violation: {}", v.describe(inst.symbols()))?;
    }
    writeln!(out, "{} violation(s)", bad.len())?;
    Ok(2)
}

fn cmd_bench(
    input: &QueryArgs,
    sizes: &[usize],
    seed: u64,
    repeats: usize,
    dir: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let (q, s) = load(input)?;
    let v = at("classify", classify(&q, &s))?;
    if v.tier != Tier::FdFreeConnex {
        return Err(CliError::Capability {
            stage: "bench",
            message: format!("{} — only FD-free-connex queries have a constant-delay engine", v.summary()),
        });
    }
    let profile = at("bench", measure_delay_profile(&q, &s, sizes, seed, repeats))?;
    let doc = profile.to_json();
    writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("JSON values serialize"))?;
    if let Some(dir) = dir {
        io_at("bench", io::create_dir(dir))?;
        io_at("bench", io::write_text(&dir.join("profile.json"), &format!("{doc:#}\n")))?;
    }
    Ok(0)
}

fn write_extension(dir: &Path, plus: &Query, schema: &Schema) -> CliResult<()> {
    io_at("gen", io::create_dir(dir))?;
    io_at("gen", io::write_text(&dir.join("extended.query"), &format!("{plus}\n")))?;
    io_at("gen", io::write_text(&dir.join("extended.deps"), &schema.deps_text()))?;
    Ok(())
}

fn write_manifest(dir: &Path, doc: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(doc).expect("JSON values serialize");
    io_at("gen", io::write_text(&dir.join("manifest.json"), &format!("{text}\n")))
}

fn cmd_fd_extend(input: &QueryArgs, data: Option<&Path>, dir: Option<&Path>, out: &mut dyn Write) -> CliResult<i32> {
    let (q, s) = load(input)?;
    let ext = at("gen fd-extend", extend_query(&q, &s))?;
    let transformed = match data {
        Some(path) => Some(at("gen fd-extend", sigma_forward(&load_data(path, &q)?, &ext))?),
        None => None,
    };
    match dir {
        Some(dir) => {
            write_extension(dir, &ext.extended, &ext.schema)?;
            match &transformed {
                Some(inst) => {
                    io_at("gen fd-extend", io::write_instance_csv(&dir.join("instance"), inst))?;
                    writeln!(out, "wrote {} ({} tuples)", dir.display(), inst.total_tuples())?;
                }
                None => writeln!(out, "wrote {}", dir.display())?,
            }
        }
        None => {
            writeln!(out, "{}", ext.extended)?;
            write!(out, "{}", ext.schema.deps_text())?;
        }
    }
    Ok(0)
}

fn names(set: &BTreeSet<cqfd_core::Var>) -> Vec<&str> {
    set.iter().map(|v| v.name()).collect()
}

fn cmd_matmul(input: &QueryArgs, n: usize, density: f64, seed: u64, dir: &Path, out: &mut dyn Write) -> CliResult<i32> {
    if !(0.0..=1.0).contains(&density) {
        return Err(CliError::Input { stage: "gen matmul", message: format!("density {density} is not in [0, 1]") });
    }
    let (q, s) = load(input)?;
    let v = at("classify", classify(&q, &s))?;
    let Witness::HeadPath { path, .. } = &v.witness else {
        return Err(CliError::Capability {
            stage: "gen matmul",
            message: format!("{} — the matrix encoding needs an acyclic query that is not free-connex", v.summary()),
        });
    };
    let (plus, schema) = (&v.extension.extended, &v.extension.schema);
    let sets = at("gen matmul", compute_reduction_sets(plus, schema, path))?;
    let mut r = rng(seed);
    let a = random_matrix(&mut r, n, density);
    let b = random_matrix(&mut r, n, density);
    let inst = at("gen matmul", gen_matmul_instance(plus, schema, path, &sets, &a, &b))?;
    write_extension(dir, plus, schema)?;
    io_at("gen matmul", io::write_instance_csv(&dir.join("instance"), &inst))?;
    let product = boolean_product(&a, &b);
    let partition: serde_json::Map<String, serde_json::Value> =
        sets.partition.iter().map(|(k, p)| (atom_label(plus, *k), json!(p.to_string()))).collect();
    let doc = json!({
        "command": "gen matmul",
        "query": q.to_string(),
        "extended_query": plus.to_string(),
        "head_path": path.vars().iter().map(|v| v.name()).collect::<Vec<_>>(),
        "sets": {
            "Vx": names(&sets.vx), "Vy": names(&sets.vy), "Vz": names(&sets.vz),
            "sep_x": atom_label(plus, sets.sep_x), "sep_y": atom_label(plus, sets.sep_y),
            "partition": partition,
        },
        "n": n, "density": density, "seed": seed,
        "a": a, "b": b,
        "product_nonzeros": product.len(),
        "tuples": inst.total_tuples(),
    });
    write_manifest(dir, &doc)?;
    writeln!(out, "wrote {} ({} tuples, {} product entries)", dir.display(), inst.total_tuples(), product.len())?;
    Ok(0)
}

fn cmd_tetra(input: &QueryArgs, graph: &Path, dir: &Path, out: &mut dyn Write) -> CliResult<i32> {
    let (q, s) = load(input)?;
    let g: Hypergraph = io_at("reading graph", io::read_hypergraph(graph))?;
    let v = at("classify", classify(&q, &s))?;
    let Witness::PseudoMinor(trace) = &v.witness else {
        return Err(CliError::Capability {
            stage: "gen tetra",
            message: format!("{} — the Tetra(k) encoding needs a cyclic query", v.summary()),
        });
    };
    let (plus, schema) = (&v.extension.extended, &v.extension.schema);
    let inst = at("gen tetra", gen_tetra_instance(plus, schema, trace, &g))?;
    let contains = at("gen tetra", g.contains_sub_tetra(trace.k))?;
    write_extension(dir, plus, schema)?;
    io_at("gen tetra", io::write_instance_csv(&dir.join("instance"), &inst))?;
    let doc = json!({
        "command": "gen tetra",
        "query": q.to_string(),
        "extended_query": plus.to_string(),
        "k": trace.k,
        "trace": trace.ops.iter().map(|op| op_text(plus, op)).collect::<Vec<_>>(),
        "graph": io::hypergraph_json(&g),
        "contains_tetra": contains,
        "tuples": inst.total_tuples(),
    });
    write_manifest(dir, &doc)?;
    writeln!(out, "wrote {} ({} tuples; graph contains Tetra({}): {contains})", dir.display(), inst.total_tuples(), trace.k)?;
    Ok(0)
}
