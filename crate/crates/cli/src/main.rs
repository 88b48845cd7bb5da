use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use treesched::bench::{self, BenchConfig, BenchError};
use treesched::bounds::{bounds_report, critical_path};
use treesched::generators::GenSpec;
use treesched::sequential::optimal_postorder;
use treesched::simulator::evaluate_against;
use treesched::transforms::{eliminate_execution_files, normalize_for_memory_limit};
use treesched::{Heuristic, TaskTree};

const DID_NOT_RUN: u8 = 2;
const INPUT_ERROR: u8 = 1;

#[derive(Parser)]
#[command(name = "treesched", version, about = "Memory-aware scheduling of task trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a tree file parses and is a single in-tree.
    Validate { tree: PathBuf },
    /// Print size, work and memory statistics as JSON.
    Stats { tree: PathBuf },
    /// Print makespan and memory-time lower bounds as JSON.
    Bounds {
        tree: PathBuf,
        #[arg(short = 'p', long = "processors")]
        p: usize,
    },
    /// Schedule a tree with one heuristic and report makespan and peak memory.
    Schedule(ScheduleArgs),
    /// Remove execution files, and optionally turn the tree into a reduction tree.
    Transform {
        tree: PathBuf,
        #[arg(long)]
        reduction: bool,
        /// Write the node mapping (transformed id, original id or 0).
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a tree from one of the built-in families.
    Generate(GenerateArgs),
    /// Run a benchmark described by a TOML configuration.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct ScheduleArgs {
    tree: PathBuf,
    #[arg(long)]
    heuristic: Heuristic,
    #[arg(short = 'p', long = "processors")]
    p: usize,
    /// Absolute memory limit.
    #[arg(long, conflicts_with = "mem_ratio")]
    mem: Option<u64>,
    /// Memory limit as a multiple of the optimal postorder peak.
    #[arg(long)]
    mem_ratio: Option<f64>,
    #[arg(long)]
    emit_schedule: Option<PathBuf>,
    /// Write the memory trace as CSV.
    #[arg(long)]
    emit_trace: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    family: String,
    #[arg(short = 'p', long)]
    p: Option<usize>,
    #[arg(short = 'k', long)]
    k: Option<u64>,
    #[arg(short = 'm', long)]
    m: Option<usize>,
    /// Comma-separated integers for np3p.
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<u64>>,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(short = 'c', long)]
    c: Option<usize>,
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    mem: Option<u64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    max_degree: Option<usize>,
    #[arg(long)]
    depth_bias: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl GenerateArgs {
    fn spec(&self) -> Result<GenSpec> {
        let mut obj = Map::new();
        obj.insert("family".into(), json!(self.family));
        let mut put = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                obj.insert(key.into(), v);
            }
        };
        put("p", self.p.map(|v| json!(v)));
        put("k", self.k.map(|v| json!(v)));
        put("m", self.m.map(|v| json!(v)));
        put("a", self.a.as_ref().map(|v| json!(v)));
        put("delta", self.delta.map(|v| json!(v)));
        put("c", self.c.map(|v| json!(v)));
        put("len", self.len.map(|v| json!(v)));
        put("mem", self.mem.map(|v| json!(v)));
        put("nodes", self.nodes.map(|v| json!(v)));
        put("max_degree", self.max_degree.map(|v| json!(v)));
        put("depth_bias", self.depth_bias.map(|v| json!(v)));
        put("seed", self.seed.map(|v| json!(v)));
        serde_json::from_value(Value::Object(obj)).with_context(|| format!("invalid parameters for family {:?}", self.family))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(INPUT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { tree } => {
            let t = read_tree(&tree)?;
            println!("ok: {} nodes, {} leaves", t.len(), t.leaf_count());
        }
        Command::Stats { tree } => print_json(&stats(&read_tree(&tree)?)),
        Command::Bounds { tree, p } => {
            let t = read_tree(&tree)?;
            let report = bounds_report(&t, p).map_err(|_| anyhow::anyhow!("processor count must be at least 1"))?;
            print_json(&serde_json::to_value(report)?);
        }
        Command::Schedule(args) => return schedule(args),
        Command::Transform {
            tree,
            reduction,
            map,
            output,
        } => {
            let t = read_tree(&tree)?;
            let (out, m) = if reduction {
                normalize_for_memory_limit(&t)
            } else {
                eliminate_execution_files(&t)
            };
            write_or_print(output.as_deref(), &out.to_text())?;
            if let Some(path) = map {
                write_file(&path, &m.to_text())?;
            }
        }
        Command::Generate(args) => {
            let spec = args.spec()?;
            let t = spec.build()?;
            write_or_print(args.output.as_deref(), &t.to_text_with_header(&spec.header_lines()))?;
        }
        Command::Bench { config } => {
            let cfg = BenchConfig::load(&config)?;
            let report = bench::run_bench(&cfg)?;
            write_file(&cfg.output, &(report.to_json() + "\n"))?;
            write_file(&cfg.csv_path(), &report.csv_string())?;
            for s in &report.summary {
                println!(
                    "{:<34} runs {:>6}  success {:>6.3}  best-mem {:>6.3}  best-makespan {:>6.3}",
                    s.heuristic.name(),
                    s.runs,
                    s.success_rate,
                    s.best_memory_share,
                    s.best_makespan_share
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn schedule(args: ScheduleArgs) -> Result<ExitCode> {
    let t = read_tree(&args.tree)?;
    if args.p == 0 {
        bail!("processor count must be at least 1");
    }
    let reference = optimal_postorder(&t).1;
    let limit = match (args.mem, args.mem_ratio) {
        (Some(m), _) => Some(m),
        (None, Some(x)) if x.is_finite() && x > 0.0 => Some(bench::memory_limit(x, reference)),
        (None, Some(x)) => bail!("invalid memory ratio {x}"),
        (None, None) => None,
    };
    match (args.heuristic.is_memory_limited(), limit) {
        (true, None) => bail!("{} needs --mem or --mem-ratio", args.heuristic),
        (false, Some(_)) => bail!("{} does not take a memory limit", args.heuristic),
        _ => {}
    }
    let mut out = json!({
        "heuristic": args.heuristic,
        "p": args.p,
        "mem_ratio": args.mem_ratio,
        "mem_limit": limit,
    });
    let sched = match bench::schedule_original(&t, args.heuristic, args.p, limit) {
        Ok(s) => s,
        Err(e @ BenchError::DidNotRun { .. }) => {
            out["status"] = json!("did-not-run");
            out["reason"] = json!(e.to_string());
            print_json(&out);
            eprintln!("{e}");
            return Ok(ExitCode::from(DID_NOT_RUN));
        }
        Err(e) => return Err(e.into()),
    };
    let report = evaluate_against(&t, &sched, reference).map_err(|v| anyhow::anyhow!("infeasible schedule: {v:?}"))?;
    out["status"] = json!("ok");
    out["makespan"] = json!(report.makespan);
    out["peak_memory"] = json!(report.peak_memory);
    out["norm_makespan"] = json!(report.normalized_makespan);
    out["norm_memory"] = json!(report.normalized_memory);
    out["bounds"] = serde_json::to_value(bounds_report(&t, args.p).expect("p checked"))?;
    if let Some(path) = &args.emit_schedule {
        write_file(path, &sched.to_text())?;
    }
    if let Some(path) = &args.emit_trace {
        let mut text = String::from("time,memory,high_water\n");
        for point in &report.trace {
            text.push_str(&format!("{},{},{}\n", point.time, point.memory, point.high_water));
        }
        write_file(path, &text)?;
    }
    print_json(&out);
    Ok(ExitCode::SUCCESS)
}

fn stats(t: &TaskTree) -> Value {
    let (_, peak) = optimal_postorder(t);
    let mut height = vec![1usize; t.len()];
    for v in t.top_down() {
        if let Some(parent) = t.parent(v) {
            height[v.index()] = height[parent.index()] + 1;
        }
    }
    json!({
        "nodes": t.len(),
        "leaves": t.leaf_count(),
        "height": height.iter().max().copied().unwrap_or(0),
        "max_children": t.ids().map(|v| t.children(v).len()).max().unwrap_or(0),
        "total_time": t.total_time(),
        "critical_path": critical_path(t),
        "postorder_peak": peak,
        "reduction_tree": t.is_reduction_tree(),
        "exec_files": t.has_exec_files(),
    })
}

fn read_tree(path: &Path) -> Result<TaskTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TaskTree::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value"));
}
