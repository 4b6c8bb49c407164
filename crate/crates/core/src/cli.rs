//! `bwa` command line: `bench`, `verify`, `trace` and `sort`.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::array::{BlackWhiteArray, GrowthPolicy, SearchResult};
use crate::bench::{self, BenchConfig, BenchOp, Configuration};
use crate::oracle::{self, EquivalenceConfig, OpMix, Verdict};

#[derive(Debug, Parser)]
#[command(name = "bwa", version, about = "Black-white array tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure amortized insert/search/delete cost and write CSV.
    Bench(BenchArgs),
    /// Replay a random operation sequence against a reference multiset.
    Verify(VerifyArgs),
    /// Replay an op script, printing the segments after each step.
    Trace(TraceArgs),
    /// Sort whitespace-separated integers from stdin.
    Sort,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..=40))]
    pub min_exp: u32,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..=40))]
    pub max_exp: u32,
    /// Comma-separated subset of insert,search,delete.
    #[arg(long, value_delimiter = ',', default_value = "insert,search,delete")]
    pub ops: Vec<BenchOp>,
    #[arg(long, value_enum, default_value_t = Configuration::Perfect)]
    pub config: Configuration,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 0.5, value_parser = parse_ratio)]
    pub hit_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Operations per measured batch.
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(1..))]
    pub probes: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Initial capacity exponent; the array grows as needed.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=40))]
    pub size_exp: u32,
    #[arg(long, default_value_t = 100_000)]
    pub ops: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5, value_parser = parse_ratio)]
    pub hit_ratio: f64,
    /// Operation weights, e.g. `insert=50,search=25,delete=25`.
    #[arg(long, default_value = "insert=50,search=25,delete=25", value_parser = parse_mix)]
    pub mix: OpMix,
    /// Check this many consecutive seeds starting at `--seed`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub script: PathBuf,
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is not in [0, 1]"))
    }
}

fn parse_mix(s: &str) -> Result<OpMix, String> {
    s.parse().map_err(|e: oracle::OracleError| e.to_string())
}

/// Parses `args` and runs the command. Returns the process exit status:
/// 0 on success, 1 on divergence or I/O failure, 2 on bad usage.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
                if !text.contains("Usage:") {
                    let _ = writeln!(stderr, "\n{}", Cli::command().render_usage());
                }
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Bench(a) => cmd_bench(a, stdout, stderr),
        Command::Verify(a) => cmd_verify(a, stdout),
        Command::Trace(a) => cmd_trace(a, stdout),
        Command::Sort => cmd_sort(stdin, stdout),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    }
}

type CmdResult = Result<i32, String>;

fn cmd_bench(a: BenchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    if a.min_exp > a.max_exp {
        let _ = writeln!(stderr, "error: --min-exp must not exceed --max-exp");
        return Ok(2);
    }
    let cfg = BenchConfig {
        min_exp: a.min_exp,
        max_exp: a.max_exp,
        ops: a.ops,
        config: a.config,
        trials: a.trials as usize,
        hit_ratio: a.hit_ratio,
        seed: a.seed,
        probes: a.probes as usize,
        min_batch: Duration::from_millis(1),
    };
    let sweep = bench::run(&cfg).map_err(|e| e.to_string())?;
    bench::write_csv(&sweep.rows, &a.out).map_err(|e| e.to_string())?;
    let io = |e: std::io::Error| e.to_string();
    writeln!(stdout, "{:>8} {:>7} {:>8} {:>12} {:>10}", "size", "op", "config", "ns/op", "cmp/op").map_err(io)?;
    for r in &sweep.rows {
        writeln!(
            stdout,
            "{:>8} {:>7} {:>8} {:>12.2} {:>10.2}",
            format!("2^{}", r.size_exp),
            r.op.to_string(),
            r.config.to_string(),
            r.ns_per_op,
            r.cmp_per_op
        )
        .map_err(io)?;
    }
    for f in &sweep.failures {
        let _ = writeln!(stderr, "failed: {} at 2^{}: {}", f.op, f.size_exp, f.reason);
    }
    Ok(if sweep.failures.is_empty() { 0 } else { 1 })
}

fn cmd_verify(a: VerifyArgs, stdout: &mut dyn Write) -> CmdResult {
    let cfg = EquivalenceConfig {
        seed: a.seed,
        n: a.ops,
        mix: a.mix,
        hit_ratio: a.hit_ratio,
        cap_exp: a.size_exp as usize,
    };
    let end = a.seed.checked_add(a.seeds).ok_or("seed range overflows")?;
    let verdicts = oracle::run_equivalence_many(&cfg, a.seed..end).map_err(|e| e.to_string())?;
    let mut code = 0;
    for (seed, v) in verdicts {
        match v {
            Verdict::Ok { steps } => {
                writeln!(stdout, "ok: seed {seed}, {steps} steps").map_err(|e| e.to_string())?
            }
            Verdict::Diverged(d) => {
                writeln!(stdout, "divergence: seed {seed}, {d}").map_err(|e| e.to_string())?;
                code = 1;
            }
        }
    }
    Ok(code)
}

/// One step of a trace script.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceOp {
    Insert(i64),
    Delete(i64),
    Search(i64),
}

/// Parses `insert V` / `delete V` / `search V` lines. Blank lines and
/// `#` comments are skipped.
pub fn parse_script(text: &str) -> Result<Vec<TraceOp>, String> {
    let mut ops = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let verb = words.next().unwrap_or_default();
        let err = || format!("line {}: expected `insert|delete|search <integer>`, got `{line}`", n + 1);
        let value: i64 = words.next().and_then(|w| w.parse().ok()).ok_or_else(err)?;
        if words.next().is_some() {
            return Err(err());
        }
        ops.push(match verb {
            "insert" => TraceOp::Insert(value),
            "delete" => TraceOp::Delete(value),
            "search" => TraceOp::Search(value),
            _ => return Err(err()),
        });
    }
    Ok(ops)
}

/// Replays `ops` and renders the trace: each op as `> op`, its result for
/// searches and deletes, then the segment dump.
pub fn render_trace(ops: &[TraceOp]) -> String {
    let mut a = BlackWhiteArray::new(4, GrowthPolicy::Grow).expect("nonzero capacity");
    let mut out = String::new();
    let result = |r: SearchResult| match r {
        SearchResult::Found(i) => format!("found at {i}\n"),
        SearchResult::Nil => "nil\n".to_string(),
    };
    for op in ops {
        match *op {
            TraceOp::Insert(v) => {
                out.push_str(&format!("> insert {v}\n"));
                a.insert(v).expect("growable array");
            }
            TraceOp::Delete(v) => {
                out.push_str(&format!("> delete {v}\n"));
                out.push_str(&result(a.delete(&v)));
            }
            TraceOp::Search(v) => {
                out.push_str(&format!("> search {v}\n"));
                out.push_str(&result(a.search(&v)));
            }
        }
        out.push_str(&a.dump());
    }
    out
}

fn cmd_trace(a: TraceArgs, stdout: &mut dyn Write) -> CmdResult {
    let text = std::fs::read_to_string(&a.script)
        .map_err(|e| format!("{}: {e}", a.script.display()))?;
    let ops = parse_script(&text).map_err(|e| format!("{}: {e}", a.script.display()))?;
    stdout.write_all(render_trace(&ops).as_bytes()).map_err(|e| e.to_string())?;
    Ok(0)
}

fn cmd_sort(stdin: &mut dyn Read, stdout: &mut dyn Write) -> CmdResult {
    let mut input = String::new();
    std::io::BufReader::new(stdin)
        .read_to_string(&mut input)
        .map_err(|e| format!("stdin: {e}"))?;
    let mut a = BlackWhiteArray::new(10, GrowthPolicy::Grow).expect("nonzero capacity");
    for word in input.split_whitespace() {
        let v: i64 = word.parse().map_err(|_| format!("not an integer: `{word}`"))?;
        a.insert(v).expect("growable array");
    }
    let mut w = std::io::BufWriter::new(stdout);
    let io = |e: std::io::Error| format!("stdout: {e}");
    for (i, v) in a.iter_sorted().enumerate() {
        if i > 0 {
            w.write_all(b" ").map_err(io)?;
        }
        write!(w, "{v}").map_err(io)?;
    }
    w.write_all(b"\n").map_err(io)?;
    w.flush().map_err(io)?;
    Ok(0)
}
