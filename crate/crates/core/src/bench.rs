//! Amortized-cost measurement of insert, search and delete.
//!
//! Two configurations are measured. In a *perfect* configuration the slot
//! count is exactly `2^m`, so there is a single active segment. In a
//! *random* configuration the slot count is drawn uniformly from
//! `[1, 2^m - 1]` and results are averaged over many such states.
//!
//! Values and probes are generated before the clock starts, and allocation
//! happens outside the timed region too. Stored values are even; guaranteed
//! misses are odd. Every timed region runs on the calling thread.

use std::fmt;
use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{BlackWhiteArray, GrowthPolicy};
use crate::BwaError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Configuration {
    Perfect,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BenchOp {
    Insert,
    Search,
    Delete,
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Configuration::Perfect => "perfect",
            Configuration::Random => "random",
        })
    }
}

impl fmt::Display for BenchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchOp::Insert => "insert",
            BenchOp::Search => "search",
            BenchOp::Delete => "delete",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub min_exp: u32,
    pub max_exp: u32,
    pub ops: Vec<BenchOp>,
    pub config: Configuration,
    /// Random configurations averaged per size.
    pub trials: usize,
    pub hit_ratio: f64,
    pub seed: u64,
    /// Search or delete operations per measured batch.
    pub probes: usize,
    /// Batches repeat until at least this much time has been measured.
    pub min_batch: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            min_exp: 10,
            max_exp: 20,
            ops: vec![BenchOp::Insert, BenchOp::Search, BenchOp::Delete],
            config: Configuration::Perfect,
            trials: 1000,
            hit_ratio: 0.5,
            seed: 0,
            probes: 1024,
            min_batch: Duration::from_millis(1),
        }
    }
}

impl BenchConfig {
    pub fn check(&self) -> Result<(), BenchError> {
        let bad = |s: String| Err(BenchError::Config(s));
        if self.min_exp < 1 || self.min_exp > self.max_exp {
            return bad(format!("need 1 <= min_exp <= max_exp, got {}..{}", self.min_exp, self.max_exp));
        }
        if self.max_exp > 40 {
            return bad(format!("max_exp {} is beyond any realistic memory", self.max_exp));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.probes == 0 {
            return bad("probes must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.hit_ratio) {
            return bad(format!("hit ratio {} outside [0, 1]", self.hit_ratio));
        }
        Ok(())
    }
}

/// One measurement: mean wall time and mean comparisons per operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size_exp: u32,
    pub op: BenchOp,
    pub config: Configuration,
    pub hit_ratio: f64,
    pub ns_per_op: f64,
    pub cmp_per_op: f64,
}

/// A size that could not be measured, typically for lack of memory.
#[derive(Clone, Debug, PartialEq)]
pub struct SizeFailure {
    pub size_exp: u32,
    pub op: BenchOp,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sweep {
    pub rows: Vec<BenchRow>,
    pub failures: Vec<SizeFailure>,
}

impl Sweep {
    fn extend(&mut self, other: Sweep) {
        self.rows.extend(other.rows);
        self.failures.extend(other.failures);
    }
}

fn rng_for(seed: u64, size_exp: u32, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(size_exp) << 32));
    rng.set_stream(stream);
    rng
}

fn stored_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<i32> {
    (0..n).map(|_| rng.random::<i32>() & !1).collect()
}

/// `count` probes: about `hit_ratio` of them taken from `present` (without
/// replacement when there are enough), the rest odd and so absent.
fn probes(rng: &mut ChaCha8Rng, present: &[i32], count: usize, hit_ratio: f64) -> Vec<i32> {
    let hits = if present.is_empty() { 0 } else { (count as f64 * hit_ratio).round() as usize };
    let mut out = Vec::with_capacity(count);
    if hits <= present.len() {
        out.extend(index::sample(rng, present.len(), hits).iter().map(|i| present[i]));
    } else {
        out.extend((0..hits).map(|_| present[rng.random_range(0..present.len())]));
    }
    out.extend((hits..count).map(|_| rng.random::<i32>() | 1));
    out.shuffle(rng);
    out
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per-op nanoseconds and comparisons for one measured state.
struct Measured {
    ns_per_op: f64,
    cmp_per_op: f64,
}

fn measure_search(a: &BlackWhiteArray<i32>, probes: &[i32], min_batch: Duration) -> Measured {
    let before = a.counters().comparisons;
    let mut elapsed = Duration::ZERO;
    let mut reps = 0u64;
    while reps == 0 || elapsed < min_batch {
        let t = Instant::now();
        for p in probes {
            black_box(a.search(black_box(p)));
        }
        elapsed += t.elapsed();
        reps += 1;
    }
    let ops = reps * probes.len() as u64;
    Measured {
        ns_per_op: elapsed.as_nanos() as f64 / ops as f64,
        cmp_per_op: (a.counters().comparisons - before) as f64 / ops as f64,
    }
}

/// Each batch runs on a fresh copy of `a`, so every delete sees the
/// intended size.
fn measure_delete(a: &BlackWhiteArray<i32>, probes: &[i32], min_batch: Duration) -> Measured {
    let mut scratch = a.clone();
    let mut elapsed = Duration::ZERO;
    let mut reps = 0u64;
    let mut comparisons = 0u64;
    while reps == 0 || elapsed < min_batch {
        scratch.clone_from(a);
        scratch.reset_counters();
        let t = Instant::now();
        for p in probes {
            black_box(scratch.delete(black_box(p)));
        }
        elapsed += t.elapsed();
        comparisons += scratch.counters().comparisons;
        reps += 1;
    }
    let ops = reps * probes.len() as u64;
    Measured {
        ns_per_op: elapsed.as_nanos() as f64 / ops as f64,
        cmp_per_op: comparisons as f64 / ops as f64,
    }
}

/// Times the insertion of `2^m` pre-generated values into a fresh array,
/// for every `m` in the configured range.
pub fn run_insert_bench(cfg: &BenchConfig) -> Result<Sweep, BenchError> {
    cfg.check()?;
    let mut sweep = Sweep::default();
    for m in cfg.min_exp..=cfg.max_exp {
        match insert_one(cfg, m) {
            Ok(row) => sweep.rows.push(row),
            Err(e) => sweep.failures.push(SizeFailure {
                size_exp: m,
                op: BenchOp::Insert,
                reason: e.to_string(),
            }),
        }
    }
    Ok(sweep)
}

fn insert_one(cfg: &BenchConfig, m: u32) -> Result<BenchRow, BwaError> {
    let n = 1usize << m;
    let mut rng = rng_for(cfg.seed, m, 0);
    let mut values = Vec::new();
    values.try_reserve_exact(n).map_err(|_| BwaError::Alloc { slots: n })?;
    values.extend(stored_values(&mut rng, n));

    let mut elapsed = Duration::ZERO;
    let mut reps = 0u64;
    let mut comparisons = 0;
    while reps == 0 || elapsed < cfg.min_batch {
        let mut a = BlackWhiteArray::new(m as usize + 1, GrowthPolicy::Fixed)?;
        let t = Instant::now();
        for &v in &values {
            a.insert(v)?;
        }
        elapsed += t.elapsed();
        black_box(&a);
        comparisons = a.counters().comparisons;
        reps += 1;
    }
    Ok(BenchRow {
        size_exp: m,
        op: BenchOp::Insert,
        config: cfg.config,
        hit_ratio: cfg.hit_ratio,
        ns_per_op: elapsed.as_nanos() as f64 / (reps * n as u64) as f64,
        cmp_per_op: comparisons as f64 / n as f64,
    })
}

/// Measures search and/or delete (whichever of them `cfg.ops` lists) in the
/// configured configuration for every size.
pub fn run_probe_bench(cfg: &BenchConfig) -> Result<Sweep, BenchError> {
    cfg.check()?;
    let ops: Vec<BenchOp> = cfg.ops.iter().copied().filter(|&op| op != BenchOp::Insert).collect();
    let mut sweep = Sweep::default();
    if ops.is_empty() {
        return Ok(sweep);
    }
    for m in cfg.min_exp..=cfg.max_exp {
        let result = match cfg.config {
            Configuration::Perfect => probe_perfect(cfg, m, &ops),
            Configuration::Random => probe_random(cfg, m, &ops),
        };
        match result {
            Ok(rows) => sweep.rows.extend(rows),
            Err(e) => sweep.failures.extend(ops.iter().map(|&op| SizeFailure {
                size_exp: m,
                op,
                reason: e.to_string(),
            })),
        }
    }
    Ok(sweep)
}

/// Runs every operation listed in `cfg.ops`.
pub fn run(cfg: &BenchConfig) -> Result<Sweep, BenchError> {
    let mut sweep = Sweep::default();
    if cfg.ops.contains(&BenchOp::Insert) {
        sweep.extend(run_insert_bench(cfg)?);
    }
    sweep.extend(run_probe_bench(cfg)?);
    sweep.rows.sort_by_key(|r| (r.size_exp, cfg.ops.iter().position(|&o| o == r.op)));
    Ok(sweep)
}

fn row(cfg: &BenchConfig, m: u32, op: BenchOp, ns: f64, cmp: f64) -> BenchRow {
    BenchRow {
        size_exp: m,
        op,
        config: cfg.config,
        hit_ratio: cfg.hit_ratio,
        ns_per_op: ns,
        cmp_per_op: cmp,
    }
}

fn measure(op: BenchOp, a: &BlackWhiteArray<i32>, probes: &[i32], min_batch: Duration) -> Measured {
    match op {
        BenchOp::Delete => measure_delete(a, probes, min_batch),
        _ => measure_search(a, probes, min_batch),
    }
}

fn probe_perfect(cfg: &BenchConfig, m: u32, ops: &[BenchOp]) -> Result<Vec<BenchRow>, BwaError> {
    let n = 1usize << m;
    let mut rng = rng_for(cfg.seed, m, 1);
    let values = stored_values(&mut rng, n);
    let mut a = BlackWhiteArray::new(m as usize + 1, GrowthPolicy::Fixed)?;
    for &v in &values {
        a.insert(v)?;
    }
    debug_assert_eq!(a.active_ranks().count(), 1);
    let probes = probes(&mut rng, &values, cfg.probes, cfg.hit_ratio);
    Ok(ops
        .iter()
        .map(|&op| {
            let r = measure(op, &a, &probes, cfg.min_batch);
            row(cfg, m, op, r.ns_per_op, r.cmp_per_op)
        })
        .collect())
}

/// The trial slot counts are sorted and reached by inserting into a single
/// array, so each state costs only the inserts since the previous one.
fn probe_random(cfg: &BenchConfig, m: u32, ops: &[BenchOp]) -> Result<Vec<BenchRow>, BwaError> {
    let n = 1usize << m;
    let mut rng = rng_for(cfg.seed, m, 2);
    if n < 2 {
        return Err(BwaError::ZeroCapacity);
    }
    let mut totals: Vec<usize> = (0..cfg.trials).map(|_| rng.random_range(1..n)).collect();
    totals.sort_unstable();
    let values = stored_values(&mut rng, n - 1);
    let mut a = BlackWhiteArray::new(m as usize, GrowthPolicy::Fixed)?;
    let mut filled = 0;
    let mut ns = vec![Vec::with_capacity(cfg.trials); ops.len()];
    let mut cmp = vec![Vec::with_capacity(cfg.trials); ops.len()];
    for &t in &totals {
        for &v in &values[filled..t] {
            a.insert(v)?;
        }
        filled = t;
        let probes = probes(&mut rng, &values[..t], cfg.probes, cfg.hit_ratio);
        for (k, &op) in ops.iter().enumerate() {
            let r = measure(op, &a, &probes, cfg.min_batch);
            ns[k].push(r.ns_per_op);
            cmp[k].push(r.cmp_per_op);
        }
    }
    Ok(ops
        .iter()
        .enumerate()
        .map(|(k, &op)| row(cfg, m, op, mean(&ns[k]), mean(&cmp[k])))
        .collect())
}

/// Writes `size_exp,op,config,hit_ratio,ns_per_op,cmp_per_op` plus one line
/// per row.
pub fn write_csv(rows: &[BenchRow], path: &Path) -> Result<(), BenchError> {
    let csv_err = |source| BenchError::Csv { path: path.to_owned(), source };
    let file = std::fs::File::create(path)
        .map_err(|source| BenchError::Io { path: path.to_owned(), source })?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(["size_exp", "op", "config", "hit_ratio", "ns_per_op", "cmp_per_op"])
        .map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| BenchError::Io { path: path.to_owned(), source })
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchRow>, BenchError> {
    let csv_err = |source| BenchError::Csv { path: path.to_owned(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}
