//! Model-based checking: a reference sorted multiset, a seeded operation
//! generator, and a runner that replays the same operations against a
//! [`BlackWhiteArray`] and the model, validating after every step.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Bound, RangeInclusive};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::array::{BlackWhiteArray, BoundSide, GrowthPolicy, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid operation weights: {0}")]
    InvalidWeights(String),
    #[error("hit ratio {0} outside [0, 1]")]
    InvalidHitRatio(f64),
    #[error("empty value domain")]
    EmptyDomain,
}

/// Sorted multiset kept as value -> multiplicity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReferenceModel<T: Ord> {
    counts: BTreeMap<T, usize>,
    len: usize,
}

impl<T: Ord + Clone> ReferenceModel<T> {
    pub fn new() -> Self {
        ReferenceModel { counts: BTreeMap::new(), len: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, v: T) {
        *self.counts.entry(v).or_default() += 1;
        self.len += 1;
    }

    pub fn contains(&self, v: &T) -> bool {
        self.counts.contains_key(v)
    }

    /// Removes one occurrence. Returns whether `v` was present.
    pub fn remove_one(&mut self, v: &T) -> bool {
        let Some(c) = self.counts.get_mut(v) else { return false };
        *c -= 1;
        if *c == 0 {
            self.counts.remove(v);
        }
        self.len -= 1;
        true
    }

    pub fn extreme(&self, side: Side) -> Option<&T> {
        match side {
            Side::Min => self.counts.keys().next(),
            Side::Max => self.counts.keys().next_back(),
        }
    }

    pub fn extract(&mut self, side: Side) -> Option<T> {
        let v = self.extreme(side)?.clone();
        self.remove_one(&v);
        Some(v)
    }

    pub fn bound(&self, v: &T, side: BoundSide) -> Option<&T> {
        match side {
            BoundSide::Lower => self.counts.range((Bound::Excluded(v), Bound::Unbounded)).next(),
            BoundSide::Upper => self.counts.range(..v).next_back(),
        }
        .map(|(k, _)| k)
    }

    pub fn interval(&self, lo: &T, hi: &T) -> Vec<T> {
        if lo > hi {
            return Vec::new();
        }
        self.counts
            .range(lo..=hi)
            .flat_map(|(k, &c)| std::iter::repeat_n(k.clone(), c))
            .collect()
    }

    pub fn to_sorted_vec(&self) -> Vec<T> {
        self.counts
            .iter()
            .flat_map(|(k, &c)| std::iter::repeat_n(k.clone(), c))
            .collect()
    }
}

/// One generated workload operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpRecord {
    Insert(i32),
    Search(i32),
    Delete(i32),
    ExtractMin,
    ExtractMax,
    Bound(i32, BoundSide),
    /// Always `lo <= hi`.
    Interval(i32, i32),
}

impl fmt::Display for OpRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpRecord::Insert(v) => write!(f, "insert {v}"),
            OpRecord::Search(v) => write!(f, "search {v}"),
            OpRecord::Delete(v) => write!(f, "delete {v}"),
            OpRecord::ExtractMin => f.write_str("extract-min"),
            OpRecord::ExtractMax => f.write_str("extract-max"),
            OpRecord::Bound(v, BoundSide::Lower) => write!(f, "lower-bound {v}"),
            OpRecord::Bound(v, BoundSide::Upper) => write!(f, "upper-bound {v}"),
            OpRecord::Interval(lo, hi) => write!(f, "interval {lo} {hi}"),
        }
    }
}

/// Relative weights of each operation kind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpMix {
    pub insert: f64,
    pub search: f64,
    pub delete: f64,
    pub extract_min: f64,
    pub extract_max: f64,
    pub bound: f64,
    pub interval: f64,
}

impl OpMix {
    const NAMES: [&'static str; 7] =
        ["insert", "search", "delete", "extract-min", "extract-max", "bound", "interval"];

    pub const fn zero() -> Self {
        OpMix {
            insert: 0.0,
            search: 0.0,
            delete: 0.0,
            extract_min: 0.0,
            extract_max: 0.0,
            bound: 0.0,
            interval: 0.0,
        }
    }

    /// 50% insert, 25% search, 25% delete.
    pub const fn standard() -> Self {
        OpMix { insert: 50.0, search: 25.0, delete: 25.0, ..Self::zero() }
    }

    pub const fn insert_only() -> Self {
        OpMix { insert: 1.0, ..Self::zero() }
    }

    /// Every kind, inserts slightly dominant so the structure grows.
    pub const fn everything() -> Self {
        OpMix {
            insert: 40.0,
            search: 15.0,
            delete: 20.0,
            extract_min: 5.0,
            extract_max: 5.0,
            bound: 10.0,
            interval: 5.0,
        }
    }

    fn weights(&self) -> [f64; 7] {
        [
            self.insert,
            self.search,
            self.delete,
            self.extract_min,
            self.extract_max,
            self.bound,
            self.interval,
        ]
    }

    fn slot_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "insert" => &mut self.insert,
            "search" => &mut self.search,
            "delete" => &mut self.delete,
            "extract-min" => &mut self.extract_min,
            "extract-max" => &mut self.extract_max,
            "bound" => &mut self.bound,
            "interval" => &mut self.interval,
            _ => return None,
        })
    }

    pub fn check(&self) -> Result<(), OracleError> {
        let w = self.weights();
        if let Some((i, x)) = w.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
            return Err(OracleError::InvalidWeights(format!("{} = {x}", Self::NAMES[i])));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(OracleError::InvalidWeights("all weights are zero".into()));
        }
        Ok(())
    }
}

impl std::str::FromStr for OpMix {
    type Err = OracleError;

    /// Parses `insert=50,search=25,delete=25`. Unlisted kinds get weight 0.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut mix = OpMix::zero();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, w) = part
                .split_once('=')
                .ok_or_else(|| OracleError::InvalidWeights(format!("expected kind=weight, got `{part}`")))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| OracleError::InvalidWeights(format!("bad weight `{w}`")))?;
            *mix.slot_mut(name.trim())
                .ok_or_else(|| OracleError::InvalidWeights(format!("unknown kind `{name}`")))? = w;
        }
        mix.check()?;
        Ok(mix)
    }
}

/// Seeded operation sequence over the full `i32` range.
pub fn generate_ops(
    seed: u64,
    n: usize,
    mix: &OpMix,
    hit_ratio: f64,
) -> Result<Vec<OpRecord>, OracleError> {
    generate_ops_in(seed, n, mix, hit_ratio, i32::MIN..=i32::MAX)
}

/// Like [`generate_ops`], drawing fresh values from `domain`. A narrow
/// domain produces duplicates.
///
/// Search, delete and bound operands come from the history of inserted
/// values with probability `hit_ratio` (once any value has been inserted),
/// otherwise they are fresh.
pub fn generate_ops_in(
    seed: u64,
    n: usize,
    mix: &OpMix,
    hit_ratio: f64,
    domain: RangeInclusive<i32>,
) -> Result<Vec<OpRecord>, OracleError> {
    mix.check()?;
    if !(0.0..=1.0).contains(&hit_ratio) {
        return Err(OracleError::InvalidHitRatio(hit_ratio));
    }
    if domain.is_empty() {
        return Err(OracleError::EmptyDomain);
    }
    let kinds = WeightedIndex::new(mix.weights())
        .map_err(|e| OracleError::InvalidWeights(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history: Vec<i32> = Vec::new();
    let mut ops = Vec::with_capacity(n);

    let operand = |rng: &mut ChaCha8Rng, history: &[i32]| -> i32 {
        if !history.is_empty() && rng.random_bool(hit_ratio) {
            history[rng.random_range(0..history.len())]
        } else {
            rng.random_range(domain.clone())
        }
    };

    for _ in 0..n {
        let op = match kinds.sample(&mut rng) {
            0 => {
                let v = rng.random_range(domain.clone());
                history.push(v);
                OpRecord::Insert(v)
            }
            1 => OpRecord::Search(operand(&mut rng, &history)),
            2 => OpRecord::Delete(operand(&mut rng, &history)),
            3 => OpRecord::ExtractMin,
            4 => OpRecord::ExtractMax,
            5 => {
                let side = if rng.random_bool(0.5) { BoundSide::Lower } else { BoundSide::Upper };
                OpRecord::Bound(operand(&mut rng, &history), side)
            }
            _ => {
                let a = operand(&mut rng, &history);
                let b = operand(&mut rng, &history);
                OpRecord::Interval(a.min(b), a.max(b))
            }
        };
        ops.push(op);
    }
    Ok(ops)
}

/// The surface the equivalence runner drives.
pub trait Subject {
    fn insert(&mut self, v: i32) -> Result<(), String>;
    fn search(&self, v: i32) -> bool;
    fn delete(&mut self, v: i32) -> bool;
    fn extract(&mut self, side: Side) -> Option<i32>;
    fn extreme(&self, side: Side) -> Option<i32>;
    fn bound(&self, v: i32, side: BoundSide) -> Option<i32>;
    fn interval(&self, lo: i32, hi: i32) -> Vec<i32>;
    fn sorted(&self) -> Vec<i32>;
    fn validate(&self) -> Result<(), Vec<String>>;
}

impl Subject for BlackWhiteArray<i32> {
    fn insert(&mut self, v: i32) -> Result<(), String> {
        BlackWhiteArray::insert(self, v).map_err(|e| e.to_string())
    }

    fn search(&self, v: i32) -> bool {
        self.contains(&v)
    }

    fn delete(&mut self, v: i32) -> bool {
        BlackWhiteArray::delete(self, &v).is_found()
    }

    fn extract(&mut self, side: Side) -> Option<i32> {
        BlackWhiteArray::extract(self, side)
    }

    fn extreme(&self, side: Side) -> Option<i32> {
        BlackWhiteArray::extreme(self, side).copied()
    }

    fn bound(&self, v: i32, side: BoundSide) -> Option<i32> {
        BlackWhiteArray::bound(self, &v, side).copied()
    }

    fn interval(&self, lo: i32, hi: i32) -> Vec<i32> {
        BlackWhiteArray::interval(self, &lo, &hi)
            .map(|it| it.copied().collect())
            .unwrap_or_default()
    }

    fn sorted(&self) -> Vec<i32> {
        self.iter_sorted().copied().collect()
    }

    fn validate(&self) -> Result<(), Vec<String>> {
        BlackWhiteArray::validate(self).map_err(|v| v.iter().map(ToString::to_string).collect())
    }
}

/// First point where the subject and the model disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    /// Index of the offending operation; equals the sequence length for a
    /// mismatch found in the final drain.
    pub step: usize,
    pub op: Option<OpRecord>,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.op {
            Some(op) => write!(f, "step {} ({op})", self.step)?,
            None => write!(f, "final drain after {} steps", self.step)?,
        }
        write!(f, ": expected {}, got {}", self.expected, self.actual)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Ok { steps: usize },
    Diverged(Divergence),
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceConfig {
    pub seed: u64,
    pub n: usize,
    pub mix: OpMix,
    pub hit_ratio: f64,
    pub cap_exp: usize,
}

/// Generates the sequence for `cfg` and replays it against a fresh
/// growable array.
pub fn run_equivalence(cfg: &EquivalenceConfig) -> Result<Verdict, OracleError> {
    let ops = generate_ops(cfg.seed, cfg.n, &cfg.mix, cfg.hit_ratio)?;
    let mut subject = BlackWhiteArray::new(cfg.cap_exp.max(1), GrowthPolicy::Grow)
        .map_err(|e| OracleError::InvalidWeights(e.to_string()))?;
    Ok(replay(&mut subject, &ops))
}

/// Runs [`run_equivalence`] for each seed in `seeds`, in parallel when the
/// `parallel` feature is enabled. Results are in seed order.
pub fn run_equivalence_many(
    cfg: &EquivalenceConfig,
    seeds: std::ops::Range<u64>,
) -> Result<Vec<(u64, Verdict)>, OracleError> {
    cfg.mix.check()?;
    let one = |seed: u64| {
        let c = EquivalenceConfig { seed, ..cfg.clone() };
        run_equivalence(&c).map(|v| (seed, v))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        seeds.into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds.map(one).collect()
    }
}

/// Sequential version of [`run_equivalence_many`].
pub fn run_equivalence_many_sequential(
    cfg: &EquivalenceConfig,
    seeds: std::ops::Range<u64>,
) -> Result<Vec<(u64, Verdict)>, OracleError> {
    seeds
        .map(|seed| run_equivalence(&EquivalenceConfig { seed, ..cfg.clone() }).map(|v| (seed, v)))
        .collect()
}

fn show<T: fmt::Debug>(x: T) -> String {
    format!("{x:?}")
}

/// Replays `ops` against `subject` and a fresh model. Every observable result
/// is compared and `validate` runs after every step.
pub fn replay<S: Subject>(subject: &mut S, ops: &[OpRecord]) -> Verdict {
    let mut model = ReferenceModel::new();
    for (step, &op) in ops.iter().enumerate() {
        let diverge = |expected: String, actual: String| {
            Verdict::Diverged(Divergence { step, op: Some(op), expected, actual })
        };
        let mismatch = match op {
            OpRecord::Insert(v) => {
                model.insert(v);
                subject.insert(v).err().map(|e| ("Ok".to_string(), e))
            }
            OpRecord::Search(v) => {
                let (e, a) = (model.contains(&v), subject.search(v));
                (e != a).then(|| (show(e), show(a)))
            }
            OpRecord::Delete(v) => {
                let (e, a) = (model.remove_one(&v), subject.delete(v));
                (e != a).then(|| (show(e), show(a)))
            }
            OpRecord::ExtractMin | OpRecord::ExtractMax => {
                let side = if op == OpRecord::ExtractMin { Side::Min } else { Side::Max };
                let peek = (model.extreme(side).copied(), subject.extreme(side));
                if peek.0 != peek.1 {
                    Some((show(peek.0), show(peek.1)))
                } else {
                    let (e, a) = (model.extract(side), subject.extract(side));
                    (e != a).then(|| (show(e), show(a)))
                }
            }
            OpRecord::Bound(v, side) => {
                let (e, a) = (model.bound(&v, side).copied(), subject.bound(v, side));
                (e != a).then(|| (show(e), show(a)))
            }
            OpRecord::Interval(lo, hi) => {
                let (e, a) = (model.interval(&lo, &hi), subject.interval(lo, hi));
                (e != a).then(|| (show(e), show(a)))
            }
        };
        if let Some((expected, actual)) = mismatch {
            return diverge(expected, actual);
        }
        if let Err(violations) = subject.validate() {
            return diverge("no invariant violations".into(), violations.join("; "));
        }
    }
    let (e, a) = (model.to_sorted_vec(), subject.sorted());
    if e != a {
        return Verdict::Diverged(Divergence {
            step: ops.len(),
            op: None,
            expected: format!("{} values", e.len()),
            actual: format!("{} values (first difference at position {})", a.len(),
                e.iter().zip(&a).position(|(x, y)| x != y).unwrap_or(e.len().min(a.len()))),
        });
    }
    Verdict::Ok { steps: ops.len() }
}
