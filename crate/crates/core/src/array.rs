//! The black-white array.
//!
//! Two slot arrays, `white` (length `N = 2^k`) and `black` (length `N/2`), are
//! each split into segments: the segment of rank `i` spans indices
//! `[2^i, 2^(i+1) - 1]`. Index 0 is never used. All stable data lives in the
//! white array; the black array is scratch space for merges.
//!
//! The slot count of the active segments is kept in `total`, and bit `i` of
//! `total` is set exactly when white segment `i` holds live data. An insert is
//! a binary increment of `total`: each carry is one merge of the black and
//! white segments of that rank into the next rank up.
//!
//! Deletes leave a [`Slot::Void`] behind. When a segment drops to half
//! occupancy its live values are demoted one rank, which keeps every active
//! segment of rank >= 1 strictly more than half full.

use std::fmt::{self, Display};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use crate::error::BwaError;

/// One cell of the white or black array.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Slot<T> {
    Occupied(T),
    #[default]
    Void,
}

impl<T> Slot<T> {
    #[inline]
    pub fn is_void(&self) -> bool {
        matches!(self, Slot::Void)
    }

    #[inline]
    pub fn is_occupied(&self) -> bool {
        !self.is_void()
    }

    #[inline]
    pub fn value(&self) -> Option<&T> {
        match self {
            Slot::Occupied(v) => Some(v),
            Slot::Void => None,
        }
    }

    /// Moves the value out, leaving `Void` in its place.
    #[inline]
    pub fn take(&mut self) -> Option<T> {
        match std::mem::take(self) {
            Slot::Occupied(v) => Some(v),
            Slot::Void => None,
        }
    }
}

/// What to do when an insert needs a rank the arrays do not have.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GrowthPolicy {
    /// Double both arrays.
    #[default]
    Grow,
    /// Fail with [`BwaError::CapacityExceeded`].
    Fixed,
}

/// Which array a merge writes into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dest {
    Black,
    White,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Min,
    Max,
}

/// `Lower` finds the smallest value strictly greater than the probe,
/// `Upper` the largest value strictly smaller.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

/// Index range of one segment. Never stored, always computed from the rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmentRef {
    pub rank: usize,
    pub start: usize,
    pub end: usize,
}

impl SegmentRef {
    #[inline]
    pub fn of_rank(rank: usize) -> Self {
        SegmentRef {
            rank,
            start: 1 << rank,
            end: (1 << (rank + 1)) - 1,
        }
    }

    /// Slot count, always `2^rank`.
    #[inline]
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    #[inline]
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchResult {
    /// White-array index holding the value.
    Found(usize),
    Nil,
}

impl SearchResult {
    pub fn is_found(&self) -> bool {
        matches!(self, SearchResult::Found(_))
    }

    pub fn index(&self) -> Option<usize> {
        match *self {
            SearchResult::Found(i) => Some(i),
            SearchResult::Nil => None,
        }
    }
}

/// Snapshot of the instrumentation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Element-order comparisons.
    pub comparisons: u64,
    /// Slot writes.
    pub moves: u64,
    /// Segment-pair merges.
    pub merges: u64,
    pub demotes: u64,
    /// Capacity doublings.
    pub grows: u64,
}

impl std::ops::Sub for Counters {
    type Output = Counters;

    fn sub(self, rhs: Counters) -> Counters {
        Counters {
            comparisons: self.comparisons - rhs.comparisons,
            moves: self.moves - rhs.moves,
            merges: self.merges - rhs.merges,
            demotes: self.demotes - rhs.demotes,
            grows: self.grows - rhs.grows,
        }
    }
}

// Read-only queries take `&self` and may run concurrently, so the shared
// counters are atomics. Each query adds its local tally once, at the end.
#[derive(Debug, Default)]
struct CounterCells {
    comparisons: AtomicU64,
    moves: AtomicU64,
    merges: AtomicU64,
    demotes: AtomicU64,
    grows: AtomicU64,
}

impl CounterCells {
    fn snapshot(&self) -> Counters {
        Counters {
            comparisons: self.comparisons.load(AtomicOrdering::Relaxed),
            moves: self.moves.load(AtomicOrdering::Relaxed),
            merges: self.merges.load(AtomicOrdering::Relaxed),
            demotes: self.demotes.load(AtomicOrdering::Relaxed),
            grows: self.grows.load(AtomicOrdering::Relaxed),
        }
    }

    fn from_snapshot(c: Counters) -> Self {
        CounterCells {
            comparisons: AtomicU64::new(c.comparisons),
            moves: AtomicU64::new(c.moves),
            merges: AtomicU64::new(c.merges),
            demotes: AtomicU64::new(c.demotes),
            grows: AtomicU64::new(c.grows),
        }
    }

    #[inline]
    fn add_comparisons(&self, n: u64) {
        if n != 0 {
            self.comparisons.fetch_add(n, AtomicOrdering::Relaxed);
        }
    }
}

/// Where a demotion put the live values of a half-empty segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemoteTarget {
    /// Lower rank was active: values went to the black segment and were
    /// merged back up into the white segment of the original rank.
    MergedBack,
    /// Lower rank was inactive: values filled the white segment one rank down.
    LowerWhite,
}

/// Report of a single demotion, for tests and instrumentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Demotion {
    pub from_rank: usize,
    pub target: DemoteTarget,
    /// Rank of the segment holding the demoted values afterwards.
    pub result_rank: usize,
    /// Occupied slots in that segment afterwards.
    pub occupied: usize,
}

impl Demotion {
    pub fn occupancy(&self) -> f64 {
        self.occupied as f64 / (1u64 << self.result_rank) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stats {
    pub len: usize,
    pub slot_count: usize,
    /// `(rank, occupied / 2^rank)` for every active rank, ascending.
    pub occupancy: Vec<(usize, f64)>,
    pub capacity: usize,
}

/// A broken structural invariant, as reported by [`BlackWhiteArray::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    ArrayShape { white: usize, black: usize },
    TotalOutOfRange { total: usize, capacity: usize },
    /// Active bit and occupancy disagree: an active rank with no values,
    /// or an inactive rank with a nonzero count.
    ActiveBitMismatch { rank: usize, active: bool, recorded: usize },
    OccupancyMiscount { rank: usize, recorded: usize, actual: usize },
    Unsorted { rank: usize, index: usize },
    UnderOccupied { rank: usize, occupied: usize, slots: usize },
    LenExceedsTotal { len: usize, total: usize },
}

impl Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ArrayShape { white, black } => {
                write!(f, "white length {white} is not twice black length {black}")
            }
            Violation::TotalOutOfRange { total, capacity } => {
                write!(f, "total {total} exceeds capacity {capacity} - 1")
            }
            Violation::ActiveBitMismatch { rank, active, recorded } => write!(
                f,
                "rank {rank}: total/active mismatch (active = {active}, recorded occupancy {recorded})"
            ),
            Violation::OccupancyMiscount { rank, recorded, actual } => {
                write!(f, "rank {rank}: occupancy recorded {recorded}, counted {actual}")
            }
            Violation::Unsorted { rank, index } => {
                write!(f, "rank {rank}: value at index {index} is out of order")
            }
            Violation::UnderOccupied { rank, occupied, slots } => {
                write!(f, "rank {rank}: {occupied}/{slots} occupied, not above half")
            }
            Violation::LenExceedsTotal { len, total } => {
                write!(f, "len {len} exceeds slot count {total}")
            }
        }
    }
}

/// Ordered multiset backed by a black-white array.
#[derive(Debug)]
pub struct BlackWhiteArray<T> {
    white: Vec<Slot<T>>,
    black: Vec<Slot<T>>,
    total: usize,
    occupancy: Vec<usize>,
    cap_exp: usize,
    policy: GrowthPolicy,
    counters: CounterCells,
}

impl<T: Clone> Clone for BlackWhiteArray<T> {
    fn clone(&self) -> Self {
        BlackWhiteArray {
            white: self.white.clone(),
            black: self.black.clone(),
            total: self.total,
            occupancy: self.occupancy.clone(),
            cap_exp: self.cap_exp,
            policy: self.policy,
            counters: CounterCells::from_snapshot(self.counters.snapshot()),
        }
    }

    fn clone_from(&mut self, source: &Self) {
        self.white.clone_from(&source.white);
        self.black.clone_from(&source.black);
        self.total = source.total;
        self.occupancy.clone_from(&source.occupancy);
        self.cap_exp = source.cap_exp;
        self.policy = source.policy;
        self.counters = CounterCells::from_snapshot(source.counters.snapshot());
    }
}

impl<T> Default for BlackWhiteArray<T> {
    fn default() -> Self {
        Self::new(4, GrowthPolicy::Grow).expect("nonzero capacity exponent")
    }
}

fn void_vec<T>(len: usize) -> Result<Vec<Slot<T>>, BwaError> {
    let mut v = Vec::new();
    v.try_reserve_exact(len).map_err(|_| BwaError::Alloc { slots: len })?;
    v.resize_with(len, || Slot::Void);
    Ok(v)
}

#[inline]
fn most_significant_bit(x: usize) -> usize {
    (usize::BITS - 1 - x.leading_zeros()) as usize
}

impl<T> BlackWhiteArray<T> {
    /// Empty structure with a white array of `2^cap_exp` slots.
    pub fn new(cap_exp: usize, policy: GrowthPolicy) -> Result<Self, BwaError> {
        if cap_exp == 0 {
            return Err(BwaError::ZeroCapacity);
        }
        if cap_exp >= usize::BITS as usize - 1 {
            return Err(BwaError::Alloc { slots: usize::MAX });
        }
        let n = 1usize << cap_exp;
        Ok(BlackWhiteArray {
            white: void_vec(n)?,
            black: void_vec(n / 2)?,
            total: 0,
            occupancy: vec![0; cap_exp],
            cap_exp,
            policy,
            counters: CounterCells::default(),
        })
    }

    /// Smallest structure that can hold `n` values without growing.
    pub fn with_capacity_for(n: usize, policy: GrowthPolicy) -> Result<Self, BwaError> {
        let cap_exp = (most_significant_bit(n.max(1)) + 1).max(1);
        Self::new(cap_exp, policy)
    }

    pub fn cap_exp(&self) -> usize {
        self.cap_exp
    }

    /// Number of white slots, `2^cap_exp`.
    pub fn capacity(&self) -> usize {
        self.white.len()
    }

    pub fn white_len(&self) -> usize {
        self.white.len()
    }

    pub fn black_len(&self) -> usize {
        self.black.len()
    }

    pub fn policy(&self) -> GrowthPolicy {
        self.policy
    }

    /// Slot count of all active segments, voids included.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Number of stored values.
    pub fn len(&self) -> usize {
        self.occupancy.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Occupied slot count of the white segment of `rank`.
    pub fn occupancy(&self, rank: usize) -> usize {
        self.occupancy.get(rank).copied().unwrap_or(0)
    }

    pub fn counters(&self) -> Counters {
        self.counters.snapshot()
    }

    pub fn reset_counters(&mut self) {
        self.counters = CounterCells::default();
    }

    pub fn seg_bounds(&self, rank: usize) -> Result<SegmentRef, BwaError> {
        if rank >= self.cap_exp {
            return Err(BwaError::RankOutOfRange { rank, cap_exp: self.cap_exp });
        }
        Ok(SegmentRef::of_rank(rank))
    }

    #[inline]
    pub fn is_active(&self, rank: usize) -> bool {
        rank < usize::BITS as usize && self.total & (1 << rank) != 0
    }

    /// Rank of the segment containing white index `index`.
    pub fn rank_of(&self, index: usize) -> Result<usize, BwaError> {
        if index == 0 || index >= self.white.len() {
            return Err(BwaError::IndexOutOfRange { index, capacity: self.white.len() });
        }
        Ok(most_significant_bit(index))
    }

    /// White slot at `index`, if the index is in range.
    pub fn white_slot(&self, index: usize) -> Option<&Slot<T>> {
        self.white.get(index).filter(|_| index > 0)
    }

    /// The white segment of `rank`, or `None` if it is inactive.
    pub fn segment(&self, rank: usize) -> Option<&[Slot<T>]> {
        if rank < self.cap_exp && self.is_active(rank) {
            Some(&self.white[SegmentRef::of_rank(rank).range()])
        } else {
            None
        }
    }

    /// Active ranks, highest first.
    pub fn active_ranks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cap_exp).rev().filter(move |&r| self.is_active(r))
    }

    pub fn stats(&self) -> Stats {
        let occupancy = (0..self.cap_exp)
            .filter(|&r| self.is_active(r))
            .map(|r| (r, self.occupancy[r] as f64 / (1u64 << r) as f64))
            .collect();
        Stats {
            len: self.len(),
            slot_count: self.total,
            occupancy,
            capacity: self.white.len(),
        }
    }

    fn grow(&mut self) -> Result<(), BwaError> {
        let n = self.white.len() * 2;
        self.white
            .try_reserve_exact(n - self.white.len())
            .map_err(|_| BwaError::Alloc { slots: n })?;
        self.black
            .try_reserve_exact(n / 2 - self.black.len())
            .map_err(|_| BwaError::Alloc { slots: n / 2 })?;
        self.white.resize_with(n, || Slot::Void);
        self.black.resize_with(n / 2, || Slot::Void);
        self.occupancy.push(0);
        self.cap_exp += 1;
        *self.counters.grows.get_mut() += 1;
        Ok(())
    }
}

impl<T: Ord> BlackWhiteArray<T> {
    /// Inserts `v`. Runs one merge per trailing one bit of `total`.
    pub fn insert(&mut self, v: T) -> Result<(), BwaError> {
        if self.total == self.white.len() - 1 {
            match self.policy {
                GrowthPolicy::Fixed => {
                    return Err(BwaError::CapacityExceeded { cap_exp: self.cap_exp })
                }
                GrowthPolicy::Grow => self.grow()?,
            }
        }
        *self.counters.moves.get_mut() += 1;
        if !self.is_active(0) {
            self.white[1] = Slot::Occupied(v);
            self.occupancy[0] = 1;
            self.total += 1;
            return Ok(());
        }
        self.black[1] = Slot::Occupied(v);
        let mut rank = 0;
        loop {
            let dest = if self.is_active(rank + 1) { Dest::Black } else { Dest::White };
            let written = self.merge_segments(rank, dest);
            self.occupancy[rank] = 0;
            if dest == Dest::White {
                self.occupancy[rank + 1] = written;
                break;
            }
            rank += 1;
        }
        self.total += 1;
        Ok(())
    }

    /// Merges the black and white segments of `rank` into the `dest` segment
    /// of `rank + 1`. Voids in the sources are skipped and the top of the
    /// destination is padded with voids. Equal values take the black one
    /// first. Returns the number of values written.
    fn merge_segments(&mut self, rank: usize, dest: Dest) -> usize {
        let seg = SegmentRef::of_rank(rank);
        let up = SegmentRef::of_rank(rank + 1);
        let mut comparisons = 0u64;
        let written = match dest {
            Dest::White => {
                let (low, high) = self.white.split_at_mut(up.start);
                merge_runs(
                    &mut self.black[seg.range()],
                    &mut low[seg.range()],
                    &mut high[..up.len()],
                    &mut comparisons,
                )
            }
            Dest::Black => {
                let (low, high) = self.black.split_at_mut(up.start);
                merge_runs(
                    &mut low[seg.range()],
                    &mut self.white[seg.range()],
                    &mut high[..up.len()],
                    &mut comparisons,
                )
            }
        };
        let c = self.counters.comparisons.get_mut();
        *c += comparisons;
        *self.counters.moves.get_mut() += up.len() as u64;
        *self.counters.merges.get_mut() += 1;
        written
    }

    /// Locates `v`, scanning active segments from the highest rank down.
    pub fn search(&self, v: &T) -> SearchResult {
        let mut comparisons = 0u64;
        let r = self.search_counted(v, &mut comparisons);
        self.counters.add_comparisons(comparisons);
        r
    }

    pub fn contains(&self, v: &T) -> bool {
        self.search(v).is_found()
    }

    fn search_counted(&self, v: &T, comparisons: &mut u64) -> SearchResult {
        for rank in self.active_ranks() {
            let seg = SegmentRef::of_rank(rank);
            if let Some(i) = seg_search(&self.white[seg.range()], v, comparisons) {
                return SearchResult::Found(seg.start + i);
            }
        }
        SearchResult::Nil
    }

    /// Removes one occurrence of `v` (the one [`search`](Self::search) finds).
    pub fn delete(&mut self, v: &T) -> SearchResult {
        self.delete_traced(v).0
    }

    /// Like [`delete`](Self::delete), also reporting the demotion it caused.
    pub fn delete_traced(&mut self, v: &T) -> (SearchResult, Option<Demotion>) {
        let mut comparisons = 0u64;
        let r = self.search_counted(v, &mut comparisons);
        *self.counters.comparisons.get_mut() += comparisons;
        match r {
            SearchResult::Found(index) => (r, self.remove_at(index).1),
            SearchResult::Nil => (r, None),
        }
    }

    fn remove_at(&mut self, index: usize) -> (T, Option<Demotion>) {
        let rank = most_significant_bit(index);
        let value = self.white[index].take().expect("removing an occupied slot");
        *self.counters.moves.get_mut() += 1;
        self.occupancy[rank] -= 1;
        if rank == 0 {
            self.total -= 1;
            return (value, None);
        }
        if self.occupancy[rank] > 1 << (rank - 1) {
            return (value, None);
        }
        (value, Some(self.demote(rank)))
    }

    /// Moves the live values of a half-empty segment of `rank` one rank down.
    fn demote(&mut self, rank: usize) -> Demotion {
        debug_assert!(rank >= 1);
        let half = 1usize << (rank - 1);
        debug_assert_eq!(self.occupancy[rank], half);
        let seg = SegmentRef::of_rank(rank);
        let lower = SegmentRef::of_rank(rank - 1);
        *self.counters.demotes.get_mut() += 1;
        *self.counters.moves.get_mut() += half as u64;

        let demotion = if self.is_active(rank - 1) {
            compact_into(&mut self.white[seg.range()], &mut self.black[lower.range()]);
            let written = self.merge_segments(rank - 1, Dest::White);
            debug_assert_eq!(written, half + self.occupancy[rank - 1]);
            self.occupancy[rank] = written;
            self.occupancy[rank - 1] = 0;
            Demotion {
                from_rank: rank,
                target: DemoteTarget::MergedBack,
                result_rank: rank,
                occupied: written,
            }
        } else {
            let (low, high) = self.white.split_at_mut(seg.start);
            compact_into(&mut high[..seg.len()], &mut low[lower.range()]);
            self.occupancy[rank - 1] = half;
            self.occupancy[rank] = 0;
            Demotion {
                from_rank: rank,
                target: DemoteTarget::LowerWhite,
                result_rank: rank - 1,
                occupied: half,
            }
        };
        self.total -= half;
        demotion
    }

    /// Index of the smallest or largest stored value.
    fn extreme_index(&self, side: Side, comparisons: &mut u64) -> Option<usize> {
        let mut best: Option<usize> = None;
        for rank in self.active_ranks() {
            let seg = SegmentRef::of_rank(rank);
            let slots = &self.white[seg.range()];
            let local = match side {
                Side::Min => slots.iter().position(Slot::is_occupied),
                Side::Max => slots.iter().rposition(Slot::is_occupied),
            };
            let Some(local) = local else { continue };
            let candidate = seg.start + local;
            best = Some(match best {
                None => candidate,
                Some(b) => {
                    *comparisons += 1;
                    let (cv, bv) = (self.value_at(candidate), self.value_at(b));
                    let better = match side {
                        Side::Min => cv < bv,
                        Side::Max => cv > bv,
                    };
                    if better {
                        candidate
                    } else {
                        b
                    }
                }
            });
        }
        best
    }

    #[inline]
    fn value_at(&self, index: usize) -> &T {
        self.white[index].value().expect("occupied slot")
    }

    pub fn extreme(&self, side: Side) -> Option<&T> {
        let mut comparisons = 0;
        let i = self.extreme_index(side, &mut comparisons);
        self.counters.add_comparisons(comparisons);
        i.map(|i| self.value_at(i))
    }

    pub fn min(&self) -> Option<&T> {
        self.extreme(Side::Min)
    }

    pub fn max(&self) -> Option<&T> {
        self.extreme(Side::Max)
    }

    /// Removes and returns the smallest or largest value.
    pub fn extract(&mut self, side: Side) -> Option<T> {
        let mut comparisons = 0;
        let i = self.extreme_index(side, &mut comparisons);
        *self.counters.comparisons.get_mut() += comparisons;
        i.map(|i| self.remove_at(i).0)
    }

    pub fn extract_min(&mut self) -> Option<T> {
        self.extract(Side::Min)
    }

    pub fn extract_max(&mut self) -> Option<T> {
        self.extract(Side::Max)
    }

    /// Nearest stored value strictly above (`Lower`) or below (`Upper`) `v`.
    pub fn bound(&self, v: &T, side: BoundSide) -> Option<&T> {
        let mut comparisons = 0u64;
        let mut best: Option<&T> = None;
        for rank in self.active_ranks() {
            let slots = &self.white[SegmentRef::of_rank(rank).range()];
            let candidate = match side {
                BoundSide::Lower => {
                    let p = partition_point(slots, |x| x <= v, &mut comparisons);
                    slots.get(p).and_then(Slot::value)
                }
                BoundSide::Upper => {
                    let p = partition_point(slots, |x| x < v, &mut comparisons);
                    slots[..p].iter().rev().find_map(Slot::value)
                }
            };
            if let Some(c) = candidate {
                best = match best {
                    None => Some(c),
                    Some(b) => {
                        comparisons += 1;
                        let better = match side {
                            BoundSide::Lower => c < b,
                            BoundSide::Upper => c > b,
                        };
                        Some(if better { c } else { b })
                    }
                };
            }
        }
        self.counters.add_comparisons(comparisons);
        best
    }

    pub fn lower_bound(&self, v: &T) -> Option<&T> {
        self.bound(v, BoundSide::Lower)
    }

    pub fn upper_bound(&self, v: &T) -> Option<&T> {
        self.bound(v, BoundSide::Upper)
    }

    /// All stored values in `[lo, hi]`, ascending, with multiplicity.
    pub fn interval(&self, lo: &T, hi: &T) -> Result<SortedIter<'_, T>, BwaError> {
        if lo > hi {
            return Err(BwaError::InvalidInterval);
        }
        let mut comparisons = 0u64;
        let runs = self
            .active_ranks()
            .map(|rank| {
                let slots = &self.white[SegmentRef::of_rank(rank).range()];
                let start = partition_point(slots, |x| x < lo, &mut comparisons);
                let end = partition_point(slots, |x| x <= hi, &mut comparisons);
                &slots[start..end.max(start)]
            })
            .filter(|run| !run.is_empty())
            .collect();
        self.counters.add_comparisons(comparisons);
        Ok(SortedIter::new(runs))
    }

    /// Every stored value in ascending order: a multiway merge over the
    /// active segments.
    pub fn iter_sorted(&self) -> SortedIter<'_, T> {
        let runs = self
            .active_ranks()
            .map(|rank| &self.white[SegmentRef::of_rank(rank).range()])
            .collect();
        SortedIter::new(runs)
    }

    /// Checks every structural invariant and returns all violations found.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.white.len() != 2 * self.black.len()
            || self.white.len() != 1 << self.cap_exp
            || self.occupancy.len() != self.cap_exp
        {
            out.push(Violation::ArrayShape { white: self.white.len(), black: self.black.len() });
            return Err(out);
        }
        if self.total >= self.white.len() {
            out.push(Violation::TotalOutOfRange { total: self.total, capacity: self.white.len() });
        }
        for rank in 0..self.cap_exp {
            let recorded = self.occupancy[rank];
            let active = self.is_active(rank);
            if !active {
                if recorded != 0 {
                    out.push(Violation::ActiveBitMismatch { rank, active, recorded });
                }
                continue;
            }
            let slots = &self.white[SegmentRef::of_rank(rank).range()];
            let actual = slots.iter().filter(|s| s.is_occupied()).count();
            if recorded == 0 || actual == 0 {
                out.push(Violation::ActiveBitMismatch { rank, active, recorded });
            }
            if actual != recorded {
                out.push(Violation::OccupancyMiscount { rank, recorded, actual });
            }
            if rank >= 1 && actual <= slots.len() / 2 {
                out.push(Violation::UnderOccupied { rank, occupied: actual, slots: slots.len() });
            }
            let mut prev: Option<&T> = None;
            for (i, s) in slots.iter().enumerate() {
                if let Some(x) = s.value() {
                    if prev.is_some_and(|p| p > x) {
                        out.push(Violation::Unsorted { rank, index: (1 << rank) + i });
                        break;
                    }
                    prev = Some(x);
                }
            }
        }
        let len = self.len();
        if len > self.total {
            out.push(Violation::LenExceedsTotal { len, total: self.total });
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    #[cfg(test)]
    pub(crate) fn corrupt_total(&mut self, delta: isize) {
        self.total = self.total.wrapping_add_signed(delta);
    }
}

impl<T: Display> BlackWhiteArray<T> {
    /// One line per active segment, highest rank first:
    /// `rank=<r> [v,·,...]` with `·` marking a void slot.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for rank in self.active_ranks() {
            s.push_str(&format!("rank={rank} ["));
            for (i, slot) in self.white[SegmentRef::of_rank(rank).range()].iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match slot {
                    Slot::Occupied(v) => s.push_str(&v.to_string()),
                    Slot::Void => s.push('·'),
                }
            }
            s.push_str("]\n");
        }
        s
    }
}

#[cfg(feature = "parallel")]
impl<T: Ord + Sync> BlackWhiteArray<T> {
    /// Searches every probe, in parallel.
    pub fn search_batch(&self, probes: &[T]) -> Vec<SearchResult> {
        use rayon::prelude::*;
        probes.par_iter().map(|p| self.search(p)).collect()
    }
}

#[cfg(not(feature = "parallel"))]
impl<T: Ord> BlackWhiteArray<T> {
    pub fn search_batch(&self, probes: &[T]) -> Vec<SearchResult> {
        self.search_batch_sequential(probes)
    }
}

impl<T: Ord> BlackWhiteArray<T> {
    pub fn search_batch_sequential(&self, probes: &[T]) -> Vec<SearchResult> {
        probes.iter().map(|p| self.search(p)).collect()
    }
}

impl<T: Ord> Extend<T> for BlackWhiteArray<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for v in iter {
            self.insert(v).expect("extend on a fixed-capacity array overflowed");
        }
    }
}

impl<T: Ord> FromIterator<T> for BlackWhiteArray<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut a = BlackWhiteArray::default();
        a.extend(iter);
        a
    }
}

/// Stable two-way merge of the live values of `black` and `white` into
/// `dest`, ties to `black`. Sources are left void.
fn merge_runs<T: Ord>(
    black: &mut [Slot<T>],
    white: &mut [Slot<T>],
    dest: &mut [Slot<T>],
    comparisons: &mut u64,
) -> usize {
    let mut b = black.iter_mut().filter_map(Slot::take);
    let mut w = white.iter_mut().filter_map(Slot::take);
    let mut out = dest.iter_mut();
    let mut written = 0;
    let mut next_b = b.next();
    let mut next_w = w.next();
    loop {
        let v = match (next_b.take(), next_w.take()) {
            (Some(x), Some(y)) => {
                *comparisons += 1;
                if x <= y {
                    next_w = Some(y);
                    next_b = b.next();
                    x
                } else {
                    next_b = Some(x);
                    next_w = w.next();
                    y
                }
            }
            (Some(x), None) => {
                next_b = b.next();
                x
            }
            (None, Some(y)) => {
                next_w = w.next();
                y
            }
            (None, None) => break,
        };
        *out.next().expect("merge destination overflow") = Slot::Occupied(v);
        written += 1;
    }
    for s in out {
        *s = Slot::Void;
    }
    written
}

/// Copies the live values of `src` in order into the front of `dest`,
/// leaving `src` void.
fn compact_into<T>(src: &mut [Slot<T>], dest: &mut [Slot<T>]) {
    let mut out = dest.iter_mut();
    for v in src.iter_mut().filter_map(Slot::take) {
        *out.next().expect("demotion destination overflow") = Slot::Occupied(v);
    }
    for s in out {
        *s = Slot::Void;
    }
}

/// Nearest occupied slot to `mid` within `[lo, hi]`, probing
/// `mid, mid-1, mid+1, mid-2, ...`.
#[inline]
fn pivot<T>(slots: &[Slot<T>], lo: usize, hi: usize, mid: usize) -> Option<usize> {
    if slots[mid].is_occupied() {
        return Some(mid);
    }
    let mut d = 1;
    loop {
        let left = mid.checked_sub(d).filter(|&l| l >= lo);
        let right = Some(mid + d).filter(|&r| r <= hi);
        if left.is_none() && right.is_none() {
            return None;
        }
        if let Some(l) = left.filter(|&l| slots[l].is_occupied()) {
            return Some(l);
        }
        if let Some(r) = right.filter(|&r| slots[r].is_occupied()) {
            return Some(r);
        }
        d += 1;
    }
}

/// Void-aware binary search over one segment. Returns a local index.
fn seg_search<T: Ord>(slots: &[Slot<T>], v: &T, comparisons: &mut u64) -> Option<usize> {
    use std::cmp::Ordering;
    let (mut lo, mut hi) = (0usize, slots.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let p = pivot(slots, lo, hi - 1, mid)?;
        let x = slots[p].value().expect("pivot is occupied");
        *comparisons += 1;
        match v.cmp(x) {
            Ordering::Equal => return Some(p),
            Ordering::Less => hi = p,
            Ordering::Greater => lo = p + 1,
        }
    }
    None
}

/// Local index of the first occupied slot whose value fails `pred`, or
/// `slots.len()` if there is none. `pred` must hold on a prefix of the
/// occupied values.
fn partition_point<T, F>(slots: &[Slot<T>], mut pred: F, comparisons: &mut u64) -> usize
where
    F: FnMut(&T) -> bool,
{
    let (mut lo, mut hi) = (0usize, slots.len());
    let mut answer = slots.len();
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let Some(p) = pivot(slots, lo, hi - 1, mid) else { break };
        *comparisons += 1;
        if pred(slots[p].value().expect("pivot is occupied")) {
            lo = p + 1;
        } else {
            answer = p;
            hi = p;
        }
    }
    answer
}

/// Ascending multiway merge over sorted slot runs, skipping voids.
#[derive(Clone, Debug)]
pub struct SortedIter<'a, T> {
    runs: Vec<std::slice::Iter<'a, Slot<T>>>,
    heads: Vec<Option<&'a T>>,
}

impl<'a, T: Ord> SortedIter<'a, T> {
    fn new(runs: Vec<&'a [Slot<T>]>) -> Self {
        let mut runs: Vec<_> = runs.into_iter().map(|r| r.iter()).collect();
        let heads = runs.iter_mut().map(|r| r.find_map(Slot::value)).collect();
        SortedIter { runs, heads }
    }
}

impl<'a, T: Ord> Iterator for SortedIter<'a, T> {
    type Item = &'a T;

    fn next(&mut self) -> Option<&'a T> {
        let mut best: Option<(usize, &'a T)> = None;
        for (i, head) in self.heads.iter().enumerate() {
            if let Some(h) = *head {
                if best.is_none_or(|(_, b)| h < b) {
                    best = Some((i, h));
                }
            }
        }
        let (i, v) = best?;
        self.heads[i] = self.runs[i].find_map(Slot::value);
        Some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(cap_exp: usize) -> BlackWhiteArray<i32> {
        BlackWhiteArray::new(cap_exp, GrowthPolicy::Fixed).unwrap()
    }

    fn fig2() -> BlackWhiteArray<i32> {
        let mut a = fixed(4);
        for v in [83, 67, 59, 21, 76, 33, 45, 52] {
            a.insert(v).unwrap();
        }
        a
    }

    fn values(slots: &[Slot<i32>]) -> Vec<Option<i32>> {
        slots.iter().map(|s| s.value().copied()).collect()
    }

    fn occ(v: &[i32]) -> Vec<Slot<i32>> {
        v.iter().map(|&x| Slot::Occupied(x)).collect()
    }

    #[test]
    fn new_layout() {
        let a = fixed(4);
        assert_eq!((a.white_len(), a.black_len(), a.total()), (16, 8, 0));
        let a = fixed(1);
        assert_eq!((a.white_len(), a.black_len()), (2, 1));
        assert!(a.validate().is_ok());
        assert_eq!(
            BlackWhiteArray::<i32>::new(0, GrowthPolicy::Grow).unwrap_err(),
            BwaError::ZeroCapacity
        );
    }

    #[test]
    fn one_grow_at_1024() {
        let mut a = BlackWhiteArray::new(10, GrowthPolicy::Grow).unwrap();
        for v in 0..1023 {
            a.insert(v).unwrap();
        }
        assert_eq!(a.counters().grows, 0);
        a.insert(1023).unwrap();
        assert_eq!(a.counters().grows, 1);
        assert_eq!(a.cap_exp(), 11);
        assert_eq!(a.total(), 1024);
        assert!(a.validate().is_ok());
    }

    #[test]
    fn fixed_overflow_is_rejected_before_mutation() {
        let mut a = fixed(2);
        for v in 0..3 {
            a.insert(v).unwrap();
        }
        let before = a.dump();
        assert_eq!(a.insert(9), Err(BwaError::CapacityExceeded { cap_exp: 2 }));
        assert_eq!(a.dump(), before);
        assert_eq!(a.total(), 3);
    }

    #[test]
    fn segment_geometry() {
        let a = fixed(6);
        assert_eq!(a.seg_bounds(3).unwrap(), SegmentRef { rank: 3, start: 8, end: 15 });
        assert_eq!(a.seg_bounds(0).unwrap(), SegmentRef { rank: 0, start: 1, end: 1 });
        assert_eq!(a.seg_bounds(5).unwrap(), SegmentRef { rank: 5, start: 32, end: 63 });
        assert!(a.seg_bounds(6).is_err());
        for r in 0..6 {
            assert_eq!(a.seg_bounds(r).unwrap().len(), 1 << r);
        }
        assert_eq!(a.rank_of(7).unwrap(), 2);
        assert_eq!(a.rank_of(1).unwrap(), 0);
        assert_eq!(a.rank_of(11).unwrap(), 3);
        assert!(a.rank_of(0).is_err());
        assert!(a.rank_of(64).is_err());
    }

    #[test]
    fn active_bits() {
        let mut a = fixed(5);
        assert!((0..5).all(|r| !a.is_active(r)));
        a.extend(0..7);
        assert!(a.is_active(0) && a.is_active(1) && a.is_active(2) && !a.is_active(3));
        a.insert(7).unwrap();
        assert_eq!(a.active_ranks().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn fig2_insert_cascade() {
        let mut a = fixed(4);
        for v in [83, 67, 59, 21, 76, 33, 45] {
            a.insert(v).unwrap();
        }
        assert_eq!(a.total(), 7);
        assert_eq!(values(a.segment(2).unwrap()), [21, 59, 67, 83].map(Some));
        assert_eq!(values(a.segment(1).unwrap()), [33, 76].map(Some));
        assert_eq!(values(a.segment(0).unwrap()), [Some(45)]);
        let before = a.counters();
        a.insert(52).unwrap();
        assert_eq!((a.counters() - before).merges, 3);
        assert_eq!(a.total(), 8);
        assert_eq!(values(&a.white[8..16]), [21, 33, 45, 52, 59, 67, 76, 83].map(Some));
        assert!((0..3).all(|r| !a.is_active(r)));
    }

    #[test]
    fn first_insert_goes_to_white_one() {
        let mut a = fixed(3);
        a.insert(5).unwrap();
        assert_eq!(a.white_slot(1), Some(&Slot::Occupied(5)));
        assert_eq!(a.total(), 1);
        assert_eq!(a.counters().merges, 0);
    }

    #[test]
    fn merge_skips_voids() {
        // Fig 4(c)-(d): black rank 2 merged with white rank 2 into white rank 3.
        let mut black = occ(&[6, 52, 67, 83]);
        let mut white = vec![
            Slot::Occupied(21),
            Slot::Occupied(77),
            Slot::Void,
            Slot::Occupied(91),
        ];
        let mut dest = vec![Slot::Void; 8];
        let mut c = 0;
        assert_eq!(merge_runs(&mut black, &mut white, &mut dest, &mut c), 7);
        let mut expected: Vec<_> = [6, 21, 52, 67, 77, 83, 91].map(Some).to_vec();
        expected.push(None);
        assert_eq!(values(&dest), expected);

        let mut black = occ(&[52]);
        let mut white = occ(&[45]);
        let mut dest = vec![Slot::Void; 2];
        merge_runs(&mut black, &mut white, &mut dest, &mut c);
        assert_eq!(values(&dest), [45, 52].map(Some));

        let mut black = vec![Slot::Occupied(10), Slot::Void];
        let mut white = vec![Slot::Void, Slot::Occupied(20)];
        let mut dest = occ(&[1, 2, 3, 4]);
        merge_runs(&mut black, &mut white, &mut dest, &mut c);
        assert_eq!(values(&dest), [Some(10), Some(20), None, None]);
    }

    #[test]
    fn merge_void_before_smaller_value() {
        let mut black = occ(&[5, 15]);
        let mut white = vec![Slot::Void, Slot::Occupied(10)];
        let mut dest = vec![Slot::Void; 4];
        let mut c = 0;
        merge_runs(&mut black, &mut white, &mut dest, &mut c);
        assert_eq!(values(&dest), [Some(5), Some(10), Some(15), None]);
    }

    #[test]
    fn merge_ties_take_black_first() {
        #[derive(Debug, Clone, Copy)]
        struct Tagged(i32, char);
        impl PartialEq for Tagged {
            fn eq(&self, o: &Self) -> bool {
                self.0 == o.0
            }
        }
        impl Eq for Tagged {}
        impl PartialOrd for Tagged {
            fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Tagged {
            fn cmp(&self, o: &Self) -> std::cmp::Ordering {
                self.0.cmp(&o.0)
            }
        }
        let mut black = vec![Slot::Occupied(Tagged(1, 'b')), Slot::Occupied(Tagged(2, 'b'))];
        let mut white = vec![Slot::Occupied(Tagged(1, 'w')), Slot::Occupied(Tagged(2, 'w'))];
        let mut dest = vec![Slot::Void; 4];
        let mut c = 0;
        merge_runs(&mut black, &mut white, &mut dest, &mut c);
        let tags: String = dest.iter().map(|s| s.value().unwrap().1).collect();
        assert_eq!(tags, "bwbw");
    }

    #[test]
    fn search_fig2() {
        let a = fig2();
        assert_eq!(a.search(&67), SearchResult::Found(13));
        assert_eq!(a.search(&50), SearchResult::Nil);
        assert_eq!(fixed(3).search(&7), SearchResult::Nil);
    }

    #[test]
    fn search_through_void_runs() {
        let mut a = fixed(6);
        a.extend(0..32);
        for v in [13, 14, 15, 16, 17, 18, 19] {
            assert!(a.delete(&v).is_found());
        }
        for v in 0..32 {
            let expect = !(13..=19).contains(&v);
            assert_eq!(a.contains(&v), expect, "value {v}");
        }
        assert_eq!(a.lower_bound(&12), Some(&20));
        assert_eq!(a.upper_bound(&20), Some(&12));
        assert_eq!(a.interval(&10, &22).unwrap().copied().collect::<Vec<_>>(), [10, 11, 12, 20, 21, 22]);
    }

    fn fig4a() -> BlackWhiteArray<i32> {
        let mut a = fixed(4);
        for v in [6, 10, 20, 52, 59, 67, 70, 83, 21, 77, 85, 91, 45, 82] {
            a.insert(v).unwrap();
        }
        for v in [10, 20, 70, 85] {
            assert!(a.delete(&v).is_found());
        }
        a
    }

    #[test]
    fn fig4_demote_and_merge_back() {
        let mut a = fig4a();
        assert_eq!(a.total(), 14);
        assert_eq!(
            values(a.segment(3).unwrap()),
            [Some(6), None, None, Some(52), Some(59), Some(67), None, Some(83)]
        );
        assert_eq!(a.occupancy(3), 5);
        assert_eq!(values(a.segment(2).unwrap()), [Some(21), Some(77), None, Some(91)]);
        let before = a.counters();
        let (r, demotion) = a.delete_traced(&59);
        assert!(r.is_found());
        let d = (a.counters() - before, demotion.unwrap());
        assert_eq!((d.0.demotes, d.0.merges), (1, 1));
        assert_eq!(d.1.target, DemoteTarget::MergedBack);
        assert_eq!(a.total(), 10);
        let mut expected: Vec<_> = [6, 21, 52, 67, 77, 83, 91].map(Some).to_vec();
        expected.push(None);
        assert_eq!(values(a.segment(3).unwrap()), expected);
        assert_eq!(a.occupancy(3), 7);
        assert!(a.segment(2).is_none());
        assert_eq!(values(a.segment(1).unwrap()), [45, 82].map(Some));
        assert!(a.validate().is_ok());

        assert_eq!(a.max(), Some(&91));
        let st = a.stats();
        assert_eq!((st.len, st.slot_count), (9, 10));
    }

    #[test]
    fn demote_into_inactive_rank() {
        let mut a = fixed(3);
        a.extend([4, 9]);
        assert_eq!(a.total(), 2);
        let (_, d) = a.delete_traced(&4);
        let d = d.unwrap();
        assert_eq!(d.target, DemoteTarget::LowerWhite);
        assert_eq!(d.occupancy(), 1.0);
        assert_eq!(a.white_slot(1), Some(&Slot::Occupied(9)));
        assert_eq!(a.total(), 1);
        assert!(a.is_active(0) && !a.is_active(1));
    }

    #[test]
    fn delete_last_value() {
        let mut a = fixed(3);
        a.insert(3).unwrap();
        assert_eq!(a.delete(&3), SearchResult::Found(1));
        assert_eq!(a.total(), 0);
        assert!(a.is_empty());
        assert_eq!(a.delete(&3), SearchResult::Nil);
        assert!(a.validate().is_ok());
    }

    #[test]
    fn delete_miss_leaves_state() {
        let mut a = fig2();
        let before = a.dump();
        assert_eq!(a.delete(&1000), SearchResult::Nil);
        assert_eq!(a.dump(), before);
    }

    #[test]
    fn extremes_and_extract() {
        let mut a = fig2();
        assert_eq!((a.min(), a.max()), (Some(&21), Some(&83)));
        assert_eq!(a.extract_min(), Some(21));
        assert!(a.white[8].is_void());
        assert_eq!(a.occupancy(3), 7);
        let mut e = fixed(2);
        assert_eq!(e.min(), None);
        assert_eq!(e.extract_max(), None);
        assert_eq!(e.total(), 0);
    }

    #[test]
    fn bounds_fig2() {
        let a = fig2();
        assert_eq!(a.bound(&60, BoundSide::Lower), Some(&67));
        assert_eq!(a.bound(&21, BoundSide::Upper), None);
        assert_eq!(a.bound(&83, BoundSide::Lower), None);
        assert_eq!(a.bound(&83, BoundSide::Upper), Some(&76));
        assert_eq!(fixed(2).bound(&5, BoundSide::Lower), None);
    }

    #[test]
    fn interval_fig2() {
        let a = fig2();
        assert_eq!(a.interval(&30, &60).unwrap().copied().collect::<Vec<_>>(), [33, 45, 52, 59]);
        assert_eq!(fixed(2).interval(&1, &2).unwrap().count(), 0);
        assert_eq!(a.interval(&5, &4).unwrap_err(), BwaError::InvalidInterval);
    }

    #[test]
    fn iter_sorted_fig2() {
        let a = fig2();
        assert_eq!(a.iter_sorted().copied().collect::<Vec<_>>(), [21, 33, 45, 52, 59, 67, 76, 83]);
        assert_eq!(fixed(2).iter_sorted().count(), 0);
    }

    #[test]
    fn stats_after_inserts() {
        let mut a = fixed(8);
        a.extend((0..100).rev());
        let st = a.stats();
        assert_eq!((st.len, st.slot_count, st.capacity), (100, 100, 256));
        assert!(st.occupancy.iter().all(|&(_, r)| r == 1.0));
        assert_eq!(fixed(2).stats().len, 0);
    }

    #[test]
    fn validate_catches_corrupt_total() {
        let mut a = fig2();
        a.corrupt_total(1);
        let errs = a.validate().unwrap_err();
        assert!(errs
            .iter()
            .any(|v| matches!(v, Violation::ActiveBitMismatch { rank: 0, active: true, .. })));
    }

    #[test]
    fn validate_catches_unsorted_and_miscount() {
        let mut a = fig2();
        a.white.swap(9, 10);
        a.occupancy[3] = 6;
        let errs = a.validate().unwrap_err();
        assert!(errs.contains(&Violation::Unsorted { rank: 3, index: 10 }));
        assert!(errs.contains(&Violation::OccupancyMiscount { rank: 3, recorded: 6, actual: 8 }));
    }

    #[test]
    fn dump_format() {
        let mut a = fig2();
        assert_eq!(a.dump(), "rank=3 [21,33,45,52,59,67,76,83]\n");
        a.delete(&45);
        a.insert(1).unwrap();
        assert_eq!(a.dump(), "rank=3 [21,33,·,52,59,67,76,83]\nrank=0 [1]\n");
    }

    #[test]
    fn search_batch_matches_sequential() {
        let a: BlackWhiteArray<i32> = (0..1000).map(|x| x * 3).collect();
        let probes: Vec<i32> = (0..3000).collect();
        assert_eq!(a.search_batch(&probes), a.search_batch_sequential(&probes));
    }

    #[test]
    fn space_ratio_is_two_to_one() {
        for k in 1..16 {
            let a = fixed(k);
            assert_eq!(a.white_len(), 2 * a.black_len());
        }
    }
}
