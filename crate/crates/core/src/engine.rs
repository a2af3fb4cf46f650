//! The exact water-filling bucket engine shared by both primal-dual solvers.
//!
//! Each item owns a stair of buckets, one per unit segment (list curves) or
//! per constant piece (step curves). A bucket's capacity is the marginal cost
//! of its piece; its width is the number of unit segments it represents.
//! During a raise, every non-full bucket inside the active range fills at a
//! rate equal to its own in-range width plus the in-range widths of the full
//! buckets spilling onto it from above. When the lowest pending bucket of a
//! stair fills, the maximal full run above it is taken as a block.
//!
//! The engine also keeps the dual ledger: one audit record per raise, enough
//! to replay every bucket fill and re-verify dual feasibility, tightness of
//! taken buckets, and the approximation-ratio inequality without re-running
//! the solver.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::model::cost::rat_serde;
use crate::model::{PieceView, Rat};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("no active bucket can receive water but demand remains")]
    Stalled,
    #[error("item {item} bucket {bucket}: fill would exceed capacity")]
    Overfill { item: usize, bucket: usize },
}

/// One dual constraint: capacity is the marginal cost of segments
/// `lo..=hi`; fill is the accumulated weighted dual mass.
#[derive(Clone, Debug)]
pub struct Bucket {
    pub capacity: Rat,
    pub lo: u64,
    pub hi: u64,
    pub fill: Rat,
    pub full: bool,
    /// Set iff full: the nearest non-full bucket strictly below.
    pub spill_to: Option<usize>,
}

impl Bucket {
    pub fn width(&self) -> u64 {
        self.hi - self.lo + 1
    }

    /// Width of the part of this bucket at or below `active_hi` segments.
    fn in_range_width(&self, active_hi: u64) -> u64 {
        if self.lo > active_hi {
            0
        } else {
            self.hi.min(active_hi) - self.lo + 1
        }
    }
}

/// A maximal run of segments taken together, in creation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub seq: u64,
    pub item: usize,
    pub first_bucket: usize,
    pub last_bucket: usize,
    /// Unit segment range covered by the block.
    pub lo: u64,
    pub hi: u64,
}

impl Block {
    pub fn units(&self) -> u64 {
        self.hi - self.lo + 1
    }
}

/// All buckets of one item, bottom to top.
#[derive(Clone, Debug)]
pub struct Stair {
    pub buckets: Vec<Bucket>,
    /// Buckets `0..taken_buckets` are taken.
    pub taken_buckets: usize,
    /// Taken unit segments (the stair's current level).
    pub taken_units: u64,
}

impl Stair {
    /// Total unit segments on the stair.
    pub fn domain_units(&self) -> u64 {
        self.buckets.last().map_or(0, |b| b.hi)
    }
}

/// One dual raise: the step length, the residual demand it was priced
/// against, the point raised for (flow instances only), and the per-bucket
/// fill rates (audit mode only; buckets are 1-based).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    #[serde(with = "rat_serde")]
    pub delta: Rat,
    pub residual: u64,
    pub t: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau: Option<Vec<(usize, u64, u64)>>,
}

/// The dual ledger: objective value plus the raises that produced it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(with = "rat_serde")]
    pub dual_objective: Rat,
    pub raises: Vec<AuditRecord>,
}

impl Certificate {
    fn new() -> Self {
        Certificate {
            dual_objective: Rat::zero(),
            raises: Vec::new(),
        }
    }
}

/// Per-item fill rates for one raise: `(bucket index, rate)` with positive
/// rates only, ascending by bucket.
pub type RateMap = Vec<(usize, u64)>;

/// What a dispatch did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DispatchOutcome {
    /// The bucket was already absorbed by an earlier take of this batch.
    Absorbed,
    /// Spill pointers were redirected; no segment changed hands.
    SpillUpdated,
    /// A block was taken; this many unit segments entered the solution.
    BlockTaken { units: u64 },
}

#[derive(Clone, Debug)]
pub struct Engine {
    pub stairs: Vec<Stair>,
    pub blocks: Vec<Block>,
    pub certificate: Certificate,
    pub audit: bool,
    next_seq: u64,
}

impl Engine {
    /// Builds stairs from per-item piece views (finite marginals only),
    /// marks zero-capacity buckets full, wires their spill pointers, and
    /// takes any leading full runs. These initial takes cost nothing and
    /// correspond to constraints that are tight before any raise.
    pub fn new(items: &[Vec<PieceView>], audit: bool) -> Engine {
        let mut engine = Engine::new_unprocessed(items, audit);
        for i in 0..engine.stairs.len() {
            engine.init_stair(i);
        }
        engine
    }

    fn new_unprocessed(items: &[Vec<PieceView>], audit: bool) -> Engine {
        let stairs = items
            .iter()
            .map(|views| Stair {
                buckets: views
                    .iter()
                    .map(|v| {
                        assert!(v.marginal >= Rat::zero(), "marginals are non-negative");
                        Bucket {
                            capacity: v.marginal.clone(),
                            lo: v.lo,
                            hi: v.hi,
                            fill: Rat::zero(),
                            full: false,
                            spill_to: None,
                        }
                    })
                    .collect(),
                taken_buckets: 0,
                taken_units: 0,
            })
            .collect();
        Engine {
            stairs,
            blocks: Vec::new(),
            certificate: Certificate::new(),
            audit,
            next_seq: 0,
        }
    }

    fn init_stair(&mut self, item: usize) {
        {
            let stair = &mut self.stairs[item];
            for b in &mut stair.buckets {
                if b.capacity.is_zero() {
                    b.full = true;
                }
            }
        }
        if self.stairs[item].buckets.first().is_some_and(|b| b.full) {
            self.take_run(item);
        }
        let stair = &mut self.stairs[item];
        let mut last_nonfull: Option<usize> = None;
        for idx in stair.taken_buckets..stair.buckets.len() {
            if stair.buckets[idx].full {
                stair.buckets[idx].spill_to = last_nonfull;
            } else {
                last_nonfull = Some(idx);
            }
        }
    }

    pub fn n(&self) -> usize {
        self.stairs.len()
    }

    /// Current level of every item.
    pub fn levels(&self) -> Vec<u64> {
        self.stairs.iter().map(|s| s.taken_units).collect()
    }

    pub fn total_taken_units(&self) -> u64 {
        self.stairs.iter().map(|s| s.taken_units).sum()
    }

    /// Fill rates of one stair when external water reaches segments
    /// `a_i+1..=active_hi`. A non-full bucket collects its own in-range
    /// width plus the in-range widths of the full run directly above it;
    /// full buckets and taken buckets never hold water.
    pub fn rates(&self, item: usize, active_hi: u64) -> RateMap {
        let stair = &self.stairs[item];
        let mut map: RateMap = Vec::new();
        let mut last_nonfull: Option<usize> = None;
        let mut width_seen: u64 = 0;
        for idx in stair.taken_buckets..stair.buckets.len() {
            let b = &stair.buckets[idx];
            let w = b.in_range_width(active_hi);
            width_seen += w;
            if b.full {
                debug_assert_eq!(
                    b.spill_to, last_nonfull,
                    "item {item} bucket {idx}: spill pointer must match the nearest non-full bucket below"
                );
                if w > 0 {
                    let target = last_nonfull
                        .expect("a full run above the taken prefix sits on a non-full bucket");
                    let slot = map
                        .iter_mut()
                        .find(|(i, _)| *i == target)
                        .expect("target bucket already has a rate entry");
                    slot.1 += w;
                }
            } else {
                last_nonfull = Some(idx);
                map.push((idx, w));
            }
        }
        map.retain(|&(_, r)| r > 0);
        debug_assert_eq!(
            map.iter().map(|&(_, r)| r).sum::<u64>(),
            width_seen.min(active_hi.saturating_sub(stair.taken_units)),
            "no water may be created or lost on a stair"
        );
        map
    }

    /// The next tight event: the exact step that first fills a bucket, plus
    /// every bucket reaching capacity at that step, sorted by item then
    /// bucket.
    pub fn next_event(
        &self,
        rate_maps: &[(usize, RateMap)],
    ) -> Result<(Rat, Vec<(usize, usize)>), EngineError> {
        let mut delta: Option<Rat> = None;
        for (item, map) in rate_maps {
            for &(bucket, rate) in map {
                let b = &self.stairs[*item].buckets[bucket];
                debug_assert!(!b.full);
                let step = (b.capacity.clone() - b.fill.clone()) / Rat::from_integer(rate.into());
                if delta.as_ref().is_none_or(|d| step < *d) {
                    delta = Some(step);
                }
            }
        }
        let Some(delta) = delta else {
            return Err(EngineError::Stalled);
        };
        let mut tight = Vec::new();
        for (item, map) in rate_maps {
            for &(bucket, rate) in map {
                let b = &self.stairs[*item].buckets[bucket];
                let step = (b.capacity.clone() - b.fill.clone()) / Rat::from_integer(rate.into());
                if step == delta {
                    tight.push((*item, bucket));
                }
            }
        }
        tight.sort_unstable();
        Ok((delta, tight))
    }

    /// Applies one raise: adds `delta * rate` to every rated bucket, marks
    /// buckets that reached capacity full, and appends the audit record.
    /// Zero-length raises are recorded only in audit mode.
    pub fn pour(
        &mut self,
        delta: &Rat,
        rate_maps: &[(usize, RateMap)],
        residual: u64,
        t: Option<u64>,
    ) -> Result<Vec<(usize, usize)>, EngineError> {
        let mut newly_full = Vec::new();
        for (item, map) in rate_maps {
            for &(bucket, rate) in map {
                let b = &mut self.stairs[*item].buckets[bucket];
                b.fill += delta * Rat::from_integer(rate.into());
                if b.fill > b.capacity {
                    return Err(EngineError::Overfill {
                        item: *item,
                        bucket,
                    });
                }
                if b.fill == b.capacity {
                    b.full = true;
                    newly_full.push((*item, bucket));
                }
            }
        }
        newly_full.sort_unstable();
        self.certificate.dual_objective += delta * Rat::from_integer(residual.into());
        if !delta.is_zero() || self.audit {
            let tau = if self.audit {
                let mut entries = Vec::new();
                for (item, map) in rate_maps {
                    for &(bucket, rate) in map {
                        entries.push((*item, bucket as u64 + 1, rate));
                    }
                }
                entries.sort_unstable();
                Some(entries)
            } else {
                None
            };
            self.certificate.raises.push(AuditRecord {
                delta: delta.clone(),
                residual,
                t,
                tau,
            });
        }
        Ok(newly_full)
    }

    /// Handles a bucket that just became full. Buckets already swallowed by
    /// an earlier take of the same batch report `Absorbed`.
    pub fn on_full(&mut self, item: usize, bucket: usize) -> DispatchOutcome {
        let taken = self.stairs[item].taken_buckets;
        if bucket < taken {
            DispatchOutcome::Absorbed
        } else if bucket == taken {
            let units = self.take_run(item);
            DispatchOutcome::BlockTaken { units }
        } else {
            self.spill_update(item, bucket);
            DispatchOutcome::SpillUpdated
        }
    }

    /// Takes the maximal full run starting at the lowest pending bucket,
    /// truncated-but-full buckets included.
    fn take_run(&mut self, item: usize) -> u64 {
        let stair = &mut self.stairs[item];
        let first = stair.taken_buckets;
        debug_assert!(stair.buckets[first].full);
        let mut last = first;
        while last + 1 < stair.buckets.len() && stair.buckets[last + 1].full {
            last += 1;
        }
        let lo = stair.buckets[first].lo;
        let hi = stair.buckets[last].hi;
        stair.taken_buckets = last + 1;
        stair.taken_units = hi;
        let block = Block {
            seq: self.next_seq,
            item,
            first_bucket: first,
            last_bucket: last,
            lo,
            hi,
        };
        self.next_seq += 1;
        self.blocks.push(block);
        hi - lo + 1
    }

    /// Redirects spill pointers after bucket `j` (not the lowest pending
    /// one) fills: every bucket from `j` up to the next non-full bucket now
    /// spills to the nearest non-full bucket below `j`.
    fn spill_update(&mut self, item: usize, j: usize) {
        let stair = &mut self.stairs[item];
        debug_assert!(j > stair.taken_buckets && stair.buckets[j].full);
        let p = (stair.taken_buckets..j)
            .rev()
            .find(|&idx| !stair.buckets[idx].full)
            .expect("the lowest pending bucket is never full here");
        let q = (j + 1..stair.buckets.len())
            .find(|&idx| !stair.buckets[idx].full)
            .unwrap_or(stair.buckets.len());
        for idx in j..q {
            stair.buckets[idx].spill_to = Some(p);
        }
    }

    /// Recomputes every spill pointer from scratch; used by tests to check
    /// the incrementally maintained structure.
    pub fn recompute_spill_targets(&self, item: usize) -> Vec<Option<usize>> {
        let stair = &self.stairs[item];
        let mut out = vec![None; stair.buckets.len()];
        let mut last_nonfull = None;
        for (idx, bucket) in stair.buckets.iter().enumerate().skip(stair.taken_buckets) {
            if bucket.full {
                out[idx] = last_nonfull;
            } else {
                last_nonfull = Some(idx);
            }
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn new_without_init(items: &[Vec<PieceView>], audit: bool) -> Engine {
        Engine::new_unprocessed(items, audit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rat;

    fn unit_views(caps: &[i64]) -> Vec<PieceView> {
        caps.iter()
            .enumerate()
            .map(|(idx, &c)| PieceView {
                lo: idx as u64 + 1,
                hi: idx as u64 + 1,
                marginal: rat(c),
            })
            .collect()
    }

    #[test]
    fn rates_without_spill() {
        let engine = Engine::new(&[unit_views(&[2, 2, 2])], false);
        assert_eq!(engine.rates(0, 2), vec![(0, 1), (1, 1)]);
    }

    #[test]
    fn rates_with_spill_from_full_bucket() {
        // bucket 2 has zero capacity, so it is full from the start and its
        // external water lands on bucket 1, which fills at rate 2
        let engine = Engine::new(&[unit_views(&[5, 0])], false);
        assert_eq!(engine.stairs[0].buckets[1].spill_to, Some(0));
        assert_eq!(engine.rates(0, 2), vec![(0, 2)]);
    }

    #[test]
    fn rates_width_weighted() {
        let views = vec![
            PieceView {
                lo: 1,
                hi: 3,
                marginal: rat(7),
            },
            PieceView {
                lo: 4,
                hi: 5,
                marginal: rat(0),
            },
        ];
        let engine = Engine::new(&[views], false);
        assert_eq!(engine.rates(0, 5), vec![(0, 5)]);
        // truncation inside the upper piece reduces its contribution
        assert_eq!(engine.rates(0, 4), vec![(0, 4)]);
        assert_eq!(engine.rates(0, 2), vec![(0, 2)]);
    }

    #[test]
    fn next_event_picks_earliest() {
        let engine = Engine::new(&[unit_views(&[3, 1])], false);
        let maps = vec![(0usize, engine.rates(0, 2))];
        let (delta, tight) = engine.next_event(&maps).unwrap();
        assert_eq!(delta, rat(1));
        assert_eq!(tight, vec![(0, 1)]);
    }

    #[test]
    fn next_event_zero_capacity_is_immediately_tight() {
        let engine = Engine::new_without_init(&[unit_views(&[0, 2])], false);
        let maps = vec![(0usize, vec![(0usize, 1u64), (1, 1)])];
        let (delta, tight) = engine.next_event(&maps).unwrap();
        assert_eq!(delta, rat(0));
        assert_eq!(tight, vec![(0, 0)]);
    }

    #[test]
    fn next_event_symmetric_tie_is_item_ordered() {
        let engine = Engine::new(&[unit_views(&[2]), unit_views(&[2])], false);
        let maps = vec![(0usize, engine.rates(0, 1)), (1, engine.rates(1, 1))];
        let (delta, tight) = engine.next_event(&maps).unwrap();
        assert_eq!(delta, rat(2));
        assert_eq!(tight, vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn next_event_stalls_without_rates() {
        let engine = Engine::new(&[unit_views(&[1])], false);
        assert_eq!(engine.next_event(&[]), Err(EngineError::Stalled));
    }

    #[test]
    fn pour_fills_and_marks_full() {
        let mut engine = Engine::new(&[unit_views(&[3])], false);
        let maps = vec![(0usize, vec![(0usize, 1u64)])];
        let newly = engine.pour(&rat(1), &maps, 1, None).unwrap();
        assert!(newly.is_empty());
        assert_eq!(engine.stairs[0].buckets[0].fill, rat(1));

        let mut engine = Engine::new(&[unit_views(&[1, 0])], false);
        let maps = vec![(0usize, engine.rates(0, 2))];
        let newly = engine
            .pour(&crate::model::ratio(1, 2), &maps, 1, None)
            .unwrap();
        assert_eq!(newly, vec![(0, 0)]);
        assert!(engine.stairs[0].buckets[0].full);
    }

    #[test]
    fn zero_delta_record_only_in_audit() {
        let maps = vec![(0usize, vec![(0usize, 1u64)])];
        let mut plain = Engine::new(&[unit_views(&[3])], false);
        plain.pour(&rat(0), &maps, 1, None).unwrap();
        assert!(plain.certificate.raises.is_empty());

        let mut audited = Engine::new(&[unit_views(&[3])], true);
        audited.pour(&rat(0), &maps, 1, None).unwrap();
        assert_eq!(audited.certificate.raises.len(), 1);
        assert_eq!(audited.certificate.dual_objective, rat(0));
    }

    #[test]
    fn pour_detects_overfill() {
        let mut engine = Engine::new(&[unit_views(&[1])], false);
        let maps = vec![(0usize, vec![(0usize, 1u64)])];
        assert_eq!(
            engine.pour(&rat(2), &maps, 1, None),
            Err(EngineError::Overfill { item: 0, bucket: 0 })
        );
    }

    #[test]
    fn on_full_redirects_spill_chain() {
        // caps (9, 0, 2): bucket 2 starts full spilling to 1; filling bucket
        // 3 must redirect its chain to bucket 1 as well (p = 1, q = 4)
        let mut engine = Engine::new(&[unit_views(&[9, 0, 2])], false);
        let maps = vec![(0usize, engine.rates(0, 3))];
        let (delta, tight) = engine.next_event(&maps).unwrap();
        assert_eq!(delta, rat(2));
        assert_eq!(tight, vec![(0, 2)]);
        engine.pour(&delta, &maps, 3, None).unwrap();
        assert_eq!(engine.on_full(0, 2), DispatchOutcome::SpillUpdated);
        assert_eq!(engine.stairs[0].buckets[1].spill_to, Some(0));
        assert_eq!(engine.stairs[0].buckets[2].spill_to, Some(0));
        assert_eq!(
            engine.recompute_spill_targets(0),
            vec![None, Some(0), Some(0)]
        );
        // everything now pours into bucket 1 at rate 3
        assert_eq!(engine.rates(0, 3), vec![(0, 3)]);
    }

    #[test]
    fn on_full_takes_maximal_run() {
        let mut engine = Engine::new(&[unit_views(&[2, 0])], false);
        let maps = vec![(0usize, engine.rates(0, 2))];
        let (delta, _) = engine.next_event(&maps).unwrap();
        engine.pour(&delta, &maps, 2, None).unwrap();
        assert_eq!(
            engine.on_full(0, 0),
            DispatchOutcome::BlockTaken { units: 2 }
        );
        assert_eq!(engine.stairs[0].taken_units, 2);
        assert_eq!(engine.blocks.len(), 1);
        assert_eq!((engine.blocks[0].lo, engine.blocks[0].hi), (1, 2));
    }

    #[test]
    fn on_full_takes_single_bucket() {
        let mut engine = Engine::new(&[unit_views(&[1, 5])], false);
        let maps = vec![(0usize, engine.rates(0, 2))];
        let (delta, tight) = engine.next_event(&maps).unwrap();
        assert_eq!((delta.clone(), tight), (rat(1), vec![(0, 0)]));
        engine.pour(&delta, &maps, 2, None).unwrap();
        assert_eq!(
            engine.on_full(0, 0),
            DispatchOutcome::BlockTaken { units: 1 }
        );
        assert_eq!(engine.stairs[0].taken_units, 1);
    }

    #[test]
    fn leading_zero_capacity_run_is_taken_at_start() {
        let engine = Engine::new(&[unit_views(&[0, 0, 4])], false);
        assert_eq!(engine.stairs[0].taken_units, 2);
        assert_eq!(engine.blocks.len(), 1);
        assert_eq!(engine.blocks[0].units(), 2);
    }

    #[test]
    fn ledger_replays_every_fill_exactly() {
        // drive a two-item cover to completion and re-derive each bucket's
        // final fill from the audit records alone
        let caps = [vec![3i64, 1, 2], vec![2, 0, 5]];
        let views: Vec<_> = caps.iter().map(|c| unit_views(c)).collect();
        let mut engine = Engine::new(&views, true);
        let demand = 4u64;
        'main: while engine.total_taken_units() < demand {
            let residual = demand - engine.total_taken_units();
            let mut maps = Vec::new();
            for i in 0..engine.n() {
                let stair = &engine.stairs[i];
                let hi = stair.domain_units().min(stair.taken_units + residual);
                let map = engine.rates(i, hi);
                if !map.is_empty() {
                    maps.push((i, map));
                }
            }
            let (delta, _) = engine.next_event(&maps).unwrap();
            for (item, bucket) in engine.pour(&delta, &maps, residual, None).unwrap() {
                engine.on_full(item, bucket);
                if engine.total_taken_units() >= demand {
                    break 'main;
                }
            }
        }
        let mut replayed = vec![vec![Rat::zero(); 3]; 2];
        let mut objective = Rat::zero();
        for raise in &engine.certificate.raises {
            objective += raise.delta.clone() * rat(raise.residual as i64);
            for &(item, bucket, r) in raise.tau.as_ref().unwrap() {
                replayed[item][bucket as usize - 1] += raise.delta.clone() * rat(r as i64);
            }
        }
        for (i, stair) in engine.stairs.iter().enumerate() {
            for (b, bucket) in stair.buckets.iter().enumerate() {
                assert_eq!(
                    replayed[i][b], bucket.fill,
                    "bucket ({i}, {b}): ledger and engine disagree"
                );
                assert!(bucket.fill <= bucket.capacity);
            }
        }
        assert_eq!(objective, engine.certificate.dual_objective);
    }
}
