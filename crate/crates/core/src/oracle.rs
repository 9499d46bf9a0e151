//! Exhaustive ground truth over all `n^m` allocations.
//!
//! Allocations are enumerated as owner vectors `(owner[0], ..., owner[m-1])`
//! counted in base `n` with item 0 as the most significant digit, so the
//! order is lexicographic in the owner vector. Every search either covers
//! the whole space or fails with [`Error::Budget`] up front.

use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{self, Notion};
use crate::model::{Allocation, Instance, Value};

/// Default cap on the number of allocations a single search may visit.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Upper bound on exhaustive work, in allocations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget(pub u64);

impl Default for Budget {
    fn default() -> Self {
        Budget(DEFAULT_BUDGET)
    }
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget(limit)
    }

    pub fn admit(self, needed: u128) -> Result<()> {
        if needed > u128::from(self.0) {
            return Err(Error::Budget { needed, budget: self.0 });
        }
        Ok(())
    }
}

/// `n^m`, saturating.
pub fn allocation_count(n: usize, m: usize) -> u128 {
    let mut count: u128 = 1;
    for _ in 0..m {
        count = count.saturating_mul(n as u128);
    }
    count
}

/// Every complete allocation of `m` items to `n` agents, in counter order.
pub fn enumerate_allocations(n: usize, m: usize, budget: Budget) -> Result<Allocations> {
    if n == 0 {
        return Err(Error::input("cannot enumerate allocations for zero agents"));
    }
    let total = allocation_count(n, m);
    budget.admit(total)?;
    Ok(Allocations::range(n, m, 0, total))
}

/// Iterator over a contiguous range of allocation indices.
#[derive(Debug, Clone)]
pub struct Allocations {
    agents: usize,
    owners: Vec<usize>,
    index: u128,
    end: u128,
}

impl Allocations {
    fn range(agents: usize, items: usize, start: u128, end: u128) -> Self {
        let mut owners = vec![0; items];
        let mut rest = start;
        for slot in owners.iter_mut().rev() {
            *slot = (rest % agents as u128) as usize;
            rest /= agents as u128;
        }
        Allocations { agents, owners, index: start, end }
    }

    /// Index of the allocation the next call to `next` yields.
    pub fn position(&self) -> u128 {
        self.index
    }

    fn advance(&mut self) {
        for slot in self.owners.iter_mut().rev() {
            *slot += 1;
            if *slot < self.agents {
                return;
            }
            *slot = 0;
        }
    }
}

impl Iterator for Allocations {
    type Item = Allocation;

    fn next(&mut self) -> Option<Allocation> {
        if self.index >= self.end {
            return None;
        }
        let x = Allocation::from_owners(self.agents, &self.owners);
        self.index += 1;
        self.advance();
        Some(x)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = usize::try_from(self.end - self.index).unwrap_or(usize::MAX);
        (left, Some(left))
    }
}

/// Outcome of an exhaustive existence search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExistenceResult {
    pub notion: Notion,
    pub exists: bool,
    pub witness: Option<Allocation>,
    /// Allocations scanned up to and including the witness, or all of them.
    pub allocations_checked: u128,
}

/// Scans the index range split into `workers` pieces; returns the smallest
/// index whose allocation passes `accept`.
fn first_match<F>(inst: &Instance, budget: Budget, workers: usize, accept: F) -> Result<Option<(u128, Allocation)>>
where
    F: Fn(&Allocation) -> bool + Sync,
{
    let n = inst.agents();
    let m = inst.items();
    let total = allocation_count(n, m);
    budget.admit(total)?;
    let workers = workers.max(1) as u128;
    let chunk = total.div_ceil(workers).max(1);
    let scan = |start: u128, end: u128| {
        let mut it = Allocations::range(n, m, start, end);
        loop {
            let index = it.position();
            match it.next() {
                Some(x) if accept(&x) => return Some((index, x)),
                Some(_) => {}
                None => return None,
            }
        }
    };
    if workers == 1 {
        return Ok(scan(0, total));
    }
    let found = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| (w * chunk, ((w + 1) * chunk).min(total)))
            .filter(|(start, end)| start < end)
            .map(|(start, end)| {
                let scan = &scan;
                s.spawn(move || scan(start, end))
            })
            .collect();
        handles
            .into_iter()
            .filter_map(|h| h.join().expect("enumeration worker panicked"))
            .min_by_key(|(index, _)| *index)
    });
    Ok(found)
}

/// Does some allocation satisfy `notion` for every agent?
pub fn exists(inst: &Instance, notion: Notion, budget: Budget) -> Result<ExistenceResult> {
    exists_parallel(inst, notion, budget, 1)
}

pub fn exists_parallel(inst: &Instance, notion: Notion, budget: Budget, workers: usize) -> Result<ExistenceResult> {
    budget.admit(allocation_count(inst.agents(), inst.items()))?;
    let found = if notion == Notion::Mms {
        let shares =
            (0..inst.agents()).map(|i| fairness::mms_value_with_budget(inst, i, budget)).collect::<Result<Vec<_>>>()?;
        first_match(inst, budget, workers, |x| {
            shares.iter().enumerate().all(|(i, &mms)| inst.bundle_value(i, x.bundle(i)) >= mms)
        })?
    } else {
        first_match(inst, budget, workers, |x| {
            fairness::check(inst, x, notion).map(|r| r.all_satisfied).unwrap_or(false)
        })?
    };
    let total = allocation_count(inst.agents(), inst.items());
    Ok(match found {
        Some((index, witness)) => {
            ExistenceResult { notion, exists: true, witness: Some(witness), allocations_checked: index + 1 }
        }
        None => ExistenceResult { notion, exists: false, witness: None, allocations_checked: total },
    })
}

/// Implications audited per agent by [`implication_audit`], as `(premise, conclusion)`.
pub const IMPLICATIONS: [(Notion, Notion); 10] = [
    (Notion::Ef, Notion::Efx),
    (Notion::Efx, Notion::Ef1),
    (Notion::Efx, Notion::Aefx),
    (Notion::Aefx, Notion::Propm),
    (Notion::Prop, Notion::Propx),
    (Notion::Propx, Notion::Propm),
    (Notion::Propm, Notion::Prop1),
    (Notion::Efx, Notion::Propx),
    (Notion::Prop, Notion::Mms),
    (Notion::Ef, Notion::Prop),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub allocation: Allocation,
    pub agent: usize,
    pub premise: Notion,
    pub conclusion: Notion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub allocations_checked: u128,
    /// One entry per [`IMPLICATIONS`] link: how many (allocation, agent) pairs broke it.
    pub counts: Vec<LinkCount>,
    /// The first few offending cases.
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCount {
    pub premise: Notion,
    pub conclusion: Notion,
    pub violations: u64,
}

impl AuditReport {
    pub fn total_violations(&self) -> u64 {
        self.counts.iter().map(|c| c.violations).sum()
    }

    pub fn violations_of(&self, premise: Notion, conclusion: Notion) -> u64 {
        self.counts.iter().find(|c| c.premise == premise && c.conclusion == conclusion).map_or(0, |c| c.violations)
    }
}

const KEPT_VIOLATIONS: usize = 20;

/// Checks every link of [`IMPLICATIONS`] for every agent of every allocation.
pub fn implication_audit(inst: &Instance, budget: Budget) -> Result<AuditReport> {
    let mut counts: Vec<LinkCount> =
        IMPLICATIONS.iter().map(|&(premise, conclusion)| LinkCount { premise, conclusion, violations: 0 }).collect();
    let mut violations = Vec::new();
    let mms =
        (0..inst.agents()).map(|i| fairness::mms_value_with_budget(inst, i, budget)).collect::<Result<Vec<Value>>>()?;
    let notions: Vec<Notion> = Notion::ALL.into_iter().filter(|&n| n != Notion::Mms).collect();

    let mut checked = 0u128;
    for x in enumerate_allocations(inst.agents(), inst.items(), budget)? {
        checked += 1;
        let reports = fairness::check_many(inst, &x, &notions)?;
        let holds = |notion: Notion, agent: usize| -> bool {
            if notion == Notion::Mms {
                return inst.bundle_value(agent, x.bundle(agent)) >= mms[agent];
            }
            let k = notions.iter().position(|&n| n == notion).expect("notion is audited");
            reports[k].per_agent[agent].satisfied
        };
        for agent in 0..inst.agents() {
            for (link, &(premise, conclusion)) in IMPLICATIONS.iter().enumerate() {
                if holds(premise, agent) && !holds(conclusion, agent) {
                    counts[link].violations += 1;
                    if violations.len() < KEPT_VIOLATIONS {
                        violations.push(Violation { allocation: x.clone(), agent, premise, conclusion });
                    }
                }
            }
        }
    }
    Ok(AuditReport { allocations_checked: checked, counts, violations })
}

/// Three identical agents valuing one item at `scale - 6` and six items at 1.
pub fn make_counterexample(scale: u64) -> Result<Instance> {
    if scale < 7 {
        return Err(Error::input(format!("counterexample scale must be at least 7, got {scale}")));
    }
    let mut row = vec![1; 7];
    row[0] = scale - 6;
    Instance::identical(3, row)
}

/// SplitMix64 (Steele, Lea and Flood). Fixed so that seeded instances are
/// reproducible in any language.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// `next_u64() % bound`.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }
}

/// Values drawn agent by agent, item by item, each `next_u64() % (max_value + 1)`.
pub fn random_instance(n: usize, m: usize, max_value: u64, seed: u64) -> Result<Instance> {
    if n == 0 {
        return Err(Error::input("random instance needs at least one agent"));
    }
    let mut rng = SplitMix64::new(seed);
    let bound = max_value.checked_add(1).ok_or_else(|| Error::input("max_value too large"))?;
    let values = (0..n).map(|_| (0..m).map(|_| rng.below(bound)).collect()).collect();
    Instance::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_allocations(2, 2, Budget::default()).unwrap().count(), 4);
        assert_eq!(enumerate_allocations(3, 7, Budget::default()).unwrap().count(), 2187);
        let empty: Vec<_> = enumerate_allocations(4, 0, Budget::default()).unwrap().collect();
        assert_eq!(empty, vec![Allocation::empty(4)]);
    }

    #[test]
    fn enumeration_order_and_uniqueness() {
        let all: Vec<_> = enumerate_allocations(2, 2, Budget::default()).unwrap().collect();
        let lists: Vec<Vec<Vec<usize>>> =
            all.iter().map(|x| x.bundles.iter().map(|b| b.items().to_vec()).collect()).collect();
        assert_eq!(
            lists,
            vec![vec![vec![0, 1], vec![]], vec![vec![0], vec![1]], vec![vec![1], vec![0]], vec![vec![], vec![0, 1]],]
        );
        let mut set: Vec<_> = enumerate_allocations(3, 5, Budget::default()).unwrap().collect();
        set.sort_by_key(|x| x.owners(5));
        set.dedup();
        assert_eq!(set.len(), 243);
    }

    #[test]
    fn ranges_resume_mid_sequence() {
        let all: Vec<_> = enumerate_allocations(3, 4, Budget::default()).unwrap().collect();
        let tail: Vec<_> = Allocations::range(3, 4, 50, 81).collect();
        assert_eq!(&all[50..], &tail[..]);
    }

    #[test]
    fn budget_is_enforced() {
        let err = enumerate_allocations(3, 7, Budget::new(2000)).unwrap_err();
        assert_eq!(err, Error::Budget { needed: 2187, budget: 2000 });
        let inst = make_counterexample(100).unwrap();
        assert!(matches!(exists(&inst, Notion::Propm, Budget::new(10)), Err(Error::Budget { .. })));
    }

    #[test]
    fn existence_on_counterexample() {
        let inst = make_counterexample(100).unwrap();
        let median = exists(&inst, Notion::AltMedian, Budget::default()).unwrap();
        assert!(!median.exists);
        assert_eq!(median.allocations_checked, 2187);
        let propm = exists(&inst, Notion::Propm, Budget::default()).unwrap();
        assert!(propm.exists);
        let witness = propm.witness.unwrap();
        assert!(fairness::check(&inst, &witness, Notion::Propm).unwrap().all_satisfied);
    }

    #[test]
    fn cut_and_choose_instance_admits_propx() {
        let inst = Instance::new(vec![vec![60, 40], vec![10, 90]]).unwrap();
        assert!(exists(&inst, Notion::Propx, Budget::default()).unwrap().exists);
    }

    #[test]
    fn parallel_search_returns_the_sequential_witness() {
        let inst = random_instance(3, 6, 20, 11).unwrap();
        for notion in [Notion::Propm, Notion::Efx, Notion::Prop] {
            let one = exists(&inst, notion, Budget::default()).unwrap();
            for workers in [2, 3, 7] {
                assert_eq!(exists_parallel(&inst, notion, Budget::default(), workers).unwrap(), one);
            }
        }
    }

    #[test]
    fn audit_examples() {
        let inst = make_counterexample(100).unwrap();
        let report = implication_audit(&inst, Budget::default()).unwrap();
        assert_eq!(report.allocations_checked, 2187);
        let efx_propx = report.violations_of(Notion::Efx, Notion::Propx);
        assert!(efx_propx > 0);
        assert_eq!(report.total_violations(), efx_propx);

        let single = Instance::new(vec![vec![3, 4]]).unwrap();
        assert_eq!(implication_audit(&single, Budget::default()).unwrap().total_violations(), 0);
    }

    #[test]
    fn efx_does_not_imply_propx() {
        let inst = Instance::new(vec![vec![1, 1, 5], vec![4, 2, 9], vec![3, 5, 4]]).unwrap();
        let report = implication_audit(&inst, Budget::default()).unwrap();
        assert!(report.violations_of(Notion::Efx, Notion::Propx) > 0);
        let others: u64 = report
            .counts
            .iter()
            .filter(|c| (c.premise, c.conclusion) != (Notion::Efx, Notion::Propx))
            .map(|c| c.violations)
            .sum();
        assert_eq!(others, 0);
    }

    #[test]
    fn counterexample_shapes() {
        assert_eq!(make_counterexample(100).unwrap(), Instance::identical(3, vec![94, 1, 1, 1, 1, 1, 1]).unwrap());
        assert_eq!(make_counterexample(13).unwrap().row(0), &[7, 1, 1, 1, 1, 1, 1]);
        assert_eq!(make_counterexample(1000).unwrap().row(2)[0], 994);
        assert!(make_counterexample(6).is_err());
    }

    #[test]
    fn mean_still_fails_at_scale_1000() {
        let inst = make_counterexample(1000).unwrap();
        let x = Allocation::from_lists(vec![vec![0], vec![1, 2, 3], vec![4, 5, 6]]).unwrap();
        let r = fairness::check(&inst, &x, Notion::AltMean).unwrap();
        // 3 + 997/4 = 252.25 < 1000/3
        assert!(!r.per_agent[1].satisfied);
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 0, as published with the algorithm.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn random_instances_are_reproducible() {
        let a = random_instance(5, 9, 100, 42).unwrap();
        assert_eq!(a, random_instance(5, 9, 100, 42).unwrap());
        assert_ne!(a, random_instance(5, 9, 100, 43).unwrap());
        assert_eq!((a.agents(), a.items()), (5, 9));
        assert!(a.rows().iter().flatten().all(|&v| v <= 100));
        let zeros = random_instance(3, 4, 0, 7).unwrap();
        assert!(zeros.rows().iter().flatten().all(|&v| v == 0));
    }
}
