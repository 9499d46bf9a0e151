//! Instances, bundles, allocations and exact threshold comparisons.
//!
//! Valuations are non-negative integers and are never normalized. A
//! fractional test such as "agent `i` values `S` at least `k/n` of her
//! total" is always evaluated as `n * v_i(S) >= k * T_i` in `i128`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-negative additive valuation of a single item, or of a bundle.
pub type Value = u64;

/// `n` agents with additive valuations over `m` items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    values: Vec<Vec<Value>>,
    totals: Vec<Value>,
    items: usize,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    n: usize,
    m: usize,
    values: Vec<Vec<Value>>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        if raw.values.len() != raw.n {
            return Err(Error::input(format!("\"n\" is {} but \"values\" has {} rows", raw.n, raw.values.len())));
        }
        let inst = Instance::with_items(raw.m, raw.values)?;
        Ok(inst)
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance { n: inst.agents(), m: inst.items, values: inst.values }
    }
}

impl Instance {
    /// Builds an instance from a row-per-agent table. Every row must have
    /// the same length and there must be at least one agent.
    pub fn new(values: Vec<Vec<Value>>) -> Result<Self> {
        let m = values.first().map_or(0, Vec::len);
        Self::with_items(m, values)
    }

    fn with_items(m: usize, values: Vec<Vec<Value>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("an instance needs at least one agent"));
        }
        let mut totals = Vec::with_capacity(values.len());
        for (agent, row) in values.iter().enumerate() {
            if row.len() != m {
                return Err(Error::input(format!("agent {agent} has {} values, expected {m}", row.len())));
            }
            let total = row
                .iter()
                .try_fold(0u64, |acc, &v| acc.checked_add(v))
                .ok_or_else(|| Error::input(format!("total value of agent {agent} overflows u64")))?;
            totals.push(total);
        }
        Ok(Instance { values, totals, items: m })
    }

    /// `n` identical agents sharing one valuation row.
    pub fn identical(agents: usize, row: Vec<Value>) -> Result<Self> {
        Self::new(vec![row; agents])
    }

    pub fn agents(&self) -> usize {
        self.values.len()
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn value(&self, agent: usize, item: usize) -> Value {
        self.values[agent][item]
    }

    pub fn row(&self, agent: usize) -> &[Value] {
        &self.values[agent]
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.values
    }

    /// `T_i`, the agent's value for all items.
    pub fn total(&self, agent: usize) -> Value {
        self.totals[agent]
    }

    /// The bundle holding every item of the instance.
    pub fn all_items(&self) -> Bundle {
        Bundle((0..self.items).collect())
    }

    /// Additive value of `bundle` for `agent`.
    pub fn value_of(&self, agent: usize, bundle: &Bundle) -> Result<Value> {
        self.check_agent(agent)?;
        self.check_bundle(bundle)?;
        Ok(self.bundle_value(agent, bundle))
    }

    /// Unchecked variant of [`Instance::value_of`] for indices already validated.
    pub(crate) fn bundle_value(&self, agent: usize, bundle: &Bundle) -> Value {
        self.sum(agent, bundle.items())
    }

    pub(crate) fn sum(&self, agent: usize, items: &[usize]) -> Value {
        let row = &self.values[agent];
        items.iter().map(|&j| row[j]).sum()
    }

    pub fn check_agent(&self, agent: usize) -> Result<()> {
        if agent >= self.agents() {
            return Err(Error::input(format!("agent index {agent} out of range for {} agents", self.agents())));
        }
        Ok(())
    }

    pub fn check_bundle(&self, bundle: &Bundle) -> Result<()> {
        match bundle.0.last() {
            Some(&last) if last >= self.items => {
                Err(Error::input(format!("item index {last} out of range for {} items", self.items)))
            }
            _ => Ok(()),
        }
    }

    /// Checks that `allocation` has one bundle per agent and partitions all items.
    pub fn check_allocation(&self, allocation: &Allocation) -> Result<()> {
        if allocation.bundles.len() != self.agents() {
            return Err(Error::input(format!(
                "allocation has {} bundles for {} agents",
                allocation.bundles.len(),
                self.agents()
            )));
        }
        let mut seen = vec![false; self.items];
        for (agent, bundle) in allocation.bundles.iter().enumerate() {
            self.check_bundle(bundle)?;
            for &item in bundle.items() {
                if std::mem::replace(&mut seen[item], true) {
                    return Err(Error::input(format!("item {item} is allocated twice (again to agent {agent})")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::input(format!("item {missing} is not allocated")));
        }
        Ok(())
    }

    /// Sub-instance on `agents` x `items`, with maps back to this instance's indices.
    pub fn restrict(&self, agents: &[usize], items: &Bundle) -> Result<Restriction> {
        if agents.is_empty() {
            return Err(Error::input("cannot restrict to an empty agent set"));
        }
        let mut agents = agents.to_vec();
        agents.sort_unstable();
        if agents.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("agent set contains duplicates"));
        }
        for &a in &agents {
            self.check_agent(a)?;
        }
        self.check_bundle(items)?;
        let values = agents.iter().map(|&a| items.items().iter().map(|&j| self.values[a][j]).collect()).collect();
        let instance = Instance::with_items(items.len(), values)?;
        Ok(Restriction { instance, agents, items: items.items().to_vec() })
    }
}

/// A sorted set of item indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Bundle(Vec<usize>);

impl Bundle {
    pub fn empty() -> Self {
        Bundle(Vec::new())
    }

    /// Accepts indices in any order; rejects duplicates.
    pub fn new(mut items: Vec<usize>) -> Result<Self> {
        items.sort_unstable();
        if let Some(w) = items.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::input(format!("item {} appears twice in a bundle", w[0])));
        }
        Ok(Bundle(items))
    }

    /// Caller guarantees strictly increasing indices.
    pub(crate) fn from_sorted(items: Vec<usize>) -> Self {
        debug_assert!(items.windows(2).all(|w| w[0] < w[1]));
        Bundle(items)
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.0.binary_search(&item).is_ok()
    }

    pub fn union(&self, other: &Bundle) -> Bundle {
        let mut items = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            let next = match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) if x < y => a.next(),
                (Some(&&x), Some(&&y)) if x > y => b.next(),
                (Some(_), Some(_)) => {
                    b.next();
                    a.next()
                }
                (Some(_), None) => a.next(),
                (None, Some(_)) => b.next(),
                (None, None) => break,
            };
            items.extend(next.copied());
        }
        Bundle(items)
    }

    pub fn union_all<'a>(parts: impl IntoIterator<Item = &'a Bundle>) -> Bundle {
        parts.into_iter().fold(Bundle::empty(), |acc, b| acc.union(b))
    }

    /// Items of `self` that are not in `other`.
    pub fn difference(&self, other: &Bundle) -> Bundle {
        Bundle(self.0.iter().copied().filter(|&j| !other.contains(j)).collect())
    }

    pub fn is_disjoint(&self, other: &Bundle) -> bool {
        self.0.iter().all(|&j| !other.contains(j))
    }
}

impl TryFrom<Vec<usize>> for Bundle {
    type Error = Error;

    fn try_from(items: Vec<usize>) -> Result<Self> {
        Bundle::new(items)
    }
}

impl From<Bundle> for Vec<usize> {
    fn from(b: Bundle) -> Self {
        b.0
    }
}

impl FromIterator<usize> for Bundle {
    /// Collects, sorts and deduplicates.
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut items: Vec<usize> = iter.into_iter().collect();
        items.sort_unstable();
        items.dedup();
        Bundle(items)
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

/// One bundle per agent; `bundles[i]` is agent `i`'s bundle.
///
/// Completeness is checked against an instance with
/// [`Instance::check_allocation`], not on construction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    pub bundles: Vec<Bundle>,
}

impl Allocation {
    pub fn new(bundles: Vec<Bundle>) -> Self {
        Allocation { bundles }
    }

    pub fn empty(agents: usize) -> Self {
        Allocation { bundles: vec![Bundle::empty(); agents] }
    }

    /// Builds the allocation in which item `j` goes to `owners[j]`.
    pub fn from_owners(agents: usize, owners: &[usize]) -> Self {
        let mut bundles = vec![Vec::new(); agents];
        for (item, &owner) in owners.iter().enumerate() {
            bundles[owner].push(item);
        }
        Allocation { bundles: bundles.into_iter().map(Bundle::from_sorted).collect() }
    }

    pub fn from_lists(lists: Vec<Vec<usize>>) -> Result<Self> {
        Ok(Allocation { bundles: lists.into_iter().map(Bundle::new).collect::<Result<_>>()? })
    }

    pub fn agents(&self) -> usize {
        self.bundles.len()
    }

    pub fn bundle(&self, agent: usize) -> &Bundle {
        &self.bundles[agent]
    }

    /// `owners[j]` is the agent holding item `j`; `None` for unallocated items.
    pub fn owners(&self, items: usize) -> Vec<Option<usize>> {
        let mut owners = vec![None; items];
        for (agent, bundle) in self.bundles.iter().enumerate() {
            for &j in bundle.items() {
                if j < items {
                    owners[j] = Some(agent);
                }
            }
        }
        owners
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, b) in self.bundles.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

/// A sub-instance together with the original indices of its agents and items.
#[derive(Debug, Clone)]
pub struct Restriction {
    pub instance: Instance,
    /// `agents[a]` is the original index of sub-agent `a`.
    pub agents: Vec<usize>,
    /// `items[j]` is the original index of sub-item `j`.
    pub items: Vec<usize>,
}

impl Restriction {
    /// Maps a sub-bundle back to original item indices.
    pub fn lift_bundle(&self, bundle: &Bundle) -> Bundle {
        // `items` is increasing, so the image stays sorted.
        Bundle::from_sorted(bundle.items().iter().map(|&j| self.items[j]).collect())
    }

    /// Maps every sub-bundle back, paired with the original agent index.
    pub fn lift(&self, allocation: &Allocation) -> Vec<(usize, Bundle)> {
        allocation.bundles.iter().enumerate().map(|(a, b)| (self.agents[a], self.lift_bundle(b))).collect()
    }
}

/// An exact non-negative rational threshold `numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Share {
    numerator: i128,
    denominator: i128,
}

impl Share {
    pub fn new(numerator: i128, denominator: i128) -> Result<Self> {
        if denominator <= 0 {
            return Err(Error::input("share denominator must be positive"));
        }
        Ok(Share { numerator, denominator })
    }

    /// The share `k/n` of `total`.
    pub fn fraction_of(total: Value, k: u32, n: u32) -> Self {
        assert!(n > 0, "fraction with zero denominator");
        Share { numerator: i128::from(k) * i128::from(total), denominator: i128::from(n) }
    }

    pub fn numerator(&self) -> i128 {
        self.numerator
    }

    pub fn denominator(&self) -> i128 {
        self.denominator
    }
}

impl fmt::Display for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// Sign of `lhs - rhs`, by cross-multiplication.
pub fn share_compare(lhs: i128, rhs: Share) -> Ordering {
    (lhs * rhs.denominator).cmp(&rhs.numerator)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i_cp() -> Instance {
        Instance::new(vec![vec![40, 30, 20, 10]]).unwrap()
    }

    fn i_eps() -> Instance {
        Instance::identical(3, vec![94, 1, 1, 1, 1, 1, 1]).unwrap()
    }

    fn i_2a() -> Instance {
        Instance::new(vec![vec![60, 40], vec![10, 90]]).unwrap()
    }

    fn b(items: &[usize]) -> Bundle {
        Bundle::new(items.to_vec()).unwrap()
    }

    #[test]
    fn value_of_examples() {
        assert_eq!(i_cp().value_of(0, &b(&[0, 3])).unwrap(), 50);
        assert_eq!(i_cp().value_of(0, &Bundle::empty()).unwrap(), 0);
        assert_eq!(i_eps().value_of(1, &b(&[1, 2, 3])).unwrap(), 3);
    }

    #[test]
    fn value_of_rejects_bad_indices() {
        assert!(matches!(i_cp().value_of(1, &b(&[0])), Err(Error::Input(_))));
        assert!(matches!(i_cp().value_of(0, &b(&[4])), Err(Error::Input(_))));
    }

    #[test]
    fn share_compare_examples() {
        let third = Share::new(100, 3).unwrap();
        assert_eq!(share_compare(33, third), Ordering::Less);
        assert_eq!(share_compare(34, third), Ordering::Greater);
        assert_eq!(share_compare(50, Share::new(100, 2).unwrap()), Ordering::Equal);
        assert!(Share::new(1, 0).is_err());
    }

    #[test]
    fn restrict_examples() {
        let r = i_eps().restrict(&[1, 2], &b(&[1, 2, 3, 4, 5, 6])).unwrap();
        assert_eq!(r.instance.agents(), 2);
        assert_eq!(r.instance.items(), 6);
        assert!(r.instance.rows().iter().flatten().all(|&v| v == 1));

        let r = i_2a().restrict(&[0], &b(&[0, 1])).unwrap();
        assert_eq!(r.instance.rows(), &[vec![60, 40]]);

        assert!(matches!(i_2a().restrict(&[], &b(&[0])), Err(Error::Input(_))));
    }

    #[test]
    fn restrict_then_lift_recovers_original_indices() {
        let inst = i_eps();
        let r = inst.restrict(&[2, 0], &b(&[1, 4, 6])).unwrap();
        assert_eq!(r.agents, vec![0, 2]);
        let sub = Allocation::from_lists(vec![vec![0, 2], vec![1]]).unwrap();
        let lifted = r.lift(&sub);
        assert_eq!(lifted, vec![(0, b(&[1, 6])), (2, b(&[4]))]);
    }

    #[test]
    fn allocation_validation() {
        let inst = i_2a();
        let ok = Allocation::from_lists(vec![vec![1], vec![0]]).unwrap();
        inst.check_allocation(&ok).unwrap();
        let dup = Allocation::from_lists(vec![vec![0, 1], vec![0]]).unwrap();
        assert!(inst.check_allocation(&dup).is_err());
        let missing = Allocation::from_lists(vec![vec![0], vec![]]).unwrap();
        assert!(inst.check_allocation(&missing).is_err());
        let short = Allocation::from_lists(vec![vec![0, 1]]).unwrap();
        assert!(inst.check_allocation(&short).is_err());
    }

    #[test]
    fn json_formats() {
        let inst: Instance = serde_json::from_str(r#"{"n": 2, "m": 2, "values": [[60, 40], [10, 90]]}"#).unwrap();
        assert_eq!(inst, i_2a());
        assert_eq!(inst.total(1), 100);
        let back: Instance = serde_json::from_str(&serde_json::to_string(&inst).unwrap()).unwrap();
        assert_eq!(back, inst);

        assert!(serde_json::from_str::<Instance>(r#"{"n": 2, "m": 2, "values": [[1, 2]]}"#).is_err());
        assert!(serde_json::from_str::<Instance>(r#"{"n": 1, "m": 3, "values": [[1, 2]]}"#).is_err());
        assert!(serde_json::from_str::<Instance>(r#"{"n": 1, "m": 1, "values": [[-1]]}"#).is_err());

        let x: Allocation = serde_json::from_str(r#"{"bundles": [[1], [0]]}"#).unwrap();
        assert_eq!(x.bundles[0], b(&[1]));
        assert!(serde_json::from_str::<Allocation>(r#"{"bundles": [[1, 1], [0]]}"#).is_err());
    }

    #[test]
    fn bundle_set_ops() {
        let x = b(&[0, 2, 5]);
        let y = b(&[1, 2, 7]);
        assert_eq!(x.union(&y), b(&[0, 1, 2, 5, 7]));
        assert_eq!(x.difference(&y), b(&[0, 5]));
        assert!(!x.is_disjoint(&y));
        assert!(x.is_disjoint(&b(&[1, 3])));
    }
}
