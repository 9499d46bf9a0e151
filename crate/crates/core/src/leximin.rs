//! Adjusted values `v_i(X_i) + ((n-1)/n) * d_i(X)`, their leximin order,
//! and bundle rotation along cycles of the strict EFx-envy graph.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{maximin_value, min_item};
use crate::model::{Allocation, Instance};
use crate::oracle::{enumerate_allocations, Budget};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjustedProfile {
    /// Adjusted value of each agent, by agent index.
    pub values: Vec<Rational>,
    /// The same values in ascending order.
    pub sorted: Vec<Rational>,
}

impl AdjustedProfile {
    pub fn from_values(values: Vec<Rational>) -> Self {
        let mut sorted = values.clone();
        sorted.sort_unstable();
        AdjustedProfile { values, sorted }
    }

    pub fn min(&self) -> Option<Rational> {
        self.sorted.first().copied()
    }
}

pub fn adjusted_profile(inst: &Instance, x: &Allocation) -> Result<AdjustedProfile> {
    inst.check_allocation(x)?;
    Ok(profile_unchecked(inst, x))
}

fn profile_unchecked(inst: &Instance, x: &Allocation) -> AdjustedProfile {
    let n = inst.agents() as i128;
    let values = (0..inst.agents())
        .map(|i| {
            let own = i128::from(inst.bundle_value(i, x.bundle(i)));
            let d = i128::from(maximin_value(inst, i, x));
            Rational::new(n * own + (n - 1) * d, n)
        })
        .collect();
    AdjustedProfile::from_values(values)
}

/// Lexicographic comparison of the ascending-sorted profiles.
pub fn leximin_compare(p: &AdjustedProfile, q: &AdjustedProfile) -> Result<Ordering> {
    if p.sorted.len() != q.sorted.len() {
        return Err(Error::input(format!("profiles of different sizes ({} and {})", p.sorted.len(), q.sorted.len())));
    }
    Ok(p.sorted.cmp(&q.sorted))
}

/// A leximin-maximal allocation; the first one in enumeration order among ties.
pub fn leximin_max(inst: &Instance, budget: Budget) -> Result<(Allocation, AdjustedProfile)> {
    let mut best: Option<(Allocation, AdjustedProfile)> = None;
    for x in enumerate_allocations(inst.agents(), inst.items(), budget)? {
        let profile = profile_unchecked(inst, &x);
        if best.as_ref().is_none_or(|(_, b)| profile.sorted > b.sorted) {
            best = Some((x, profile));
        }
    }
    Ok(best.expect("at least one allocation is enumerated"))
}

/// Strict EFx-envy graph: `i -> j` iff `X_j` is non-empty and
/// `v_i(X_j) - m_i(X_j) > v_i(X_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvyGraph {
    pub agents: usize,
    pub edges: Vec<(usize, usize)>,
}

impl EnvyGraph {
    pub fn build(inst: &Instance, x: &Allocation) -> Self {
        let n = inst.agents();
        let mut edges = Vec::new();
        for i in 0..n {
            let own = inst.bundle_value(i, x.bundle(i));
            for j in (0..n).filter(|&j| j != i) {
                if let Some(least) = min_item(inst, i, x.bundle(j)) {
                    if inst.bundle_value(i, x.bundle(j)) - least > own {
                        edges.push((i, j));
                    }
                }
            }
        }
        EnvyGraph { agents: n, edges }
    }

    fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == v).map(|e| e.1)
    }

    /// The shortest directed cycle, ties broken by the lexicographically
    /// least vertex sequence. Sequences start at their smallest vertex.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        for len in 2..=self.agents {
            for start in 0..self.agents {
                let mut path = vec![start];
                if self.extend(&mut path, len) {
                    return Some(path);
                }
            }
        }
        None
    }

    fn extend(&self, path: &mut Vec<usize>, len: usize) -> bool {
        let start = path[0];
        let last = *path.last().expect("path starts non-empty");
        if path.len() == len {
            return self.successors(last).any(|v| v == start);
        }
        let mut next: Vec<usize> = self.successors(last).filter(|&v| v > start && !path.contains(&v)).collect();
        next.sort_unstable();
        for v in next {
            path.push(v);
            if self.extend(path, len) {
                return true;
            }
            path.pop();
        }
        false
    }

    pub fn has_cycle(&self) -> bool {
        self.find_cycle().is_some()
    }
}

/// Rotates bundles along one cycle of the strict EFx-envy graph: every
/// agent on the cycle takes the bundle of the agent she envies. `None`
/// when the graph is acyclic.
pub fn cycle_swap(inst: &Instance, x: &Allocation) -> Result<Option<Allocation>> {
    inst.check_allocation(x)?;
    let graph = EnvyGraph::build(inst, x);
    let Some(cycle) = graph.find_cycle() else {
        return Ok(None);
    };
    let mut swapped = x.clone();
    for (k, &i) in cycle.iter().enumerate() {
        let j = cycle[(k + 1) % cycle.len()];
        swapped.bundles[i] = x.bundles[j].clone();
    }
    Ok(Some(swapped))
}
