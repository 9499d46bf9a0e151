//! Close-to-proportional (CP) bundles and the recursive CP ladder.
//!
//! `CP_i(k, S)` is the most valuable `B ⊆ S` with `k * v_i(B) <= v_i(S)`.
//! Ties go to the larger bundle, then to the lexicographically smallest
//! sorted index list, so the result is a function of its inputs.

use serde::{Deserialize, Serialize};

use crate::model::{Bundle, Instance, Value};

/// Subset-sum tables larger than this many cells switch to meet-in-the-middle.
const DP_CELL_LIMIT: usize = 1 << 26;
/// Largest item count the meet-in-the-middle search is used for.
const MITM_MAX_ITEMS: usize = 44;

/// Rungs `[S_n, S_{n-1}, ..., S_1]` built top-down by one divider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpLadder {
    pub divider: usize,
    pub rungs: Vec<Bundle>,
}

impl CpLadder {
    /// The rung `S_k` (1-based, counted from the bottom).
    pub fn rung(&self, k: usize) -> &Bundle {
        &self.rungs[self.rungs.len() - k]
    }

    /// Union of all rungs.
    pub fn items(&self) -> Bundle {
        Bundle::union_all(&self.rungs)
    }
}

/// `CP_agent(k, set)`.
pub fn cp_bundle(inst: &Instance, agent: usize, k: usize, set: &Bundle) -> Bundle {
    assert!(k >= 1, "CP bundle needs k >= 1");
    let values: Vec<Value> = set.items().iter().map(|&j| inst.value(agent, j)).collect();
    let cap = values.iter().sum::<Value>() / k as Value;
    let cells = (values.len() + 1).saturating_mul(usize::try_from(cap).unwrap_or(usize::MAX).saturating_add(1));
    let chosen = if cells > DP_CELL_LIMIT && values.len() <= MITM_MAX_ITEMS {
        best_subset_mitm(&values, cap)
    } else {
        best_subset_dp(&values, cap)
    };
    Bundle::from_sorted(chosen.into_iter().map(|p| set.items()[p]).collect())
}

/// Positions into `values` of the best subset with sum at most `cap`.
///
/// `card[t][s]` is the largest cardinality of a subset of `values[t..]`
/// summing to exactly `s`. Walking forward and taking position `t` whenever
/// the optimum survives yields the lexicographically smallest witness.
fn best_subset_dp(values: &[Value], cap: Value) -> Vec<usize> {
    const NONE: i32 = -1;
    let m = values.len();
    let width = cap as usize + 1;
    let mut card = vec![NONE; (m + 1) * width];
    card[m * width] = 0;
    for t in (0..m).rev() {
        let (row, next) = card.split_at_mut((t + 1) * width);
        let row = &mut row[t * width..];
        let next = &next[..width];
        row.copy_from_slice(next);
        let v = values[t];
        if v <= cap {
            let v = v as usize;
            for s in v..width {
                if next[s - v] != NONE {
                    row[s] = row[s].max(next[s - v] + 1);
                }
            }
        }
    }

    let best_sum = (0..width).rev().find(|&s| card[s] != NONE).unwrap_or(0);
    let mut need_sum = best_sum;
    let mut need_card = card[best_sum];
    let mut chosen = Vec::with_capacity(need_card.max(0) as usize);
    for (t, &v) in values.iter().enumerate() {
        if need_card == 0 {
            break;
        }
        let v = v as usize;
        if v <= need_sum && card[(t + 1) * width + need_sum - v] == need_card - 1 {
            chosen.push(t);
            need_sum -= v;
            need_card -= 1;
        }
    }
    chosen
}

/// Same objective as [`best_subset_dp`], for large values and few items.
///
/// For equal cardinality, the lexicographically smallest sorted position
/// list is the one with the largest bitmask when position 0 is the most
/// significant bit, so the objective is the tuple `(sum, count, mask)`.
fn best_subset_mitm(values: &[Value], cap: Value) -> Vec<usize> {
    let m = values.len();
    let low_len = m / 2;
    let high_len = m - low_len;
    let (low, high) = values.split_at(low_len);

    // mask bit (len - 1 - p) stands for position p of the half.
    let subsets = |half: &[Value]| -> Vec<(Value, u32, u64)> {
        let len = half.len();
        (0u64..1 << len)
            .map(|mask| {
                let sum = (0..len).filter(|p| mask >> (len - 1 - p) & 1 == 1).map(|p| half[p]).sum();
                (sum, mask.count_ones(), mask)
            })
            .collect()
    };

    let mut tail = subsets(high);
    tail.sort_unstable();
    // prefix_best[k] = best tuple among tail[..=k]; tail is sorted by sum.
    let mut prefix_best = Vec::with_capacity(tail.len());
    let mut best_so_far = tail[0];
    for &t in &tail {
        best_so_far = best_so_far.max(t);
        prefix_best.push(best_so_far);
    }

    let mut best: Option<(Value, u32, u64)> = None;
    for (lsum, lcount, lmask) in subsets(low) {
        if lsum > cap {
            continue;
        }
        let room = cap - lsum;
        let idx = tail.partition_point(|t| t.0 <= room);
        if idx == 0 {
            continue;
        }
        let (hsum, hcount, hmask) = prefix_best[idx - 1];
        let candidate = (lsum + hsum, lcount + hcount, lmask << high_len | hmask);
        if best.is_none_or(|b| candidate > b) {
            best = Some(candidate);
        }
    }
    let (_, _, mask) = best.expect("the empty subset is always feasible");
    (0..m).filter(|p| mask >> (m - 1 - p) & 1 == 1).collect()
}

/// Builds `S_n = CP(n, set)`, `S_{n-1} = CP(n-1, set \ S_n)`, ..., with `S_1` the leftover.
pub fn cp_ladder(inst: &Instance, agent: usize, rungs: usize, set: &Bundle) -> CpLadder {
    assert!(rungs >= 1, "a ladder needs at least one rung");
    let mut remaining = set.clone();
    let mut out = Vec::with_capacity(rungs);
    for k in (1..=rungs).rev() {
        let rung = if k == 1 { remaining.clone() } else { cp_bundle(inst, agent, k, &remaining) };
        remaining = remaining.difference(&rung);
        out.push(rung);
    }
    CpLadder { divider: agent, rungs: out }
}

/// Checks a ladder over the item set `set` against every ladder invariant:
/// the rungs partition `set`, each rung is exactly the CP bundle of what is
/// left above it, `k * v(S_k) <= v(remaining)`, and
/// `n * v(set \ (S_n ∪ ... ∪ S_k)) >= (k - 1) * v(set)`.
pub fn validate_ladder(inst: &Instance, ladder: &CpLadder, set: &Bundle) -> bool {
    let n = ladder.rungs.len();
    if n == 0 || ladder.divider >= inst.agents() || inst.check_bundle(set).is_err() {
        return false;
    }
    let agent = ladder.divider;
    let total = inst.bundle_value(agent, set);
    let mut remaining = set.clone();
    for (pos, rung) in ladder.rungs.iter().enumerate() {
        let k = n - pos;
        if !rung.difference(&remaining).is_empty() {
            return false;
        }
        let expected = if k == 1 { remaining.clone() } else { cp_bundle(inst, agent, k, &remaining) };
        if *rung != expected {
            return false;
        }
        let rung_value = u128::from(inst.bundle_value(agent, rung));
        if k as u128 * rung_value > u128::from(inst.bundle_value(agent, &remaining)) {
            return false;
        }
        remaining = remaining.difference(rung);
        let below = u128::from(inst.bundle_value(agent, &remaining));
        if (n as u128) * below < (k as u128 - 1) * u128::from(total) {
            return false;
        }
    }
    remaining.is_empty()
}
