//! Per-agent verifiers for proportionality and envy relaxations.
//!
//! Every verdict is computed as an exact slack `lhs - threshold` and an
//! agent is satisfied iff the slack is non-negative. All notions use weak
//! inequalities. Empty bundles have no minimum item: they are skipped when
//! computing `d_i(X)` and an agent's envy toward an empty bundle is zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Bundle, Instance, Value};
use crate::oracle::{self, Budget};
use crate::rational::Rational;

/// Fairness notions that [`check`] can verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Notion {
    Prop,
    Prop1,
    Propx,
    Propm,
    Ef,
    Ef1,
    Efx,
    Aefx,
    Mms,
    AltMean,
    AltMedian,
    AltMode,
    AltMinimax,
}

impl Notion {
    pub const ALL: [Notion; 13] = [
        Notion::Prop,
        Notion::Prop1,
        Notion::Propx,
        Notion::Propm,
        Notion::Ef,
        Notion::Ef1,
        Notion::Efx,
        Notion::Aefx,
        Notion::Mms,
        Notion::AltMean,
        Notion::AltMedian,
        Notion::AltMode,
        Notion::AltMinimax,
    ];

    /// The four alternatives to PROPm that fail on the seven-item instance.
    pub const ALTERNATIVES: [Notion; 4] = [Notion::AltMean, Notion::AltMedian, Notion::AltMode, Notion::AltMinimax];

    pub fn name(self) -> &'static str {
        match self {
            Notion::Prop => "prop",
            Notion::Prop1 => "prop1",
            Notion::Propx => "propx",
            Notion::Propm => "propm",
            Notion::Ef => "ef",
            Notion::Ef1 => "ef1",
            Notion::Efx => "efx",
            Notion::Aefx => "aefx",
            Notion::Mms => "mms",
            Notion::AltMean => "alt-mean",
            Notion::AltMedian => "alt-median",
            Notion::AltMode => "alt-mode",
            Notion::AltMinimax => "alt-minimax",
        }
    }
}

impl fmt::Display for Notion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Notion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Notion::ALL
            .into_iter()
            .find(|n| n.name() == key || (key == "a-efx" && *n == Notion::Aefx))
            .ok_or_else(|| Error::input(format!("unknown notion {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentVerdict {
    pub satisfied: bool,
    pub slack: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub notion: Notion,
    pub per_agent: Vec<AgentVerdict>,
    pub all_satisfied: bool,
}

impl FairnessReport {
    fn from_slacks(notion: Notion, slacks: Vec<Rational>) -> Self {
        let per_agent: Vec<_> =
            slacks.into_iter().map(|slack| AgentVerdict { satisfied: !slack.is_negative(), slack }).collect();
        let all_satisfied = per_agent.iter().all(|v| v.satisfied);
        FairnessReport { notion, per_agent, all_satisfied }
    }

    pub fn violators(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_agent.iter().enumerate().filter(|(_, v)| !v.satisfied).map(|(i, _)| i)
    }
}

/// `m_i(S)`: the agent's least valuable item in `bundle`, `None` for an empty bundle.
pub fn min_item(inst: &Instance, agent: usize, bundle: &Bundle) -> Option<Value> {
    bundle.items().iter().map(|&j| inst.value(agent, j)).min()
}

fn max_item(inst: &Instance, agent: usize, bundle: &Bundle) -> Option<Value> {
    bundle.items().iter().map(|&j| inst.value(agent, j)).max()
}

/// `d_i(X)`: the largest `m_i(X_k)` over other agents' non-empty bundles, 0 if there are none.
pub fn maximin_value(inst: &Instance, agent: usize, x: &Allocation) -> Value {
    others(x, agent).filter_map(|b| min_item(inst, agent, b)).max().unwrap_or(0)
}

fn others(x: &Allocation, agent: usize) -> impl Iterator<Item = &Bundle> {
    x.bundles.iter().enumerate().filter(move |&(k, _)| k != agent).map(|(_, b)| b)
}

/// Values the agent has for items held by someone else, in item order.
fn outside_values(inst: &Instance, agent: usize, x: &Allocation) -> Vec<Value> {
    others(x, agent).flat_map(|b| b.items().iter().map(move |&j| inst.value(agent, j))).collect()
}

/// Verifies `notion` for every agent of a complete allocation.
///
/// `Mms` runs an exhaustive partition search per agent under the default budget;
/// use [`check_with_budget`] to change it.
pub fn check(inst: &Instance, x: &Allocation, notion: Notion) -> Result<FairnessReport> {
    check_with_budget(inst, x, notion, Budget::default())
}

pub fn check_with_budget(inst: &Instance, x: &Allocation, notion: Notion, budget: Budget) -> Result<FairnessReport> {
    inst.check_allocation(x)?;
    let slacks = (0..inst.agents()).map(|i| agent_slack(inst, x, i, notion, budget)).collect::<Result<Vec<_>>>()?;
    Ok(FairnessReport::from_slacks(notion, slacks))
}

/// Verdicts for several notions at once, skipping repeated validation.
pub fn check_many(inst: &Instance, x: &Allocation, notions: &[Notion]) -> Result<Vec<FairnessReport>> {
    inst.check_allocation(x)?;
    notions
        .iter()
        .map(|&notion| {
            let slacks = (0..inst.agents())
                .map(|i| agent_slack(inst, x, i, notion, Budget::default()))
                .collect::<Result<Vec<_>>>()?;
            Ok(FairnessReport::from_slacks(notion, slacks))
        })
        .collect()
}

fn agent_slack(inst: &Instance, x: &Allocation, i: usize, notion: Notion, budget: Budget) -> Result<Rational> {
    let n = inst.agents() as i128;
    let own = i128::from(inst.bundle_value(i, x.bundle(i)));
    let own_r = Rational::integer(own);
    let share = Rational::new(i128::from(inst.total(i)), n);
    let plus = |bonus: Rational| own_r + bonus - share;
    let int = |v: Value| Rational::integer(i128::from(v));

    let slack = match notion {
        Notion::Prop => own_r - share,
        Notion::Prop1 => plus(int(outside_values(inst, i, x).into_iter().max().unwrap_or(0))),
        Notion::Propx => plus(int(outside_values(inst, i, x).into_iter().min().unwrap_or(0))),
        Notion::Propm => plus(int(maximin_value(inst, i, x))),
        Notion::Aefx => {
            let mins: Value = others(x, i).filter_map(|b| min_item(inst, i, b)).sum();
            plus(Rational::new(i128::from(mins), n))
        }
        Notion::Ef | Notion::Ef1 | Notion::Efx => {
            let envy = others(x, i)
                .map(|b| {
                    let value = inst.bundle_value(i, b);
                    let discount = match notion {
                        Notion::Ef => 0,
                        Notion::Ef1 => max_item(inst, i, b).unwrap_or(0),
                        _ => min_item(inst, i, b).unwrap_or(0),
                    };
                    value - discount
                })
                .max()
                .unwrap_or(0);
            own_r - int(envy)
        }
        Notion::Mms => own_r - int(mms_value_with_budget(inst, i, budget)?),
        Notion::AltMean => {
            let rest = outside_values(inst, i, x);
            let mean = if rest.is_empty() {
                Rational::zero()
            } else {
                Rational::new(rest.iter().map(|&v| i128::from(v)).sum(), rest.len() as i128)
            };
            plus(mean)
        }
        Notion::AltMedian => {
            let mut rest = outside_values(inst, i, x);
            rest.sort_unstable();
            let median = if rest.is_empty() { 0 } else { rest[(rest.len() - 1) / 2] };
            plus(int(median))
        }
        Notion::AltMode => plus(int(mode(outside_values(inst, i, x)))),
        Notion::AltMinimax => {
            // An empty bundle's largest item counts as 0 here.
            let minimax = others(x, i).map(|b| max_item(inst, i, b).unwrap_or(0)).min().unwrap_or(0);
            plus(int(minimax))
        }
    };
    Ok(slack)
}

/// Smallest most-frequent value; 0 for an empty multiset.
fn mode(mut values: Vec<Value>) -> Value {
    values.sort_unstable();
    let mut best = (0usize, 0);
    let mut k = 0;
    while k < values.len() {
        let run = values[k..].iter().take_while(|&&v| v == values[k]).count();
        if run > best.0 {
            best = (run, values[k]);
        }
        k += run;
    }
    best.1
}

/// Maximin share of `agent`: the best achievable worst-bundle value over all
/// partitions of the items into `n` bundles.
pub fn mms_value(inst: &Instance, agent: usize) -> Result<Value> {
    mms_value_with_budget(inst, agent, Budget::default())
}

pub fn mms_value_with_budget(inst: &Instance, agent: usize, budget: Budget) -> Result<Value> {
    inst.check_agent(agent)?;
    let n = inst.agents();
    budget.admit(oracle::allocation_count(n, inst.items()))?;
    if n == 1 {
        return Ok(inst.total(agent));
    }
    // Largest items first so that the pruning bound tightens early.
    let mut values: Vec<Value> = inst.row(agent).to_vec();
    values.sort_unstable_by(|a, b| b.cmp(a));
    let mut sums = vec![0; n];
    let mut best = 0;
    mms_search(&values, 0, 0, &mut sums, &mut best);
    Ok(best)
}

fn mms_search(values: &[Value], next: usize, used: usize, sums: &mut [Value], best: &mut Value) {
    if next == values.len() {
        let worst = sums.iter().copied().min().unwrap_or(0);
        *best = (*best).max(worst);
        return;
    }
    let remaining: Value = values[next..].iter().sum();
    let total: Value = sums.iter().sum::<Value>() + remaining;
    if total / sums.len() as Value <= *best {
        return;
    }
    // Bundles are interchangeable: the item may open at most one new bundle.
    let open = (used + 1).min(sums.len());
    for k in 0..open {
        sums[k] += values[next];
        mms_search(values, next + 1, used.max(k + 1), sums, best);
        sums[k] -= values[next];
    }
}

/// Companion-draft variant of average EFx: strict, with weight `1/(n-1)`,
/// `v_i(X_i) > (1/(n-1)) * sum_{k != i} (v_i(X_k) - m_i(X_k))`.
///
/// Experimental; it is not one of the [`Notion`]s and no result relies on it.
pub fn aefx_companion_satisfied(inst: &Instance, x: &Allocation, agent: usize) -> bool {
    let n = inst.agents() as i128;
    if n < 2 {
        return true;
    }
    let own = i128::from(inst.bundle_value(agent, x.bundle(agent)));
    let discounted: i128 =
        others(x, agent).map(|b| i128::from(inst.bundle_value(agent, b) - min_item(inst, agent, b).unwrap_or(0))).sum();
    (n - 1) * own > discounted
}
