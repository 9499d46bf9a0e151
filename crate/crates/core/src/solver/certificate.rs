//! Replayable record of a solver run and its independent checker.
//!
//! A certificate describes one frame: an instance, or a restriction of its
//! parent frame for [`Step::SubSplit`]. Each agent and each item of a frame
//! is handed out exactly once, either directly (big-item reduction, case
//! assignments) or through a nested sub-split.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cpsets::{validate_ladder, CpLadder};
use crate::model::{Allocation, Bundle, Instance, Value};

/// Identifiers of every case the solver can record.
pub const LEMMAS: &[&str] = &[
    "n1.single-agent",
    "n2.cut-and-choose",
    "n3.two-bundles",
    "n3.one-bundle.A-or-B",
    "n3.one-bundle.C",
    "n4.c=0.divider-takes-D",
    "n4.c=0.other-takes-D",
    "n4.c=1",
    "n4.c=2",
    "n4.c=3.other-takes-B-or-C",
    "n4.c=3.divider-takes-C",
    "n5.cABE=4.other-takes-C-or-D",
    "n5.cABE=4.divider-takes-D",
    "n5.cABE=3",
    "n5.cABE=2",
    "n5.cAE=2.two-bundles",
    "n5.cAE=2.one-bundle.B-or-C",
    "n5.cAE=2.one-bundle.D",
    "n5.cAE=1",
    "n5.cAE=0.divider-takes-E",
    "n5.cAE=0.other-takes-E",
    "n5.cAE=4.cABE=0",
    "n5.cAE=4.cABE=1",
    "n5.cAE=3.cABE=0",
    "n5.cAE=3.cABE=1.same-agent",
    "n5.cAE=3.cABE=1.distinct-agents",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
}

impl Relation {
    pub fn holds(self, lhs: u128, rhs: u128) -> bool {
        match self {
            Relation::Ge => lhs >= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Gt => lhs > rhs,
            Relation::Le => lhs <= rhs,
        }
    }

    pub fn negate(self) -> Self {
        match self {
            Relation::Ge => Relation::Lt,
            Relation::Lt => Relation::Ge,
            Relation::Gt => Relation::Le,
            Relation::Le => Relation::Gt,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Lt => "<",
            Relation::Gt => ">",
            Relation::Le => "<=",
        }
    }
}

/// `lhs_scale * v_agent(lhs_items) <relation> rhs_scale * v_agent(rhs_items)`,
/// with both bundle values recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub agent: usize,
    pub lhs_scale: u32,
    pub lhs_items: Bundle,
    pub lhs_value: Value,
    pub relation: Relation,
    pub rhs_scale: u32,
    pub rhs_items: Bundle,
    pub rhs_value: Value,
}

impl Comparison {
    pub fn holds(&self) -> bool {
        let lhs = u128::from(self.lhs_scale) * u128::from(self.lhs_value);
        let rhs = u128::from(self.rhs_scale) * u128::from(self.rhs_value);
        self.relation.holds(lhs, rhs)
    }

    /// Recomputes both values from `inst` and re-evaluates the relation.
    pub fn recheck(&self, inst: &Instance) -> Result<(), String> {
        inst.check_agent(self.agent).map_err(|e| e.to_string())?;
        inst.check_bundle(&self.lhs_items).map_err(|e| e.to_string())?;
        inst.check_bundle(&self.rhs_items).map_err(|e| e.to_string())?;
        let lhs = inst.bundle_value(self.agent, &self.lhs_items);
        let rhs = inst.bundle_value(self.agent, &self.rhs_items);
        if lhs != self.lhs_value || rhs != self.rhs_value {
            return Err(format!("recorded values differ from the instance in: {self}"));
        }
        if !self.holds() {
            return Err(format!("recorded relation is false: {self}"));
        }
        Ok(())
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agent {}: {}*v{} = {} {} {}*v{} = {}",
            self.agent,
            self.lhs_scale,
            self.lhs_items,
            u128::from(self.lhs_scale) * u128::from(self.lhs_value),
            self.relation.symbol(),
            self.rhs_scale,
            self.rhs_items,
            u128::from(self.rhs_scale) * u128::from(self.rhs_value),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub agent: usize,
    pub items: Bundle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Role {
    pub role: String,
    pub agent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rung {
    pub name: String,
    pub items: Bundle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Step {
    /// `agent` takes `item`; `comparison` is `n' * v(item) > v(residual items)`.
    BigItemReduction { agent: usize, item: usize, comparison: Comparison },
    /// CP ladder of `divider` over all items of the frame, top rung first.
    LadderBuilt { divider: usize, rungs: Vec<Rung> },
    /// One case of the constructive argument for a frame with `agents` agents.
    CaseApplied {
        agents: usize,
        lemma: String,
        roles: Vec<Role>,
        comparisons: Vec<Comparison>,
        assignments: Vec<Assignment>,
    },
    /// `agents` share `items` through a nested solve on the restricted instance.
    SubSplit { agents: Vec<usize>, items: Bundle, hypotheses: Vec<Comparison>, certificate: Certificate },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub agents: usize,
    pub items: usize,
    pub steps: Vec<Step>,
}

impl Certificate {
    /// Lemma identifiers of this frame and all nested frames, depth first.
    pub fn lemmas(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for step in &self.steps {
            match step {
                Step::CaseApplied { lemma, .. } => out.push(lemma.as_str()),
                Step::SubSplit { certificate, .. } => out.extend(certificate.lemmas()),
                _ => {}
            }
        }
        out
    }
}

/// Visits every frame with the instance it refers to, parents before children.
pub fn for_each_frame(inst: &Instance, cert: &Certificate, visit: &mut dyn FnMut(&Instance, &Certificate)) {
    visit(inst, cert);
    for step in &cert.steps {
        if let Step::SubSplit { agents, items, certificate, .. } = step {
            if let Ok(r) = inst.restrict(agents, items) {
                for_each_frame(&r.instance, certificate, visit);
            }
        }
    }
}

/// Accepts iff replaying `cert` on `inst` yields exactly `x` and every
/// recorded comparison, ladder and structural condition re-verifies.
pub fn verify_certificate(inst: &Instance, x: &Allocation, cert: &Certificate) -> bool {
    check_certificate(inst, x, cert).is_ok()
}

/// [`verify_certificate`] with the reason for a rejection.
pub fn check_certificate(inst: &Instance, x: &Allocation, cert: &Certificate) -> Result<(), String> {
    let replayed = replay(inst, cert)?;
    if replayed != *x {
        return Err(format!("certificate replays to {replayed}, not {x}"));
    }
    Ok(())
}

struct Ledger {
    bundles: Vec<Option<Bundle>>,
    owner: Vec<bool>,
}

impl Ledger {
    fn give(&mut self, agent: usize, items: &Bundle) -> Result<(), String> {
        let slot = self.bundles.get_mut(agent).ok_or_else(|| format!("agent {agent} out of range"))?;
        if slot.is_some() {
            return Err(format!("agent {agent} is handed a bundle twice"));
        }
        for &j in items.items() {
            let taken = self.owner.get_mut(j).ok_or_else(|| format!("item {j} out of range"))?;
            if std::mem::replace(taken, true) {
                return Err(format!("item {j} is handed out twice"));
            }
        }
        *slot = Some(items.clone());
        Ok(())
    }
}

fn replay(inst: &Instance, cert: &Certificate) -> Result<Allocation, String> {
    let (n, m) = (inst.agents(), inst.items());
    if cert.agents != n || cert.items != m {
        return Err(format!("certificate is for {}x{} but the instance is {n}x{m}", cert.agents, cert.items));
    }
    let mut ledger = Ledger { bundles: vec![None; n], owner: vec![false; m] };
    let mut ladder: Option<CpLadder> = None;
    let mut direct: Vec<Assignment> = Vec::new();

    for step in &cert.steps {
        match step {
            Step::BigItemReduction { agent, item, comparison } => {
                comparison.recheck(inst)?;
                let single = Bundle::new(vec![*item]).map_err(|e| e.to_string())?;
                if comparison.agent != *agent || comparison.lhs_items != single || comparison.relation != Relation::Gt {
                    return Err(format!("reduction of item {item} to agent {agent} is not justified by {comparison}"));
                }
                ledger.give(*agent, &single)?;
            }
            Step::LadderBuilt { divider, rungs } => {
                if ladder.is_some() {
                    return Err("a frame builds at most one ladder".into());
                }
                let built = CpLadder { divider: *divider, rungs: rungs.iter().map(|r| r.items.clone()).collect() };
                if built.rungs.len() != n || !validate_ladder(inst, &built, &inst.all_items()) {
                    return Err(format!("ladder of agent {divider} is not the CP ladder of this frame"));
                }
                ladder = Some(built);
            }
            Step::CaseApplied { agents, lemma, roles, comparisons, assignments } => {
                if *agents != n {
                    return Err(format!("case {lemma} recorded for {agents} agents in a frame of {n}"));
                }
                if !LEMMAS.contains(&lemma.as_str()) {
                    return Err(format!("unknown lemma {lemma:?}"));
                }
                if let Some(role) = roles.iter().find(|r| r.agent >= n) {
                    return Err(format!("role {} names agent {} out of range", role.role, role.agent));
                }
                for c in comparisons {
                    c.recheck(inst)?;
                }
                for a in assignments {
                    ledger.give(a.agent, &a.items)?;
                    direct.push(a.clone());
                }
            }
            Step::SubSplit { agents, items, hypotheses, certificate } => {
                for h in hypotheses {
                    h.recheck(inst)?;
                    if !agents.contains(&h.agent) {
                        return Err(format!("split hypothesis names agent {} outside the split", h.agent));
                    }
                }
                let r = inst.restrict(agents, items).map_err(|e| e.to_string())?;
                if r.agents != *agents {
                    return Err("split agents must be listed in increasing order".into());
                }
                let sub = replay(&r.instance, certificate)?;
                for (agent, bundle) in r.lift(&sub) {
                    ledger.give(agent, &bundle)?;
                }
            }
        }
    }

    if let Some(missing) = ledger.owner.iter().position(|&t| !t) {
        return Err(format!("item {missing} is never handed out"));
    }
    let bundles = ledger
        .bundles
        .into_iter()
        .enumerate()
        .map(|(a, b)| b.ok_or_else(|| format!("agent {a} never receives a bundle")))
        .collect::<Result<Vec<_>, String>>()?;
    let x = Allocation::new(bundles);
    if let Some(ladder) = &ladder {
        check_non_mixing(ladder, &direct, &x)?;
    }
    Ok(x)
}

/// When the divider is directly handed a non-empty rung `S_l`, no final
/// bundle may combine items of higher rungs with items of lower rungs.
fn check_non_mixing(ladder: &CpLadder, direct: &[Assignment], x: &Allocation) -> Result<(), String> {
    let Some(given) = direct.iter().find(|a| a.agent == ladder.divider) else {
        return Ok(());
    };
    if given.items.is_empty() {
        return Ok(());
    }
    let Some(pos) = ladder.rungs.iter().position(|r| *r == given.items) else {
        return Ok(());
    };
    let higher = Bundle::union_all(&ladder.rungs[..pos]);
    let lower = Bundle::union_all(&ladder.rungs[pos + 1..]);
    for (agent, bundle) in x.bundles.iter().enumerate() {
        if !bundle.is_disjoint(&higher) && !bundle.is_disjoint(&lower) {
            return Err(format!("agent {agent}'s bundle mixes rungs above and below the divider's rung"));
        }
    }
    Ok(())
}
