//! Constructive PROPm solver for up to five agents (more when big items reduce the count).
//!
//! Every frame (the instance or a restriction of it) is solved by agent 0,
//! the divider, building its CP ladder. A case split on the other agents'
//! valuations then either hands out rungs directly or passes a union of
//! rungs to a smaller group of agents. Each agent in that group values the
//! union at least at its proportional share within the group, and the group
//! is solved recursively.

mod certificate;

pub use certificate::{
    check_certificate, for_each_frame, verify_certificate, Assignment, Certificate, Comparison, Relation, Role, Rung,
    Step, LEMMAS,
};

use serde::{Deserialize, Serialize};

use crate::cpsets::cp_ladder;
use crate::error::{Error, Result};
use crate::fairness::{check, Notion};
use crate::model::{Allocation, Bundle, Instance};

/// Largest agent count the case analysis covers.
pub const MAX_CASE_AGENTS: usize = 5;

/// An item handed out by [`reduce_big_items`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigItem {
    pub agent: usize,
    pub item: usize,
}

/// Result of the big-item reduction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    /// Items handed out, in the order they were removed.
    pub assignments: Vec<BigItem>,
    /// Comparison `n' * v(item) > v(items left)` justifying each assignment.
    pub comparisons: Vec<Comparison>,
    /// Agents that received nothing, in increasing order.
    pub residual_agents: Vec<usize>,
    /// Items nobody received.
    pub residual_items: Bundle,
}

/// Repeatedly gives the lexicographically smallest `(agent, item)` with
/// `n' * v_agent(item) > v_agent(M')` to that agent, where `n'` and `M'`
/// are the agents and items still unassigned.
pub fn reduce_big_items(inst: &Instance) -> Reduction {
    let mut agents: Vec<usize> = (0..inst.agents()).collect();
    let mut items = inst.all_items();
    let mut assignments = Vec::new();
    let mut comparisons = Vec::new();
    'outer: while agents.len() > 1 {
        let scale = agents.len() as u32;
        for (pos, &i) in agents.iter().enumerate() {
            let total = inst.bundle_value(i, &items);
            for &j in items.items() {
                if u128::from(scale) * u128::from(inst.value(i, j)) > u128::from(total) {
                    let single = Bundle::from_sorted(vec![j]);
                    comparisons.push(Comparison {
                        agent: i,
                        lhs_scale: scale,
                        lhs_value: inst.value(i, j),
                        lhs_items: single.clone(),
                        relation: Relation::Gt,
                        rhs_scale: 1,
                        rhs_value: total,
                        rhs_items: items.clone(),
                    });
                    assignments.push(BigItem { agent: i, item: j });
                    items = items.difference(&single);
                    agents.remove(pos);
                    continue 'outer;
                }
            }
        }
        break;
    }
    Reduction { assignments, comparisons, residual_agents: agents, residual_items: items }
}

/// A PROPm allocation of `inst` together with a replayable certificate.
pub fn solve_propm(inst: &Instance) -> Result<(Allocation, Certificate)> {
    let solved = solve_frame(inst)?;
    ensure_propm(inst, &solved.0)?;
    Ok(solved)
}

/// Two agents, without big-item reduction at the top level.
pub fn solve2(inst: &Instance) -> Result<(Allocation, Certificate)> {
    solve_exact(inst, 2)
}

/// Three agents, without big-item reduction at the top level.
pub fn solve3(inst: &Instance) -> Result<(Allocation, Certificate)> {
    solve_exact(inst, 3)
}

/// Four agents, without big-item reduction at the top level.
pub fn solve4(inst: &Instance) -> Result<(Allocation, Certificate)> {
    solve_exact(inst, 4)
}

/// Five agents, without big-item reduction at the top level.
pub fn solve5(inst: &Instance) -> Result<(Allocation, Certificate)> {
    solve_exact(inst, 5)
}

fn solve_exact(inst: &Instance, n: usize) -> Result<(Allocation, Certificate)> {
    if inst.agents() != n {
        return Err(Error::input(format!("expected {n} agents, got {}", inst.agents())));
    }
    let solved = solve_cases(inst)?;
    ensure_propm(inst, &solved.0)?;
    Ok(solved)
}

fn ensure_propm(inst: &Instance, x: &Allocation) -> Result<()> {
    let report = check(inst, x, Notion::Propm)?;
    if !report.all_satisfied {
        let who: Vec<usize> = report.violators().collect();
        return Err(Error::invariant(format!("solver output {x} is not PROPm for agents {who:?}")));
    }
    Ok(())
}

/// Frames with at most [`MAX_CASE_AGENTS`] agents go straight to the case
/// analysis, which needs no small-item assumption; larger frames first hand
/// out big items until few enough agents remain.
fn solve_frame(inst: &Instance) -> Result<(Allocation, Certificate)> {
    if inst.agents() <= MAX_CASE_AGENTS {
        return solve_cases(inst);
    }
    let reduction = reduce_big_items(inst);
    if reduction.assignments.is_empty() {
        return Err(Error::UnsupportedSize { agents: inst.agents() });
    }
    let mut frame = Frame::new(inst);
    for (big, comparison) in reduction.assignments.iter().zip(reduction.comparisons) {
        frame.steps.push(Step::BigItemReduction { agent: big.agent, item: big.item, comparison });
        frame.give(big.agent, Bundle::from_sorted(vec![big.item]))?;
    }
    frame.delegate(&reduction.residual_agents, &reduction.residual_items, Vec::new())?;
    frame.finish()
}

fn solve_cases(inst: &Instance) -> Result<(Allocation, Certificate)> {
    match inst.agents() {
        1 => {
            let mut f = Frame::new(inst);
            f.case("n1.single-agent", vec![], vec![], vec![(0, inst.all_items())])?;
            f.finish()
        }
        2 => cases2(inst),
        3 => cases3(inst),
        4 => cases4(inst),
        5 => cases5(inst),
        agents => Err(Error::UnsupportedSize { agents }),
    }
}

/// Certificate under construction for one frame.
struct Frame<'a> {
    inst: &'a Instance,
    bundles: Vec<Option<Bundle>>,
    steps: Vec<Step>,
    comparisons: Vec<Comparison>,
}

impl<'a> Frame<'a> {
    fn new(inst: &'a Instance) -> Self {
        Frame { inst, bundles: vec![None; inst.agents()], steps: Vec::new(), comparisons: Vec::new() }
    }

    fn n(&self) -> u32 {
        self.inst.agents() as u32
    }

    fn give(&mut self, agent: usize, items: Bundle) -> Result<()> {
        match &mut self.bundles[agent] {
            Some(_) => Err(Error::invariant(format!("agent {agent} handed two bundles"))),
            slot => {
                *slot = Some(items);
                Ok(())
            }
        }
    }

    /// Records `den * v_agent(items) >= num * v_agent(M)` (or `<`) and returns whether it holds.
    fn share(&mut self, agent: usize, items: &Bundle, num: u32, den: u32) -> bool {
        let all = self.inst.all_items();
        let c = compare(self.inst, agent, den, items, num, &all, false);
        let ok = c.relation == Relation::Ge;
        self.comparisons.push(c);
        ok
    }

    /// Records `share` and fails the solve if it does not hold.
    fn require(&mut self, agent: usize, items: &Bundle, num: u32, den: u32) -> Result<()> {
        if self.share(agent, items, num, den) {
            Ok(())
        } else {
            Err(Error::invariant(format!("agent {agent} values {items} below {num}/{den} of the frame")))
        }
    }

    /// Agent's preferred bundle of two; ties go to `first`.
    fn favourite(&mut self, agent: usize, first: usize, second: usize, rungs: &[Bundle]) -> (usize, usize) {
        let c = compare(self.inst, agent, 1, &rungs[first], 1, &rungs[second], false);
        let prefers_first = c.relation == Relation::Ge;
        self.comparisons.push(c);
        if prefers_first {
            (first, second)
        } else {
            (second, first)
        }
    }

    fn ladder(&mut self, names: &[&str]) -> Vec<Bundle> {
        let ladder = cp_ladder(self.inst, 0, names.len(), &self.inst.all_items());
        let rungs = names
            .iter()
            .zip(&ladder.rungs)
            .map(|(name, items)| Rung { name: (*name).to_string(), items: items.clone() })
            .collect();
        self.steps.push(Step::LadderBuilt { divider: 0, rungs });
        ladder.rungs
    }

    /// Records the case and its direct assignments, consuming pending comparisons.
    fn case(
        &mut self,
        lemma: &str,
        roles: Vec<(&str, usize)>,
        extra: Vec<Comparison>,
        assignments: Vec<(usize, Bundle)>,
    ) -> Result<()> {
        debug_assert!(LEMMAS.contains(&lemma), "unlisted lemma {lemma}");
        let mut comparisons = std::mem::take(&mut self.comparisons);
        comparisons.extend(extra);
        for (agent, items) in &assignments {
            self.give(*agent, items.clone())?;
        }
        self.steps.push(Step::CaseApplied {
            agents: self.inst.agents(),
            lemma: lemma.to_string(),
            roles: roles.into_iter().map(|(role, agent)| Role { role: role.to_string(), agent }).collect(),
            comparisons,
            assignments: assignments.into_iter().map(|(agent, items)| Assignment { agent, items }).collect(),
        });
        Ok(())
    }

    /// `agents` share `items`; each must value it at `|agents|/n` of the frame.
    fn split(&mut self, agents: &[usize], items: &Bundle) -> Result<()> {
        let mut agents = agents.to_vec();
        agents.sort_unstable();
        let all = self.inst.all_items();
        let mut hypotheses = Vec::with_capacity(agents.len());
        for &a in &agents {
            let c = compare(self.inst, a, self.n(), items, agents.len() as u32, &all, false);
            if c.relation != Relation::Ge {
                return Err(Error::invariant(format!("split hypothesis fails: {c}")));
            }
            hypotheses.push(c);
        }
        self.delegate(&agents, items, hypotheses)
    }

    fn delegate(&mut self, agents: &[usize], items: &Bundle, hypotheses: Vec<Comparison>) -> Result<()> {
        let r = self.inst.restrict(agents, items)?;
        let (sub, certificate) = solve_frame(&r.instance)?;
        for (agent, bundle) in r.lift(&sub) {
            self.give(agent, bundle)?;
        }
        self.steps.push(Step::SubSplit { agents: r.agents.clone(), items: items.clone(), hypotheses, certificate });
        Ok(())
    }

    fn finish(self) -> Result<(Allocation, Certificate)> {
        let bundles = self
            .bundles
            .into_iter()
            .enumerate()
            .map(|(a, b)| b.ok_or_else(|| Error::invariant(format!("agent {a} left without a bundle"))))
            .collect::<Result<Vec<_>>>()?;
        let cert = Certificate { agents: self.inst.agents(), items: self.inst.items(), steps: self.steps };
        Ok((Allocation::new(bundles), cert))
    }
}

/// `ls * v(lhs)` against `rs * v(rhs)`, recorded as `>=`/`<` (or `>`/`<=` when `strict`).
fn compare(inst: &Instance, agent: usize, ls: u32, lhs: &Bundle, rs: u32, rhs: &Bundle, strict: bool) -> Comparison {
    let lhs_value = inst.bundle_value(agent, lhs);
    let rhs_value = inst.bundle_value(agent, rhs);
    let (l, r) = (u128::from(ls) * u128::from(lhs_value), u128::from(rs) * u128::from(rhs_value));
    let relation = match (strict, l >= r, l > r) {
        (false, true, _) => Relation::Ge,
        (false, false, _) => Relation::Lt,
        (true, _, true) => Relation::Gt,
        (true, _, false) => Relation::Le,
    };
    Comparison {
        agent,
        lhs_scale: ls,
        lhs_items: lhs.clone(),
        lhs_value,
        relation,
        rhs_scale: rs,
        rhs_items: rhs.clone(),
        rhs_value,
    }
}

fn union(rungs: &[Bundle], picks: &[usize]) -> Bundle {
    Bundle::union_all(picks.iter().map(|&p| &rungs[p]))
}

fn others(n: usize, excluded: &[usize]) -> Vec<usize> {
    (0..n).filter(|a| !excluded.contains(a)).collect()
}

/// First pair `(k1, k2)`, `k1 != k2`, in bundle order with `p` liking `k1` and `q` liking `k2`.
fn matching(likes_p: &[bool], likes_q: &[bool]) -> Option<(usize, usize)> {
    for (k1, _) in likes_p.iter().enumerate().filter(|(_, &l)| l) {
        if let Some(k2) = (0..likes_q.len()).find(|&k| k != k1 && likes_q[k]) {
            return Some((k1, k2));
        }
    }
    None
}

fn cases2(inst: &Instance) -> Result<(Allocation, Certificate)> {
    let mut f = Frame::new(inst);
    let r = f.ladder(&["A", "B"]);
    let (take, leave) = f.favourite(1, 0, 1, &r);
    f.case("n2.cut-and-choose", vec![("chooser", 1)], vec![], vec![(1, r[take].clone()), (0, r[leave].clone())])?;
    f.finish()
}

fn cases3(inst: &Instance) -> Result<(Allocation, Certificate)> {
    const B: usize = 0;
    const A: usize = 1;
    const C: usize = 2;
    let mut f = Frame::new(inst);
    let r = f.ladder(&["B", "A", "C"]);
    let order = [A, B, C];
    let mut likes = [[false; 3]; 2];
    for (slot, agent) in [1, 2].into_iter().enumerate() {
        for (k, &rung) in order.iter().enumerate() {
            likes[slot][k] = f.share(agent, &r[rung], 1, 3);
        }
    }
    let liked: Vec<usize> = (0..3).filter(|&k| likes[0][k] || likes[1][k]).collect();
    match liked.len() {
        0 => Err(Error::invariant("no bundle of the 3-ladder reaches a third for either agent")),
        1 => {
            if order[liked[0]] == C {
                f.case("n3.one-bundle.C", vec![], vec![], vec![(0, r[B].clone())])?;
                f.split(&[1, 2], &union(&r, &[A, C]))?;
            } else {
                f.case("n3.one-bundle.A-or-B", vec![], vec![], vec![(0, r[C].clone())])?;
                f.split(&[1, 2], &union(&r, &[A, B]))?;
            }
            f.finish()
        }
        _ => {
            let (k1, k2) = matching(&likes[0], &likes[1])
                .ok_or_else(|| Error::invariant("no matching of the 3-ladder despite two liked bundles"))?;
            let rest = (0..3).find(|&k| k != k1 && k != k2).expect("three bundles");
            f.case(
                "n3.two-bundles",
                vec![],
                vec![],
                vec![(1, r[order[k1]].clone()), (2, r[order[k2]].clone()), (0, r[order[rest]].clone())],
            )?;
            f.finish()
        }
    }
}

fn cases4(inst: &Instance) -> Result<(Allocation, Certificate)> {
    const C: usize = 0;
    const B: usize = 1;
    const A: usize = 2;
    const D: usize = 3;
    let mut f = Frame::new(inst);
    let r = f.ladder(&["C", "B", "A", "D"]);
    let ad = union(&r, &[A, D]);
    f.require(0, &ad, 1, 2)?;
    let fans: Vec<usize> = (1..4).filter(|&i| f.share(i, &ad, 1, 2)).collect();
    let rest = others(4, &[&[0][..], &fans[..]].concat());
    match fans.len() {
        0 => {
            let taker = (1..4).find(|&i| f.share(i, &r[D], 1, 4));
            match taker {
                None => {
                    f.case("n4.c=0.divider-takes-D", vec![], vec![], vec![(0, r[D].clone())])?;
                    f.split(&[1, 2, 3], &union(&r, &[A, B, C]))?;
                }
                Some(t) => {
                    f.case(
                        "n4.c=0.other-takes-D",
                        vec![("taker", t)],
                        vec![],
                        vec![(t, r[D].clone()), (0, r[A].clone())],
                    )?;
                    f.split(&others(4, &[0, t]), &union(&r, &[B, C]))?;
                }
            }
        }
        1 => {
            f.case("n4.c=1", vec![("partner", fans[0])], vec![], vec![])?;
            f.split(&[0, fans[0]], &ad)?;
            f.split(&rest, &union(&r, &[B, C]))?;
        }
        2 => {
            let j = rest[0];
            let (take, leave) = f.favourite(j, B, C, &r);
            f.require(j, &r[take], 1, 4)?;
            f.case("n4.c=2", vec![("chooser", j)], vec![], vec![(j, r[take].clone()), (0, r[leave].clone())])?;
            f.split(&fans, &ad)?;
        }
        _ => {
            let mut taker = None;
            for i in 1..4 {
                let b = f.share(i, &r[B], 1, 4);
                let c = f.share(i, &r[C], 1, 4);
                if b || c {
                    taker = Some(i);
                    break;
                }
            }
            match taker {
                Some(t) => {
                    let (take, leave) = f.favourite(t, B, C, &r);
                    f.case(
                        "n4.c=3.other-takes-B-or-C",
                        vec![("taker", t)],
                        vec![],
                        vec![(t, r[take].clone()), (0, r[leave].clone())],
                    )?;
                    f.split(&others(4, &[0, t]), &ad)?;
                }
                None => {
                    f.case("n4.c=3.divider-takes-C", vec![], vec![], vec![(0, r[C].clone())])?;
                    f.split(&[1, 2, 3], &union(&r, &[A, B, D]))?;
                }
            }
        }
    }
    f.finish()
}

fn cases5(inst: &Instance) -> Result<(Allocation, Certificate)> {
    const D: usize = 0;
    const C: usize = 1;
    const B: usize = 2;
    const A: usize = 3;
    const E: usize = 4;
    let mut f = Frame::new(inst);
    let r = f.ladder(&["D", "C", "B", "A", "E"]);
    let ae = union(&r, &[A, E]);
    let abe = union(&r, &[A, B, E]);
    let cd = union(&r, &[C, D]);
    let bcd = union(&r, &[B, C, D]);
    f.require(0, &ae, 2, 5)?;
    f.require(0, &abe, 3, 5)?;
    let p: Vec<usize> = (1..5).filter(|&i| f.share(i, &abe, 3, 5)).collect();
    let q: Vec<usize> = (1..5).filter(|&i| f.share(i, &ae, 2, 5)).collect();
    let not_p = others(5, &[&[0][..], &p[..]].concat());
    let not_q = others(5, &[&[0][..], &q[..]].concat());

    match p.len() {
        4 => {
            let mut taker = None;
            for i in 1..5 {
                let c = f.share(i, &r[C], 1, 5);
                let d = f.share(i, &r[D], 1, 5);
                if c || d {
                    taker = Some(i);
                    break;
                }
            }
            match taker {
                Some(t) => {
                    let (take, leave) = f.favourite(t, C, D, &r);
                    f.case(
                        "n5.cABE=4.other-takes-C-or-D",
                        vec![("taker", t)],
                        vec![],
                        vec![(t, r[take].clone()), (0, r[leave].clone())],
                    )?;
                    f.split(&others(5, &[0, t]), &abe)?;
                }
                None => {
                    f.case("n5.cABE=4.divider-takes-D", vec![], vec![], vec![(0, r[D].clone())])?;
                    f.split(&[1, 2, 3, 4], &union(&r, &[A, B, C, E]))?;
                }
            }
            return f.finish();
        }
        3 => {
            let j = not_p[0];
            let (take, leave) = f.favourite(j, C, D, &r);
            f.require(j, &r[take], 1, 5)?;
            f.case("n5.cABE=3", vec![("chooser", j)], vec![], vec![(j, r[take].clone()), (0, r[leave].clone())])?;
            f.split(&p, &abe)?;
            return f.finish();
        }
        2 => {
            f.case("n5.cABE=2", vec![("abe", p[0]), ("abe", p[1])], vec![], vec![])?;
            f.split(&[0, p[0], p[1]], &abe)?;
            f.split(&not_p, &cd)?;
            return f.finish();
        }
        _ => {}
    }

    match q.len() {
        0 => match (1..5).find(|&i| f.share(i, &r[E], 1, 5)) {
            None => {
                f.case("n5.cAE=0.divider-takes-E", vec![], vec![], vec![(0, r[E].clone())])?;
                f.split(&[1, 2, 3, 4], &union(&r, &[A, B, C, D]))?;
            }
            Some(t) => {
                f.case(
                    "n5.cAE=0.other-takes-E",
                    vec![("taker", t)],
                    vec![],
                    vec![(t, r[E].clone()), (0, r[A].clone())],
                )?;
                f.split(&others(5, &[0, t]), &bcd)?;
            }
        },
        1 => {
            f.case("n5.cAE=1", vec![("partner", q[0])], vec![], vec![])?;
            f.split(&[0, q[0]], &ae)?;
            f.split(&not_q, &bcd)?;
        }
        2 => {
            let (j1, j2) = (not_q[0], not_q[1]);
            let order = [B, C, D];
            let mut likes = [[false; 3]; 2];
            for (slot, agent) in [j1, j2].into_iter().enumerate() {
                for (k, &rung) in order.iter().enumerate() {
                    likes[slot][k] = f.share(agent, &r[rung], 1, 5);
                }
            }
            let liked: Vec<usize> = (0..3).filter(|&k| likes[0][k] || likes[1][k]).collect();
            match liked.len() {
                0 => return Err(Error::invariant("neither remaining agent likes a bundle among B, C, D")),
                1 => {
                    if order[liked[0]] == D {
                        f.case("n5.cAE=2.one-bundle.D", vec![], vec![], vec![(0, r[B].clone())])?;
                        f.split(&[j1, j2], &cd)?;
                    } else {
                        f.case("n5.cAE=2.one-bundle.B-or-C", vec![], vec![], vec![(0, r[D].clone())])?;
                        f.split(&[j1, j2], &union(&r, &[B, C]))?;
                    }
                }
                _ => {
                    let (k1, k2) = matching(&likes[0], &likes[1])
                        .ok_or_else(|| Error::invariant("no matching among B, C, D despite two liked bundles"))?;
                    let rest = (0..3).find(|&k| k != k1 && k != k2).expect("three bundles");
                    f.case(
                        "n5.cAE=2.two-bundles",
                        vec![],
                        vec![],
                        vec![(j1, r[order[k1]].clone()), (j2, r[order[k2]].clone()), (0, r[order[rest]].clone())],
                    )?;
                }
            }
            f.split(&q, &ae)?;
        }
        4 => {
            let (lemma, pair) = match p.first() {
                Some(&pa) => {
                    let mate = *q.iter().find(|&&a| a != pa).expect("four Q agents");
                    ("n5.cAE=4.cABE=1", vec![pa, mate])
                }
                None => ("n5.cAE=4.cABE=0", vec![q[0], q[1]]),
            };
            let rest = others(5, &[&[0][..], &pair[..]].concat());
            f.case(lemma, vec![], vec![], vec![(0, r[B].clone())])?;
            f.split(&pair, &ae)?;
            f.split(&rest, &cd)?;
        }
        _ => {
            let k = not_q[0];
            match p.first() {
                None => {
                    f.case("n5.cAE=3.cABE=0", vec![("outsider", k)], vec![], vec![(0, r[B].clone())])?;
                    f.split(&[q[0], q[1]], &ae)?;
                    f.split(&[q[2], k], &cd)?;
                }
                Some(&pa) if pa == k => {
                    f.require(pa, &r[B], 1, 5)?;
                    f.case("n5.cAE=3.cABE=1.same-agent", vec![("outsider", k)], vec![], vec![(pa, r[B].clone())])?;
                    f.split(&[0, q[0]], &ae)?;
                    f.split(&[q[1], q[2]], &cd)?;
                }
                Some(&pa) => {
                    let rs: Vec<usize> = q.iter().copied().filter(|&a| a != pa).collect();
                    f.case(
                        "n5.cAE=3.cABE=1.distinct-agents",
                        vec![("abe", pa), ("outsider", k)],
                        vec![],
                        vec![(0, r[B].clone())],
                    )?;
                    f.split(&[rs[0], pa], &ae)?;
                    f.split(&[rs[1], k], &cd)?;
                }
            }
        }
    }
    f.finish()
}
