//! SJBC+: grow the beneficiary set from the JBC outcome, then let the final
//! beneficiaries trade among themselves.
//!
//! Expansion works on perfect assignments of improvable students to
//! improvable students (a self-assignment means "stays at DA"). An edge is
//! usable when its label lies inside the current beneficiary set. Each step
//! picks a usable assignment with the fewest self-assignments, forbidding
//! self-assignments of current beneficiaries, so nobody drops out. The
//! students moved by the optimum become the next beneficiary set.
//!
//! Refinement then repeatedly executes a cycle among the beneficiaries in
//! which everyone gets a school she prefers to her current one and no
//! improvable non-beneficiary outranks the student taking a seat.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::analysis::{beneficiaries, Baseline};
use crate::assignment::min_cost_assignment;
use crate::envy::{apply_packing, CyclePacking, LabelledEnvyDigraph};
use crate::jbc::run_jbc_with;
use crate::model::{Matching, Problem, Student};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpansionState {
    pub t: usize,
    pub beneficiaries: BTreeSet<Student>,
    /// Successor of every improvable student; `succ[i] == i` is a self-loop.
    pub succ: BTreeMap<Student, Student>,
}

impl ExpansionState {
    /// Cycles formed by the non-loop successors.
    pub fn packing(&self) -> CyclePacking {
        let mut seen = BTreeSet::new();
        let mut cycles = Vec::new();
        for (&start, &next) in &self.succ {
            if start == next || seen.contains(&start) {
                continue;
            }
            let mut c = Vec::new();
            let mut cur = start;
            while seen.insert(cur) {
                c.push(cur);
                cur = self.succ[&cur];
            }
            cycles.push(c);
        }
        CyclePacking::new(cycles).expect("a permutation splits into disjoint cycles")
    }

    /// Structural checks: `succ` is a permutation, every non-loop edge is an
    /// envy edge with label inside `allowed`, and the beneficiaries are
    /// exactly the non-loop students.
    pub fn check(
        &self,
        problem: &Problem,
        envy: &LabelledEnvyDigraph,
        allowed: &BTreeSet<Student>,
    ) -> bool {
        let targets: BTreeSet<Student> = self.succ.values().copied().collect();
        let keys: BTreeSet<Student> = self.succ.keys().copied().collect();
        if targets != keys {
            return false;
        }
        let movers: BTreeSet<Student> = self
            .succ
            .iter()
            .filter(|(a, b)| a != b)
            .map(|(a, _)| *a)
            .collect();
        movers == self.beneficiaries
            && self.succ.iter().filter(|(a, b)| a != b).all(|(&i, &j)| {
                envy.label(problem, i, j)
                    .is_ok_and(|l| l.iter().all(|h| allowed.contains(h)))
            })
    }
}

/// One expansion step against the beneficiary set of `state`.
pub fn expansion_step(
    problem: &Problem,
    envy: &LabelledEnvyDigraph,
    state: &ExpansionState,
) -> ExpansionState {
    let imp = envy.improvable_list();
    let mut pos = vec![usize::MAX; problem.num_students()];
    for (a, &i) in imp.iter().enumerate() {
        pos[i.0] = a;
    }
    let mut allowed = vec![false; problem.num_students()];
    for &i in &state.beneficiaries {
        allowed[i.0] = true;
    }
    let thresholds = envy.outside_thresholds(problem, &allowed);

    // Cost 0 for a usable edge, 1 for a non-beneficiary staying put.
    // Beneficiaries have no self-loop.
    let edges: Vec<Vec<(usize, i64)>> = imp
        .iter()
        .enumerate()
        .map(|(a, &i)| {
            let mut row: Vec<(usize, i64)> = envy
                .successors(i)
                .iter()
                .filter(|&&j| {
                    pos[j.0] != usize::MAX && envy.label_within(problem, &thresholds, i, j)
                })
                .map(|&j| (pos[j.0], 0))
                .collect();
            if !allowed[i.0] {
                row.push((a, 1));
            }
            row
        })
        .collect();
    let Some((_, cols)) = min_cost_assignment(&edges) else {
        // Unreachable while the previous state is itself feasible.
        return ExpansionState {
            t: state.t + 1,
            ..state.clone()
        };
    };
    let succ: BTreeMap<Student, Student> = imp
        .iter()
        .enumerate()
        .map(|(a, &i)| (i, imp[cols[a]]))
        .collect();
    let beneficiaries = succ
        .iter()
        .filter(|(a, b)| a != b)
        .map(|(a, _)| *a)
        .collect();
    ExpansionState {
        t: state.t + 1,
        beneficiaries,
        succ,
    }
}

/// Initial state from a packing: cycle edges plus self-loops elsewhere.
pub fn state_from_packing(
    envy: &LabelledEnvyDigraph,
    packing: &CyclePacking,
    t: usize,
) -> ExpansionState {
    let mut succ: BTreeMap<Student, Student> =
        envy.improvable().into_iter().map(|i| (i, i)).collect();
    for (i, j) in packing.edges() {
        succ.insert(i, j);
    }
    ExpansionState {
        t,
        beneficiaries: packing.covered(),
        succ,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Expansion {
    pub states: Vec<ExpansionState>,
    pub matching: Matching,
    pub beneficiaries: BTreeSet<Student>,
}

pub fn run_expansion(problem: &Problem) -> (Matching, BTreeSet<Student>) {
    let e = expand(problem, &Baseline::new(problem));
    (e.matching, e.beneficiaries)
}

/// Expansion from the JBC outcome until the beneficiary set stops growing.
pub fn expand(problem: &Problem, base: &Baseline) -> Expansion {
    let (_, graph) = run_jbc_with(problem, base);
    let mut state = state_from_packing(&base.envy, &graph.packing(), 1);
    let mut states = vec![state.clone()];
    if !state.succ.is_empty() {
        loop {
            let next = expansion_step(problem, &base.envy, &state);
            let done = next.beneficiaries == state.beneficiaries;
            states.push(next.clone());
            state = next;
            if done {
                break;
            }
        }
    }
    let matching =
        apply_packing(problem, &base.da, &state.packing()).expect("usable edges are envy edges");
    Expansion {
        states,
        matching,
        beneficiaries: state.beneficiaries,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Refinement {
    pub matching: Matching,
    /// Executed cycles; each member takes her successor's school.
    pub cycles: Vec<Vec<Student>>,
}

pub fn run_refinement(
    problem: &Problem,
    mu_star: &Matching,
    b_star: &BTreeSet<Student>,
) -> Matching {
    refine(problem, &Baseline::new(problem), mu_star, b_star).matching
}

/// Trades among `b_star` along admissible cycles until none is left. Each
/// round executes the cycle through the smallest student lying on any cycle,
/// found by depth-first search with ascending neighbours.
pub fn refine(
    problem: &Problem,
    base: &Baseline,
    mu_star: &Matching,
    b_star: &BTreeSet<Student>,
) -> Refinement {
    let mut allowed = vec![false; problem.num_students()];
    for &i in b_star {
        allowed[i.0] = true;
    }
    let threat = base.envy.outside_thresholds(problem, &allowed);
    let members: Vec<Student> = b_star.iter().copied().collect();
    let mut current = mu_star.clone();
    let mut cycles = Vec::new();

    loop {
        let adj: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| {
                (0..members.len())
                    .filter(|&b| {
                        let j = members[b];
                        let Some(s) = current.school_of(j) else {
                            return false;
                        };
                        i != j
                            && problem.prefers(i, Some(s), current.school_of(i))
                            && problem.priority_rank(s, i) <= threat[s.0]
                    })
                    .collect()
            })
            .collect();
        let Some(cycle) = smallest_cycle(&adj) else {
            break;
        };
        let students: Vec<Student> = cycle.iter().map(|&a| members[a]).collect();
        let seats: Vec<_> = students.iter().map(|&j| current.school_of(j)).collect();
        for (k, &i) in students.iter().enumerate() {
            current.assign(i, seats[(k + 1) % seats.len()]);
        }
        cycles.push(students);
    }
    Refinement {
        matching: current,
        cycles,
    }
}

/// A cycle through the smallest vertex that lies on any cycle.
fn smallest_cycle(adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(adj.len(), 0);
    let nodes: Vec<_> = (0..adj.len()).map(|_| g.add_node(())).collect();
    for (a, succ) in adj.iter().enumerate() {
        for &b in succ {
            g.add_edge(nodes[a], nodes[b], ());
        }
    }
    let mut comp = vec![usize::MAX; adj.len()];
    let mut start = None;
    for (k, c) in tarjan_scc(&g).into_iter().enumerate() {
        if c.len() > 1 {
            for v in &c {
                comp[v.index()] = k;
            }
            let low = c.iter().map(|v| v.index()).min().expect("non-empty");
            start = Some(start.map_or(low, |s: usize| s.min(low)));
        }
    }
    let v = start?;
    // Iterative DFS from v inside its component.
    let mut visited = vec![false; adj.len()];
    let mut path = vec![v];
    let mut cursor = vec![0usize];
    visited[v] = true;
    while let Some(&top) = path.last() {
        let depth = path.len() - 1;
        let succ = &adj[top];
        if cursor[depth] == succ.len() {
            path.pop();
            cursor.pop();
            continue;
        }
        let next = succ[cursor[depth]];
        cursor[depth] += 1;
        if next == v {
            return Some(path);
        }
        if !visited[next] && comp[next] == comp[v] {
            visited[next] = true;
            path.push(next);
            cursor.push(0);
        }
    }
    unreachable!("a vertex in a non-trivial component lies on a cycle")
}

#[derive(Debug, Clone, Serialize)]
pub struct SjbcRun {
    pub expansion: Expansion,
    pub refinement: Refinement,
}

impl SjbcRun {
    pub fn outcome(&self) -> &Matching {
        &self.refinement.matching
    }

    pub fn render_phases(&self, problem: &Problem) -> String {
        let names = |it: &mut dyn Iterator<Item = &Student>| {
            it.map(|&i| problem.student_name(i))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = String::new();
        for st in &self.expansion.states {
            out += &format!(
                "expansion t={} beneficiaries=[{}] packing={}\n",
                st.t,
                names(&mut st.beneficiaries.iter()),
                st.packing().display(problem)
            );
        }
        for c in &self.refinement.cycles {
            out += &format!(
                "refinement cycle ({})\n",
                names(&mut c.iter()).replace(',', " -> ")
            );
        }
        out
    }
}

pub fn run_sjbc_plus(problem: &Problem) -> Matching {
    run_sjbc_plus_with(problem, &Baseline::new(problem))
        .refinement
        .matching
}

pub fn run_sjbc_plus_with(problem: &Problem, base: &Baseline) -> SjbcRun {
    let expansion = expand(problem, base);
    let refinement = refine(problem, base, &expansion.matching, &expansion.beneficiaries);
    debug_assert_eq!(
        beneficiaries(problem, &base.da, &refinement.matching)
            .ok()
            .as_ref(),
        Some(&expansion.beneficiaries)
    );
    SjbcRun {
        expansion,
        refinement,
    }
}
