//! Just-below-cutoff trading.
//!
//! Each school that rejected an improvable student points to the DA school of
//! the best-priority improvable student just below its cutoff. Every cycle of
//! that functional graph is a trade with empty labels; all are executed at once.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::analysis::Baseline;
use crate::da::rejecting_schools;
use crate::envy::{apply_packing, CyclePacking, LabelledEnvyDigraph};
use crate::error::{Error, Result};
use crate::model::{Matching, Problem, School, Student};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SchoolGraph {
    /// Schools that rejected at least one improvable student, ascending.
    pub nodes: Vec<School>,
    pub succ: BTreeMap<School, School>,
    /// The just-below-cutoff student of each node.
    pub jbc_student: BTreeMap<School, Student>,
    /// Vertex-disjoint cycles, each starting at its smallest school and
    /// following `succ`.
    pub cycles: Vec<Vec<School>>,
}

impl SchoolGraph {
    /// Student cycles of the trades: the student pointing out of `s` moves
    /// into `s`, taking the seat of the student pointing into `s`.
    pub fn packing(&self) -> CyclePacking {
        self.packing_of(&(0..self.cycles.len()).collect::<Vec<_>>())
    }

    pub fn packing_of(&self, cycle_indices: &[usize]) -> CyclePacking {
        let cycles = cycle_indices
            .iter()
            .map(|&k| {
                self.cycles[k]
                    .iter()
                    .rev()
                    .map(|s| self.jbc_student[s])
                    .collect()
            })
            .collect();
        CyclePacking::new(cycles).expect("school cycles give disjoint student cycles")
    }

    pub fn render(&self, problem: &Problem) -> String {
        let mut out = String::new();
        for s in &self.nodes {
            out += &format!(
                "{} -> {} [{}]\n",
                problem.school_name(*s),
                problem.school_name(self.succ[s]),
                problem.student_name(self.jbc_student[s])
            );
        }
        for c in &self.cycles {
            let names: Vec<&str> = c.iter().map(|&s| problem.school_name(s)).collect();
            out += &format!("cycle ({})\n", names.join(" -> "));
        }
        out
    }
}

/// Lowest-priority DA occupant of `school`.
pub fn cutoff_student(problem: &Problem, da: &Matching, school: School) -> Result<Student> {
    problem.check_school(school)?;
    problem
        .students()
        .filter(|&i| da.school_of(i) == Some(school))
        .max_by_key(|&i| problem.priority_rank(school, i))
        .ok_or(Error::EmptySchool(school))
}

/// Improvable students who prefer `school` to their DA seat but rank below its
/// cutoff. Non-empty exactly for schools that rejected an improvable student.
pub fn below_cutoff_set(
    problem: &Problem,
    da: &Matching,
    improvable: &BTreeSet<Student>,
    school: School,
) -> Result<BTreeSet<Student>> {
    let cutoff = cutoff_student(problem, da, school).map_err(|_| Error::NotRejecting(school))?;
    let set: BTreeSet<Student> = improvable
        .iter()
        .copied()
        .filter(|&i| {
            problem.prefers(i, Some(school), da.school_of(i)) && problem.outranks(school, cutoff, i)
        })
        .collect();
    if set.is_empty() {
        return Err(Error::NotRejecting(school));
    }
    Ok(set)
}

pub fn school_graph(problem: &Problem, base: &Baseline) -> SchoolGraph {
    let improvable = base.envy.improvable();
    if improvable.is_empty() {
        return SchoolGraph::default();
    }
    let nodes: Vec<School> = rejecting_schools(problem, &base.trace, &improvable)
        .expect("improvable students are valid")
        .into_iter()
        .collect();
    let mut succ = BTreeMap::new();
    let mut jbc_student = BTreeMap::new();
    for &s in &nodes {
        let a = below_cutoff_set(problem, &base.da, &improvable, s)
            .expect("schools rejecting an improvable student have a below-cutoff set");
        let best = a
            .into_iter()
            .min_by_key(|&i| problem.priority_rank(s, i))
            .expect("non-empty");
        jbc_student.insert(s, best);
        succ.insert(
            s,
            base.da
                .school_of(best)
                .expect("improvable students hold a seat"),
        );
    }
    let cycles = functional_cycles(&nodes, &succ);
    SchoolGraph {
        nodes,
        succ,
        jbc_student,
        cycles,
    }
}

/// Cycles of a functional graph by pointer chasing with visit stamps.
fn functional_cycles(nodes: &[School], succ: &BTreeMap<School, School>) -> Vec<Vec<School>> {
    let mut stamp: BTreeMap<School, usize> = BTreeMap::new();
    let mut cycles = Vec::new();
    for (walk, &start) in nodes.iter().enumerate() {
        let mut path = Vec::new();
        let mut cur = start;
        while !stamp.contains_key(&cur) {
            stamp.insert(cur, walk);
            path.push(cur);
            cur = succ[&cur];
        }
        if stamp[&cur] == walk {
            let from = path.iter().position(|&s| s == cur).expect("on this walk");
            let mut cycle = path[from..].to_vec();
            let k = (0..cycle.len())
                .min_by_key(|&k| cycle[k])
                .expect("non-empty");
            cycle.rotate_left(k);
            cycles.push(cycle);
        }
    }
    cycles.sort_unstable();
    cycles
}

pub fn run_jbc(problem: &Problem) -> (Matching, SchoolGraph) {
    run_jbc_with(problem, &Baseline::new(problem))
}

pub fn run_jbc_with(problem: &Problem, base: &Baseline) -> (Matching, SchoolGraph) {
    let graph = school_graph(problem, base);
    let m =
        apply_packing(problem, &base.da, &graph.packing()).expect("JBC trades follow envy edges");
    (m, graph)
}

/// Every matching obtained by executing a subset of the JBC cycles, tagged
/// with the subset as a bit mask over `SchoolGraph::cycles`.
pub fn family_by_subset(problem: &Problem, base: &Baseline) -> Result<Vec<(u64, Matching)>> {
    let graph = school_graph(problem, base);
    let c = graph.cycles.len();
    if c > 20 {
        return Err(Error::InvalidConfig(format!(
            "{c} JBC cycles is too many to enumerate subsets"
        )));
    }
    (0..1u64 << c)
        .map(|mask| {
            let chosen: Vec<usize> = (0..c).filter(|k| mask >> k & 1 == 1).collect();
            Ok((
                mask,
                apply_packing(problem, &base.da, &graph.packing_of(&chosen))?,
            ))
        })
        .collect()
}

pub fn strongly_justifiable_family(problem: &Problem) -> Result<BTreeSet<Matching>> {
    Ok(family_by_subset(problem, &Baseline::new(problem))?
        .into_iter()
        .map(|(_, m)| m)
        .collect())
}

/// True iff every traded edge of `packing` has an empty label.
pub fn all_labels_empty(
    problem: &Problem,
    envy: &LabelledEnvyDigraph,
    packing: &CyclePacking,
) -> bool {
    packing
        .edges()
        .all(|(i, j)| envy.label(problem, i, j).is_ok_and(|l| l.is_empty()))
}
