//! Envy digraph of the DA outcome.
//!
//! Edge `i -> j` means `i` prefers `j`'s DA school to her own. The label of the
//! edge is the set of improvable students whose priority at that school would
//! be violated if `i` took `j`'s seat while they stayed put. Labels are
//! computed on demand; the per-school thresholds below answer "is this label
//! inside a given set" in constant time.

use std::collections::BTreeSet;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Matching, Problem, School, Student};

#[derive(Debug, Clone)]
pub struct LabelledEnvyDigraph {
    da: Matching,
    out: Vec<Vec<Student>>,
    inc: Vec<Vec<Student>>,
    sccs: Vec<Vec<Student>>,
    scc_of: Vec<usize>,
    improvable: Vec<bool>,
    /// Per school, improvable students preferring it to their DA school.
    envious: Vec<Vec<Student>>,
}

pub fn build_envy(problem: &Problem, da: &Matching) -> LabelledEnvyDigraph {
    let n = problem.num_students();
    let mut out = vec![Vec::new(); n];
    let mut inc = vec![Vec::new(); n];
    for i in problem.students() {
        let own = da.school_of(i);
        for j in problem.students() {
            if let Some(target) = da.school_of(j) {
                if i != j && problem.prefers(i, Some(target), own) {
                    out[i.0].push(j);
                    inc[j.0].push(i);
                }
            }
        }
    }

    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<NodeIndex> = (0..n).map(|_| graph.add_node(())).collect();
    for (i, succ) in out.iter().enumerate() {
        for j in succ {
            graph.add_edge(nodes[i], nodes[j.0], ());
        }
    }
    let mut sccs: Vec<Vec<Student>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut c: Vec<Student> = c.into_iter().map(|v| Student(v.index())).collect();
            c.sort_unstable();
            c
        })
        .collect();
    sccs.sort_unstable();
    let mut scc_of = vec![0; n];
    let mut improvable = vec![false; n];
    for (k, c) in sccs.iter().enumerate() {
        for &i in c {
            scc_of[i.0] = k;
            improvable[i.0] = c.len() > 1;
        }
    }

    let mut envious = vec![Vec::new(); problem.num_schools()];
    for h in problem.students().filter(|h| improvable[h.0]) {
        for &s in problem.prefs(h) {
            if !problem.prefers(h, Some(s), da.school_of(h)) {
                break;
            }
            envious[s.0].push(h);
        }
    }

    LabelledEnvyDigraph {
        da: da.clone(),
        out,
        inc,
        sccs,
        scc_of,
        improvable,
        envious,
    }
}

impl LabelledEnvyDigraph {
    pub fn da(&self) -> &Matching {
        &self.da
    }

    pub fn num_students(&self) -> usize {
        self.out.len()
    }

    pub fn has_edge(&self, i: Student, j: Student) -> bool {
        self.out[i.0].binary_search(&j).is_ok()
    }

    /// Out-neighbours of `i`, ascending.
    pub fn successors(&self, i: Student) -> &[Student] {
        &self.out[i.0]
    }

    /// In-neighbours of `j`, ascending.
    pub fn predecessors(&self, j: Student) -> &[Student] {
        &self.inc[j.0]
    }

    pub fn num_edges(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// All edges in (source, target) order.
    pub fn edges(&self) -> impl Iterator<Item = (Student, Student)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, succ)| succ.iter().map(move |&j| (Student(i), j)))
    }

    /// Strongly connected components, each sorted, in ascending order.
    pub fn sccs(&self) -> &[Vec<Student>] {
        &self.sccs
    }

    pub fn scc_index(&self, i: Student) -> usize {
        self.scc_of[i.0]
    }

    pub fn is_improvable(&self, i: Student) -> bool {
        self.improvable[i.0]
    }

    pub fn improvable(&self) -> BTreeSet<Student> {
        self.students_where(true)
    }

    pub fn unimprovable(&self) -> BTreeSet<Student> {
        self.students_where(false)
    }

    pub fn improvable_list(&self) -> Vec<Student> {
        self.students_where(true).into_iter().collect()
    }

    fn students_where(&self, flag: bool) -> BTreeSet<Student> {
        (0..self.improvable.len())
            .filter(|&i| self.improvable[i] == flag)
            .map(Student)
            .collect()
    }

    /// Improvable students who prefer `s` to their DA school.
    pub fn envious_of(&self, s: School) -> &[Student] {
        &self.envious[s.0]
    }

    /// Label of edge `i -> j`, ascending.
    pub fn label(&self, problem: &Problem, i: Student, j: Student) -> Result<Vec<Student>> {
        if !self.has_edge(i, j) {
            return Err(Error::InvalidPacking(format!(
                "{i} -> {j} is not an envy edge"
            )));
        }
        let s = self.da.school_of(j).expect("edge targets hold a DA seat");
        let mut label: Vec<Student> = self.envious[s.0]
            .iter()
            .copied()
            .filter(|&h| problem.outranks(s, h, i))
            .collect();
        label.sort_unstable();
        Ok(label)
    }

    /// For each school, the best priority rank among improvable students
    /// outside `allowed` who prefer the school to their DA seat (`u32::MAX`
    /// when there is none). Edge `i -> j` has its label inside `allowed` iff
    /// `i`'s rank at `j`'s DA school is at most that threshold (equality
    /// means the threshold student is `i` herself).
    pub fn outside_thresholds(&self, problem: &Problem, allowed: &[bool]) -> Vec<u32> {
        problem
            .schools()
            .map(|s| {
                self.envious[s.0]
                    .iter()
                    .filter(|h| !allowed[h.0])
                    .map(|&h| problem.priority_rank(s, h))
                    .min()
                    .unwrap_or(u32::MAX)
            })
            .collect()
    }

    /// Whether the label of the (existing) edge `i -> j` avoids everyone
    /// outside the set behind `thresholds`.
    #[inline]
    pub fn label_within(
        &self,
        problem: &Problem,
        thresholds: &[u32],
        i: Student,
        j: Student,
    ) -> bool {
        let s = self.da.school_of(j).expect("edge targets hold a DA seat");
        problem.priority_rank(s, i) <= thresholds[s.0]
    }
}

/// Vertex-disjoint cycles of students, each rotated so its smallest member
/// leads, ordered by leader.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct CyclePacking {
    cycles: Vec<Vec<Student>>,
}

impl CyclePacking {
    pub fn new(cycles: Vec<Vec<Student>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut canon = Vec::with_capacity(cycles.len());
        for c in cycles {
            if c.len() < 2 {
                return Err(Error::InvalidPacking(
                    "cycles need at least two students".into(),
                ));
            }
            for &i in &c {
                if !seen.insert(i) {
                    return Err(Error::InvalidPacking(format!("{i} appears twice")));
                }
            }
            canon.push(rotate_to_min(c));
        }
        canon.sort_unstable();
        Ok(Self { cycles: canon })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn cycles(&self) -> &[Vec<Student>] {
        &self.cycles
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn covered(&self) -> BTreeSet<Student> {
        self.cycles.iter().flatten().copied().collect()
    }

    /// Traded edges `(i, j)`: `i` takes `j`'s seat.
    pub fn edges(&self) -> impl Iterator<Item = (Student, Student)> + '_ {
        self.cycles
            .iter()
            .flat_map(|c| (0..c.len()).map(move |k| (c[k], c[(k + 1) % c.len()])))
    }

    pub fn display(&self, problem: &Problem) -> String {
        self.cycles
            .iter()
            .map(|c| {
                let names: Vec<&str> = c.iter().map(|&i| problem.student_name(i)).collect();
                format!("({})", names.join(" -> "))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn rotate_to_min(mut c: Vec<Student>) -> Vec<Student> {
    let k = c
        .iter()
        .enumerate()
        .min_by_key(|(_, &i)| i)
        .map(|(k, _)| k)
        .unwrap_or(0);
    c.rotate_left(k);
    c
}

/// Each cycle member takes her successor's DA seat; everyone else keeps DA.
pub fn apply_packing(problem: &Problem, da: &Matching, packing: &CyclePacking) -> Result<Matching> {
    let mut m = da.clone();
    for (i, j) in packing.edges() {
        problem.check_student(i)?;
        problem.check_student(j)?;
        let target = da.school_of(j);
        if target.is_none() || !problem.prefers(i, target, da.school_of(i)) {
            return Err(Error::InvalidPacking(format!(
                "{i} -> {j} is not an envy edge"
            )));
        }
        m.assign(i, target);
    }
    Ok(m)
}

/// Union of the labels of the traded edges.
pub fn packing_label(
    problem: &Problem,
    digraph: &LabelledEnvyDigraph,
    packing: &CyclePacking,
) -> Result<BTreeSet<Student>> {
    let mut out = BTreeSet::new();
    for (i, j) in packing.edges() {
        out.extend(digraph.label(problem, i, j)?);
    }
    Ok(out)
}

/// Recovers the packing that turns `da` into `matching`, if movers permute DA
/// seats along envy edges. With multi-seat schools, arrivals and departures at
/// a school are paired in ascending id order (labels do not depend on which
/// seat at a school is taken).
pub fn decompose_as_packing(
    problem: &Problem,
    da: &Matching,
    matching: &Matching,
) -> Option<CyclePacking> {
    if matching.len() != da.len() {
        return None;
    }
    let m = problem.num_schools();
    let mut arrivals = vec![Vec::new(); m];
    let mut departures = vec![Vec::new(); m];
    for i in problem.students() {
        let (old, new) = (da.school_of(i), matching.school_of(i));
        if old == new {
            continue;
        }
        let (Some(old), Some(new)) = (old, new) else {
            return None;
        };
        if new.0 >= m || !problem.prefers(i, Some(new), Some(old)) {
            return None;
        }
        arrivals[new.0].push(i);
        departures[old.0].push(i);
    }
    let mut succ = vec![None; problem.num_students()];
    for s in 0..m {
        if arrivals[s].len() != departures[s].len() {
            return None;
        }
        for (&i, &j) in arrivals[s].iter().zip(&departures[s]) {
            succ[i.0] = Some(j);
        }
    }

    let mut visited = vec![false; problem.num_students()];
    let mut cycles = Vec::new();
    for start in problem.students() {
        if visited[start.0] || succ[start.0].is_none() {
            continue;
        }
        let mut cycle = Vec::new();
        let mut cur = start;
        while !visited[cur.0] {
            visited[cur.0] = true;
            cycle.push(cur);
            cur = succ[cur.0].expect("movers form a permutation");
        }
        debug_assert_eq!(cur, start);
        cycles.push(cycle);
    }
    CyclePacking::new(cycles).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::run_da;
    use crate::fixtures;

    fn names(p: &Problem, xs: &[&str]) -> Vec<Student> {
        xs.iter().map(|x| p.student_by_name(x).unwrap()).collect()
    }

    fn label(p: &Problem, g: &LabelledEnvyDigraph, i: &str, j: &str) -> Vec<Student> {
        let mut want = g
            .label(
                p,
                p.student_by_name(i).unwrap(),
                p.student_by_name(j).unwrap(),
            )
            .unwrap();
        want.sort_unstable();
        want
    }

    #[test]
    fn ex1_labels_and_improvable_set() {
        let p = fixtures::ex1();
        let g = build_envy(&p, &fixtures::ex1_da(&p));
        assert_eq!(label(&p, &g, "i1", "i6"), names(&p, &["i3", "i5"]));
        assert!(label(&p, &g, "i1", "i4").is_empty());
        assert_eq!(label(&p, &g, "i5", "i4"), names(&p, &["i1", "i6"]));
        assert_eq!(
            g.improvable(),
            names(&p, &["i1", "i2", "i3", "i4", "i5", "i6"])
                .into_iter()
                .collect()
        );
        assert_eq!(g.unimprovable(), [p.student_by_name("i7").unwrap()].into());
    }

    #[test]
    fn exnoeff_labels() {
        let p = fixtures::exnoeff();
        let (da, _) = run_da(&p);
        let g = build_envy(&p, &da);
        assert_eq!(label(&p, &g, "i6", "i2"), names(&p, &["i4"]));
        assert_eq!(label(&p, &g, "i6", "i4"), names(&p, &["i1"]));
        assert_eq!(label(&p, &g, "i5", "i4"), names(&p, &["i1", "i6"]));
    }

    #[test]
    fn aligned_preferences_have_no_envy() {
        let order: Vec<usize> = (0..4).collect();
        let p = Problem::from_indices(vec![order.clone(); 4], vec![vec![]; 4], vec![1; 4]).unwrap();
        let (da, _) = run_da(&p);
        let g = build_envy(&p, &da);
        // Lower students envy higher ones, but no envy closes a cycle.
        assert!(g.num_edges() > 0);
        assert!(g.improvable().is_empty());
        assert!(g.sccs().iter().all(|c| c.len() == 1));
    }

    #[test]
    fn packings_apply_and_decompose() {
        let p = fixtures::ex1();
        let da = fixtures::ex1_da(&p);
        let jbc = CyclePacking::new(vec![names(&p, &["i4", "i5", "i1"])]).unwrap();
        assert_eq!(jbc.cycles()[0], names(&p, &["i1", "i4", "i5"]));
        assert_eq!(apply_packing(&p, &da, &jbc).unwrap(), fixtures::ex1_jbc(&p));
        assert_eq!(
            decompose_as_packing(&p, &da, &fixtures::ex1_jbc(&p)),
            Some(jbc)
        );

        let pe = CyclePacking::new(vec![
            names(&p, &["i1", "i2"]),
            names(&p, &["i3", "i6", "i4", "i5"]),
        ])
        .unwrap();
        assert_eq!(
            apply_packing(&p, &da, &pe).unwrap(),
            fixtures::ex1_justifiable_pe(&p)
        );
        assert_eq!(apply_packing(&p, &da, &CyclePacking::empty()).unwrap(), da);
        assert_eq!(
            decompose_as_packing(&p, &da, &da),
            Some(CyclePacking::empty())
        );
    }

    #[test]
    fn packing_labels_of_ex1() {
        let p = fixtures::ex1();
        let da = fixtures::ex1_da(&p);
        let g = build_envy(&p, &da);
        let jbc = CyclePacking::new(vec![names(&p, &["i1", "i4", "i5"])]).unwrap();
        assert!(packing_label(&p, &g, &jbc).unwrap().is_empty());
        let swap = CyclePacking::new(vec![names(&p, &["i1", "i2"])]).unwrap();
        assert_eq!(
            packing_label(&p, &g, &swap).unwrap(),
            names(&p, &["i5"]).into_iter().collect()
        );
        assert!(packing_label(&p, &g, &CyclePacking::empty())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn invalid_packings_are_rejected() {
        let p = fixtures::ex1();
        let da = fixtures::ex1_da(&p);
        assert!(
            CyclePacking::new(vec![names(&p, &["i1", "i2"]), names(&p, &["i2", "i1"])]).is_err()
        );
        // i7 does not envy i1.
        let bad = CyclePacking::new(vec![names(&p, &["i7", "i1"])]).unwrap();
        assert!(apply_packing(&p, &da, &bad).is_err());
    }

    #[test]
    fn non_permutations_do_not_decompose() {
        let p = fixtures::ex1();
        let da = fixtures::ex1_da(&p);
        let mut m = da.clone();
        m.assign(
            p.student_by_name("i1").unwrap(),
            Some(p.school_by_name("s3").unwrap()),
        );
        m.assign(p.student_by_name("i3").unwrap(), None);
        assert_eq!(decompose_as_packing(&p, &da, &m), None);
    }

    #[test]
    fn thresholds_match_labels() {
        let p = fixtures::ex1();
        let da = fixtures::ex1_da(&p);
        let g = build_envy(&p, &da);
        let allowed: Vec<bool> = (0..7).map(|i| [0, 3, 4].contains(&i)).collect();
        let thr = g.outside_thresholds(&p, &allowed);
        for (i, j) in g.edges() {
            let inside = g.label(&p, i, j).unwrap().iter().all(|h| allowed[h.0]);
            assert_eq!(g.label_within(&p, &thr, i, j), inside, "{i}->{j}");
        }
    }
}
