//! Verdicts on matchings that weakly improve on DA: beneficiaries,
//! justifiability, strong justifiability, Pareto efficiency, and the
//! reassignment chain started by a priority claim.

use std::collections::BTreeSet;

use petgraph::algo::is_cyclic_directed;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::da::{run_da, DaTrace};
use crate::envy::{
    build_envy, decompose_as_packing, packing_label, CyclePacking, LabelledEnvyDigraph,
};
use crate::error::{Error, Result};
use crate::model::{find_waste, violations, Matching, Problem, School, Student, Violation};

/// DA outcome, its trace and its envy digraph: everything the verdicts and
/// mechanisms derive from.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub da: Matching,
    pub trace: DaTrace,
    pub envy: LabelledEnvyDigraph,
}

impl Baseline {
    pub fn new(problem: &Problem) -> Self {
        let (da, trace) = run_da(problem);
        let envy = build_envy(problem, &da);
        Self { da, trace, envy }
    }

    pub fn beneficiaries(
        &self,
        problem: &Problem,
        matching: &Matching,
    ) -> Result<BTreeSet<Student>> {
        beneficiaries(problem, &self.da, matching)
    }

    pub fn verdict(&self, problem: &Problem, matching: &Matching) -> Result<Verdict> {
        let beneficiaries = self.beneficiaries(problem, matching)?;
        let tagged: Vec<TaggedViolation> = violations(problem, matching)?
            .into_iter()
            .map(|v| {
                let kind = if beneficiaries.contains(&v.victim) {
                    VictimKind::Beneficiary
                } else if !self.envy.is_improvable(v.victim) {
                    VictimKind::Unimprovable
                } else {
                    VictimKind::ImprovableNonBeneficiary
                };
                TaggedViolation { violation: v, kind }
            })
            .collect();
        let justifiable = tagged
            .iter()
            .all(|t| t.kind != VictimKind::ImprovableNonBeneficiary);
        let packing = decompose_as_packing(problem, &self.da, matching);
        let label = packing
            .as_ref()
            .map(|pk| packing_label(problem, &self.envy, pk))
            .transpose()?;
        let strongly_justifiable = label.as_ref().is_some_and(BTreeSet::is_empty);
        let label_test = label.as_ref().map(|l| l.is_subset(&beneficiaries));
        let pareto_efficient = match find_waste(problem, matching)? {
            Some(_) => false,
            None => strict_envy_is_acyclic(problem, matching),
        };
        Ok(Verdict {
            beneficiaries,
            violations: tagged,
            justifiable,
            strongly_justifiable,
            pareto_efficient,
            packing,
            packing_label: label,
            label_test,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VictimKind {
    Beneficiary,
    Unimprovable,
    ImprovableNonBeneficiary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TaggedViolation {
    pub violation: Violation,
    pub kind: VictimKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub beneficiaries: BTreeSet<Student>,
    pub violations: Vec<TaggedViolation>,
    pub justifiable: bool,
    pub strongly_justifiable: bool,
    pub pareto_efficient: bool,
    /// The cycle packing over DA producing the matching, when there is one.
    pub packing: Option<CyclePacking>,
    pub packing_label: Option<BTreeSet<Student>>,
    /// Label containment `l(packing) ⊆ beneficiaries`, when a packing exists.
    /// Must equal `justifiable`.
    pub label_test: Option<bool>,
}

impl Verdict {
    pub fn render(&self, problem: &Problem) -> String {
        let names = |set: &BTreeSet<Student>| {
            set.iter()
                .map(|&i| problem.student_name(i))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = format!(
            "beneficiaries: [{}]\njustifiable: {}\nstrongly_justifiable: {}\npareto_efficient: {}\n",
            names(&self.beneficiaries),
            self.justifiable,
            self.strongly_justifiable,
            self.pareto_efficient
        );
        match &self.packing {
            Some(pk) => {
                out += &format!("packing: {}\n", pk.display(problem));
                if let Some(l) = &self.packing_label {
                    out += &format!("packing_label: [{}]\n", names(l));
                }
            }
            None => out += "packing: none\n",
        }
        out += &format!("violations: {}\n", self.violations.len());
        for t in &self.violations {
            let kind = match t.kind {
                VictimKind::Beneficiary => "beneficiary",
                VictimKind::Unimprovable => "unimprovable",
                VictimKind::ImprovableNonBeneficiary => "improvable-non-beneficiary",
            };
            out += &format!(
                "  victim {} occupant {} school {} ({kind})\n",
                problem.student_name(t.violation.victim),
                problem.student_name(t.violation.occupant),
                problem.school_name(t.violation.school)
            );
        }
        out
    }
}

/// Students strictly better off than under DA. Fails if anyone is worse off.
pub fn beneficiaries(
    problem: &Problem,
    da: &Matching,
    matching: &Matching,
) -> Result<BTreeSet<Student>> {
    matching.check_feasible(problem)?;
    let mut out = BTreeSet::new();
    for i in problem.students() {
        let (now, base) = (
            problem.rank(i, matching.school_of(i)),
            problem.rank(i, da.school_of(i)),
        );
        if now > base {
            return Err(Error::WorseThanDa(i));
        }
        if now < base {
            out.insert(i);
        }
    }
    Ok(out)
}

pub fn is_justifiable(problem: &Problem, matching: &Matching) -> Result<Verdict> {
    Baseline::new(problem).verdict(problem, matching)
}

pub fn is_strongly_justifiable(problem: &Problem, matching: &Matching) -> Result<bool> {
    Ok(is_justifiable(problem, matching)?.strongly_justifiable)
}

/// Pareto efficiency of a non-wasteful matching: no strict-envy cycle and
/// nobody placed at a school she did not list.
pub fn is_pareto_efficient(problem: &Problem, matching: &Matching) -> Result<bool> {
    if let Some((student, school)) = find_waste(problem, matching)? {
        return Err(Error::Wasteful { student, school });
    }
    Ok(strict_envy_is_acyclic(problem, matching))
}

pub(crate) fn strict_envy_is_acyclic(problem: &Problem, matching: &Matching) -> bool {
    if problem.students().any(|i| {
        matching
            .school_of(i)
            .is_some_and(|s| !problem.acceptable(i, s))
    }) {
        return false;
    }
    // One node per school plus an edge s -> t whenever a student at s prefers
    // t; a cycle there is exactly a cycle of students trading seats.
    let mut occupied = vec![false; problem.num_schools()];
    for s in matching.assignment().iter().flatten() {
        occupied[s.0] = true;
    }
    let mut g = DiGraph::<(), ()>::with_capacity(problem.num_schools(), 0);
    let nodes: Vec<_> = problem.schools().map(|_| g.add_node(())).collect();
    let mut seen = vec![false; problem.num_schools() * problem.num_schools()];
    for i in problem.students() {
        let Some(own) = matching.school_of(i) else {
            continue;
        };
        for &t in problem.prefs(i) {
            if t == own {
                break;
            }
            let key = own.0 * problem.num_schools() + t.0;
            if occupied[t.0] && !seen[key] {
                seen[key] = true;
                g.add_edge(nodes[own.0], nodes[t.0], ());
            }
        }
    }
    !is_cyclic_directed(&g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainStep {
    pub student: Student,
    /// School claimed, or `None` when nothing is left and she ends unassigned.
    pub school: Option<School>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainOutcome {
    Vacuous,
    NonVacuous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReassignmentChain {
    pub steps: Vec<ChainStep>,
    pub outcome: ChainOutcome,
    /// The step limit was hit before the chain settled.
    pub truncated: bool,
}

impl ReassignmentChain {
    pub fn render(&self, problem: &Problem) -> String {
        self.steps
            .iter()
            .map(|st| {
                format!(
                    "{}=>{}",
                    problem.student_name(st.student),
                    problem.slot_name(st.school)
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Claimant takes `school`, freeing her seat and displacing the
/// lowest-priority occupant. Each displaced student claims her most preferred
/// school that has a free seat or whose lowest-priority occupant she outranks.
/// The chain is vacuous when it ends up displacing the claimant from `school`.
pub fn reassignment_chain(
    problem: &Problem,
    matching: &Matching,
    claimant: Student,
    school: School,
) -> Result<ReassignmentChain> {
    problem.check_student(claimant)?;
    problem.check_school(school)?;
    matching.check_feasible(problem)?;
    let mut rosters = matching.rosters(problem.num_schools());
    let violated = problem.prefers(claimant, Some(school), matching.school_of(claimant))
        && rosters[school.0]
            .iter()
            .any(|&o| problem.outranks(school, claimant, o));
    if !violated {
        return Err(Error::NoViolation { claimant, school });
    }

    let lowest = |roster: &[Student], s: School| -> Option<Student> {
        roster
            .iter()
            .copied()
            .max_by_key(|&o| problem.priority_rank(s, o))
    };
    let take = |rosters: &mut Vec<Vec<Student>>, who: Student, s: School| -> Option<Student> {
        let mut displaced = None;
        if rosters[s.0].len() >= problem.quota(s) {
            let d = lowest(&rosters[s.0], s).expect("full school has occupants");
            rosters[s.0].retain(|&o| o != d);
            displaced = Some(d);
        }
        rosters[s.0].push(who);
        displaced
    };

    if let Some(old) = matching.school_of(claimant) {
        rosters[old.0].retain(|&o| o != claimant);
    }
    let mut steps = vec![ChainStep {
        student: claimant,
        school: Some(school),
    }];
    let mut pending = take(&mut rosters, claimant, school);
    let limit = problem.num_students() * (problem.num_schools() + 1) + 1;

    while let Some(d) = pending {
        if steps.len() > limit {
            return Ok(ReassignmentChain {
                steps,
                outcome: ChainOutcome::NonVacuous,
                truncated: true,
            });
        }
        if d == claimant {
            return Ok(ReassignmentChain {
                steps,
                outcome: ChainOutcome::Vacuous,
                truncated: false,
            });
        }
        let claim = problem.prefs(d).iter().copied().find(|&t| {
            rosters[t.0].len() < problem.quota(t)
                || lowest(&rosters[t.0], t).is_some_and(|o| problem.outranks(t, d, o))
        });
        steps.push(ChainStep {
            student: d,
            school: claim,
        });
        pending = claim.and_then(|t| take(&mut rosters, d, t));
    }
    Ok(ReassignmentChain {
        steps,
        outcome: ChainOutcome::NonVacuous,
        truncated: false,
    })
}
