//! Efficiency-adjusted deferred acceptance with a consent set.
//!
//! Repeats: run DA, find the latest round in which a consenting interrupter
//! was rejected, remove the school from the list of every consenting
//! interrupter rejected in that round. Stops when no consenting interrupter is
//! left.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::da::{interrupters, run_da_with_prefs};
use crate::error::{Error, Result};
use crate::model::{Matching, Problem, School, Student};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct ConsentSet {
    members: BTreeSet<Student>,
}

impl ConsentSet {
    pub fn new(members: impl IntoIterator<Item = Student>) -> Self {
        Self {
            members: members.into_iter().collect(),
        }
    }

    pub fn all(problem: &Problem) -> Self {
        Self::new(problem.students())
    }

    pub fn none() -> Self {
        Self::default()
    }

    /// Parses `all`, `none`, or a comma-separated list of student names.
    pub fn parse(problem: &Problem, spec: &str) -> Result<Self> {
        match spec.trim() {
            "all" => Ok(Self::all(problem)),
            "none" | "" => Ok(Self::none()),
            list => list
                .split(',')
                .map(|name| problem.student_by_name(name.trim()))
                .collect::<Result<BTreeSet<_>>>()
                .map(|members| Self { members }),
        }
    }

    fn from_mask(mask: u64) -> Self {
        Self::new((0..64).filter(|k| mask >> k & 1 == 1).map(Student))
    }

    pub fn contains(&self, i: Student) -> bool {
        self.members.contains(&i)
    }

    pub fn members(&self) -> &BTreeSet<Student> {
        &self.members
    }

    pub fn with(&self, i: Student) -> Self {
        let mut members = self.members.clone();
        members.insert(i);
        Self { members }
    }

    /// Students outside the consent set.
    pub fn complement(&self, problem: &Problem) -> BTreeSet<Student> {
        problem.students().filter(|i| !self.contains(*i)).collect()
    }

    pub fn display(&self, problem: &Problem) -> String {
        let names: Vec<&str> = self
            .members
            .iter()
            .map(|&i| problem.student_name(i))
            .collect();
        format!("{{{}}}", names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EadaIteration {
    /// Deletions applied before this DA run (empty for the first run).
    pub deleted: Vec<(Student, School)>,
    pub matching: Matching,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EadaRun {
    pub iterations: Vec<EadaIteration>,
    pub final_matching: Matching,
}

impl EadaRun {
    pub fn render(&self, problem: &Problem) -> String {
        let mut out = String::new();
        for (k, it) in self.iterations.iter().enumerate() {
            let deleted: Vec<String> = it
                .deleted
                .iter()
                .map(|&(i, s)| {
                    format!(
                        "{} drops {}",
                        problem.student_name(i),
                        problem.school_name(s)
                    )
                })
                .collect();
            let assignment: Vec<String> = problem
                .students()
                .map(|i| {
                    format!(
                        "{}:{}",
                        problem.student_name(i),
                        problem.slot_name(it.matching.school_of(i))
                    )
                })
                .collect();
            out += &format!(
                "iteration {k}: [{}] -> {}\n",
                deleted.join(", "),
                assignment.join(" ")
            );
        }
        out
    }
}

pub fn run_eada(problem: &Problem, consent: &ConsentSet) -> (Matching, EadaRun) {
    let mut prefs = problem.all_prefs().to_vec();
    let (mut matching, mut trace) = run_da_with_prefs(problem, &prefs);
    let mut iterations = vec![EadaIteration {
        deleted: Vec::new(),
        matching: matching.clone(),
    }];
    loop {
        let pairs: Vec<_> = interrupters(problem, &trace)
            .into_iter()
            .filter(|p| consent.contains(p.student))
            .collect();
        let Some(last) = pairs.iter().map(|p| p.rejection_round).max() else {
            break;
        };
        let deleted: Vec<(Student, School)> = pairs
            .iter()
            .filter(|p| p.rejection_round == last)
            .map(|p| (p.student, p.school))
            .collect();
        for &(i, s) in &deleted {
            prefs[i.0].retain(|&t| t != s);
        }
        (matching, trace) = run_da_with_prefs(problem, &prefs);
        iterations.push(EadaIteration {
            deleted,
            matching: matching.clone(),
        });
    }
    let run = EadaRun {
        iterations,
        final_matching: matching.clone(),
    };
    (matching, run)
}

pub const ORBIT_LIMIT: usize = 20;

/// EADA outcome for every consent set, ordered by bit mask over student ids.
pub fn eada_orbit(problem: &Problem) -> Result<Vec<(ConsentSet, Matching)>> {
    let n = problem.num_students();
    if n > ORBIT_LIMIT {
        return Err(Error::TooManyStudents {
            students: n,
            limit: ORBIT_LIMIT,
        });
    }
    Ok((0..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            let w = ConsentSet::from_mask(mask);
            let (m, _) = run_eada(problem, &w);
            (w, m)
        })
        .collect())
}
