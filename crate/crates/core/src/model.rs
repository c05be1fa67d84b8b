//! Problem instances, matchings, rank functions and the priority-violation
//! predicates every other module is built on.
//!
//! Students and schools are dense indices in declaration order. The null school
//! (being unassigned) is represented as `None` wherever a school is optional.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Student(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct School(pub usize);

impl Student {
    pub fn index(self) -> usize {
        self.0
    }
}

impl School {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for Student {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for School {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A 1-based position in a preference or priority list; lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rank(pub u32);

/// A school choice problem with strict preferences, strict priorities and quotas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    student_names: Vec<String>,
    school_names: Vec<String>,
    prefs: Vec<Vec<School>>,
    priorities: Vec<Vec<Student>>,
    quotas: Vec<usize>,
    // pref_rank[i][s]: 1-based position, or len + 2 when unlisted.
    pref_rank: Vec<Vec<u32>>,
    // priority_rank[s][i]: 1-based position in the complete priority list.
    priority_rank: Vec<Vec<u32>>,
    completed_priorities: bool,
}

impl Problem {
    /// Builds a problem whose priority lists are complete permutations.
    pub fn new(
        student_names: Vec<String>,
        school_names: Vec<String>,
        prefs: Vec<Vec<School>>,
        priorities: Vec<Vec<Student>>,
        quotas: Vec<usize>,
    ) -> Result<Self> {
        let n = student_names.len();
        if let Some((s, list)) = priorities.iter().enumerate().find(|(_, l)| l.len() != n) {
            return Err(Error::InvalidInstance(format!(
                "priority list of school {} ranks {} of {} students",
                school_names.get(s).map(String::as_str).unwrap_or("?"),
                list.len(),
                n
            )));
        }
        Self::completing(student_names, school_names, prefs, priorities, quotas)
    }

    /// Builds a problem, completing partial priority lists by appending every
    /// unlisted student in declaration order.
    pub fn completing(
        student_names: Vec<String>,
        school_names: Vec<String>,
        prefs: Vec<Vec<School>>,
        mut priorities: Vec<Vec<Student>>,
        quotas: Vec<usize>,
    ) -> Result<Self> {
        let n = student_names.len();
        let m = school_names.len();
        if prefs.len() != n {
            return Err(Error::InvalidInstance(format!(
                "{} preference lists for {} students",
                prefs.len(),
                n
            )));
        }
        if priorities.len() != m || quotas.len() != m {
            return Err(Error::InvalidInstance(format!(
                "{} priority lists and {} quotas for {} schools",
                priorities.len(),
                quotas.len(),
                m
            )));
        }
        check_unique_names(&student_names, "student")?;
        check_unique_names(&school_names, "school")?;
        for (s, &q) in quotas.iter().enumerate() {
            if q == 0 {
                return Err(Error::InvalidInstance(format!(
                    "school {} has quota 0",
                    school_names[s]
                )));
            }
        }

        let mut pref_rank = vec![vec![0u32; m]; n];
        for (i, list) in prefs.iter().enumerate() {
            let unlisted = list.len() as u32 + 2;
            pref_rank[i].iter_mut().for_each(|r| *r = unlisted);
            for (pos, &s) in list.iter().enumerate() {
                if s.0 >= m {
                    return Err(Error::UnknownSchool(s.0));
                }
                if pref_rank[i][s.0] != unlisted {
                    return Err(Error::InvalidInstance(format!(
                        "student {} lists school {} twice",
                        student_names[i], school_names[s.0]
                    )));
                }
                pref_rank[i][s.0] = pos as u32 + 1;
            }
        }

        let mut completed_priorities = false;
        let mut priority_rank = vec![vec![0u32; n]; m];
        for (s, list) in priorities.iter_mut().enumerate() {
            for (pos, &i) in list.iter().enumerate() {
                if i.0 >= n {
                    return Err(Error::UnknownStudent(i.0));
                }
                if priority_rank[s][i.0] != 0 {
                    return Err(Error::InvalidInstance(format!(
                        "school {} ranks student {} twice",
                        school_names[s], student_names[i.0]
                    )));
                }
                priority_rank[s][i.0] = pos as u32 + 1;
            }
            if list.len() < n {
                completed_priorities = true;
                for (i, rank) in priority_rank[s].iter_mut().enumerate() {
                    if *rank == 0 {
                        list.push(Student(i));
                        *rank = list.len() as u32;
                    }
                }
            }
        }

        Ok(Self {
            student_names,
            school_names,
            prefs,
            priorities,
            quotas,
            pref_rank,
            priority_rank,
            completed_priorities,
        })
    }

    /// Builds a problem from raw indices, naming students `i1..` and schools `s1..`.
    pub fn from_indices(
        prefs: Vec<Vec<usize>>,
        priorities: Vec<Vec<usize>>,
        quotas: Vec<usize>,
    ) -> Result<Self> {
        let student_names = (1..=prefs.len()).map(|k| format!("i{k}")).collect();
        let school_names = (1..=quotas.len()).map(|k| format!("s{k}")).collect();
        Self::completing(
            student_names,
            school_names,
            prefs
                .into_iter()
                .map(|l| l.into_iter().map(School).collect())
                .collect(),
            priorities
                .into_iter()
                .map(|l| l.into_iter().map(Student).collect())
                .collect(),
            quotas,
        )
    }

    pub fn num_students(&self) -> usize {
        self.student_names.len()
    }

    pub fn num_schools(&self) -> usize {
        self.school_names.len()
    }

    pub fn students(&self) -> impl DoubleEndedIterator<Item = Student> + ExactSizeIterator {
        (0..self.num_students()).map(Student)
    }

    pub fn schools(&self) -> impl DoubleEndedIterator<Item = School> + ExactSizeIterator {
        (0..self.num_schools()).map(School)
    }

    pub fn prefs(&self, i: Student) -> &[School] {
        &self.prefs[i.0]
    }

    pub fn all_prefs(&self) -> &[Vec<School>] {
        &self.prefs
    }

    pub fn priorities(&self, s: School) -> &[Student] {
        &self.priorities[s.0]
    }

    pub fn quota(&self, s: School) -> usize {
        self.quotas[s.0]
    }

    pub fn quotas(&self) -> &[usize] {
        &self.quotas
    }

    pub fn completed_priorities(&self) -> bool {
        self.completed_priorities
    }

    pub fn student_name(&self, i: Student) -> &str {
        &self.student_names[i.0]
    }

    pub fn school_name(&self, s: School) -> &str {
        &self.school_names[s.0]
    }

    pub fn student_names(&self) -> &[String] {
        &self.student_names
    }

    pub fn school_names(&self) -> &[String] {
        &self.school_names
    }

    /// Display name of an optional school; the null school prints as `s0`.
    pub fn slot_name(&self, s: Option<School>) -> &str {
        s.map_or("s0", |s| self.school_name(s))
    }

    pub fn student_by_name(&self, name: &str) -> Result<Student> {
        self.student_names
            .iter()
            .position(|n| n == name)
            .map(Student)
            .ok_or_else(|| Error::UnknownName(name.to_owned()))
    }

    pub fn school_by_name(&self, name: &str) -> Result<School> {
        self.school_names
            .iter()
            .position(|n| n == name)
            .map(School)
            .ok_or_else(|| Error::UnknownName(name.to_owned()))
    }

    pub fn check_student(&self, i: Student) -> Result<()> {
        if i.0 < self.num_students() {
            Ok(())
        } else {
            Err(Error::UnknownStudent(i.0))
        }
    }

    pub fn check_school(&self, s: School) -> Result<()> {
        if s.0 < self.num_schools() {
            Ok(())
        } else {
            Err(Error::UnknownSchool(s.0))
        }
    }

    /// Rank of `school` (or the null school) for student `i`. Unlisted schools
    /// share the rank just below the null school.
    #[inline]
    pub fn rank(&self, i: Student, school: Option<School>) -> Rank {
        match school {
            Some(s) => Rank(self.pref_rank[i.0][s.0]),
            None => Rank(self.prefs[i.0].len() as u32 + 1),
        }
    }

    /// Priority rank of student `i` at school `s` (1 = highest priority).
    #[inline]
    pub fn priority_rank(&self, s: School, i: Student) -> u32 {
        self.priority_rank[s.0][i.0]
    }

    /// True iff `i` strictly prefers `a` to `b`.
    #[inline]
    pub fn prefers(&self, i: Student, a: Option<School>, b: Option<School>) -> bool {
        self.rank(i, a) < self.rank(i, b)
    }

    /// True iff `a` has strictly higher priority than `b` at `s`.
    #[inline]
    pub fn outranks(&self, s: School, a: Student, b: Student) -> bool {
        self.priority_rank(s, a) < self.priority_rank(s, b)
    }

    /// True iff `s` is on `i`'s list.
    #[inline]
    pub fn acceptable(&self, i: Student, s: School) -> bool {
        (self.pref_rank[i.0][s.0] as usize) <= self.prefs[i.0].len()
    }
}

fn check_unique_names(names: &[String], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::InvalidInstance(format!(
                "duplicate {what} name `{n}`"
            )));
        }
    }
    Ok(())
}

/// An assignment of every student to a school or to the null school.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Matching {
    assignment: Vec<Option<School>>,
}

impl Matching {
    pub fn new(assignment: Vec<Option<School>>) -> Self {
        Self { assignment }
    }

    /// Everyone unassigned.
    pub fn empty(num_students: usize) -> Self {
        Self::new(vec![None; num_students])
    }

    /// Builds a matching from named pairs; students not mentioned are unassigned.
    pub fn from_names(problem: &Problem, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut m = Self::empty(problem.num_students());
        for (i, s) in pairs {
            m.assign(
                problem.student_by_name(i)?,
                Some(problem.school_by_name(s)?),
            );
        }
        Ok(m)
    }

    #[inline]
    pub fn school_of(&self, i: Student) -> Option<School> {
        self.assignment[i.0]
    }

    pub fn assign(&mut self, i: Student, s: Option<School>) {
        self.assignment[i.0] = s;
    }

    pub fn assignment(&self) -> &[Option<School>] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Students assigned to each school, in ascending student order.
    pub fn rosters(&self, num_schools: usize) -> Vec<Vec<Student>> {
        let mut rosters = vec![Vec::new(); num_schools];
        for (i, s) in self.assignment.iter().enumerate() {
            if let Some(s) = s {
                rosters[s.0].push(Student(i));
            }
        }
        rosters
    }

    /// Fails unless the matching has one entry per student, valid school ids
    /// and no over-full school.
    pub fn check_feasible(&self, problem: &Problem) -> Result<()> {
        if self.assignment.len() != problem.num_students() {
            return Err(Error::InfeasibleMatching(format!(
                "{} entries for {} students",
                self.assignment.len(),
                problem.num_students()
            )));
        }
        let mut load = vec![0usize; problem.num_schools()];
        for s in self.assignment.iter().flatten() {
            problem.check_school(*s)?;
            load[s.0] += 1;
        }
        for s in problem.schools() {
            if load[s.0] > problem.quota(s) {
                return Err(Error::InfeasibleMatching(format!(
                    "school {} holds {} students over quota {}",
                    problem.school_name(s),
                    load[s.0],
                    problem.quota(s)
                )));
            }
        }
        Ok(())
    }

    /// Mean rank of the assigned school over all students.
    pub fn average_rank(&self, problem: &Problem) -> f64 {
        if self.assignment.is_empty() {
            return 0.0;
        }
        let total: u64 = problem
            .students()
            .map(|i| problem.rank(i, self.school_of(i)).0 as u64)
            .sum();
        total as f64 / self.assignment.len() as f64
    }
}

/// A blocking triple: `occupant` holds a seat at `school` that `victim` prefers
/// to her assignment and where `victim` has higher priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub victim: Student,
    pub occupant: Student,
    pub school: School,
}

pub fn rank_of(problem: &Problem, student: Student, school: Option<School>) -> Result<Rank> {
    problem.check_student(student)?;
    if let Some(s) = school {
        problem.check_school(s)?;
    }
    Ok(problem.rank(student, school))
}

/// Every priority violation under `matching`, sorted by (victim, occupant, school).
pub fn violations(problem: &Problem, matching: &Matching) -> Result<Vec<Violation>> {
    matching.check_feasible(problem)?;
    let rosters = matching.rosters(problem.num_schools());
    let mut out = Vec::new();
    for victim in problem.students() {
        let own = matching.school_of(victim);
        for &s in problem.prefs(victim) {
            if !problem.prefers(victim, Some(s), own) {
                break;
            }
            for &occupant in &rosters[s.0] {
                if problem.outranks(s, victim, occupant) {
                    out.push(Violation {
                        victim,
                        occupant,
                        school: s,
                    });
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn respects_priorities_of(
    problem: &Problem,
    matching: &Matching,
    protected: &BTreeSet<Student>,
) -> Result<bool> {
    Ok(violations(problem, matching)?
        .iter()
        .all(|v| !protected.contains(&v.victim)))
}

/// The first (student, school) pair witnessing waste, if any.
pub fn find_waste(problem: &Problem, matching: &Matching) -> Result<Option<(Student, School)>> {
    matching.check_feasible(problem)?;
    let rosters = matching.rosters(problem.num_schools());
    for i in problem.students() {
        let own = matching.school_of(i);
        for &s in problem.prefs(i) {
            if !problem.prefers(i, Some(s), own) {
                break;
            }
            if rosters[s.0].len() < problem.quota(s) {
                return Ok(Some((i, s)));
            }
        }
    }
    Ok(None)
}

pub fn is_nonwasteful(problem: &Problem, matching: &Matching) -> Result<bool> {
    Ok(find_waste(problem, matching)?.is_none())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParetoOrder {
    ADominates,
    BDominates,
    Equal,
    Incomparable,
}

/// Compares two matchings by student ranks.
pub fn pareto_compare(problem: &Problem, a: &Matching, b: &Matching) -> Result<ParetoOrder> {
    a.check_feasible(problem)?;
    b.check_feasible(problem)?;
    Ok(pareto_compare_unchecked(problem, a, b))
}

pub(crate) fn pareto_compare_unchecked(
    problem: &Problem,
    a: &Matching,
    b: &Matching,
) -> ParetoOrder {
    let (mut a_better, mut b_better) = (false, false);
    for i in problem.students() {
        let (ra, rb) = (
            problem.rank(i, a.school_of(i)),
            problem.rank(i, b.school_of(i)),
        );
        if ra < rb {
            a_better = true;
        } else if rb < ra {
            b_better = true;
        }
    }
    match (a_better, b_better) {
        (false, false) => ParetoOrder::Equal,
        (true, false) => ParetoOrder::ADominates,
        (false, true) => ParetoOrder::BDominates,
        (true, true) => ParetoOrder::Incomparable,
    }
}

/// True iff `a` weakly Pareto-dominates `b` (no student ranks worse).
pub fn weakly_dominates(problem: &Problem, a: &Matching, b: &Matching) -> bool {
    problem
        .students()
        .all(|i| problem.rank(i, a.school_of(i)) <= problem.rank(i, b.school_of(i)))
}
