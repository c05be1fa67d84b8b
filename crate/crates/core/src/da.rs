//! Student-proposing deferred acceptance with simultaneous rounds.
//!
//! Every student rejected in round `r` proposes to her next school in round
//! `r + 1`; round 1 has everyone proposing to her first choice. The trace
//! keeps, per round, only the schools that received applications.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Matching, Problem, School, Student};

/// What happened at one school in one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchoolEvent {
    pub school: School,
    /// New proposals received this round.
    pub applicants: Vec<Student>,
    /// Tentatively held after the round, best priority first.
    pub held: Vec<Student>,
    /// Rejected this round (new applicants or previously held students).
    pub rejected: Vec<Student>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DaRound {
    /// 1-based round number.
    pub number: usize,
    /// Events for schools that received applicants, by ascending school id.
    pub events: Vec<SchoolEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DaTrace {
    pub rounds: Vec<DaRound>,
    pub final_matching: Matching,
}

impl DaTrace {
    pub fn num_proposals(&self) -> usize {
        self.rounds
            .iter()
            .flat_map(|r| &r.events)
            .map(|e| e.applicants.len())
            .sum()
    }

    /// Held sets of every school after each round, carrying forward schools
    /// that saw no applicants.
    pub fn held_by_round(&self, num_schools: usize) -> Vec<Vec<Vec<Student>>> {
        let mut current = vec![Vec::new(); num_schools];
        let mut out = Vec::with_capacity(self.rounds.len());
        for round in &self.rounds {
            for e in &round.events {
                current[e.school.0] = e.held.clone();
            }
            out.push(current.clone());
        }
        out
    }
}

/// A student held at a school, then rejected from it after at least one other
/// student had been rejected there during her stay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct InterruptPair {
    pub student: Student,
    pub school: School,
    pub rejection_round: usize,
}

pub fn run_da(problem: &Problem) -> (Matching, DaTrace) {
    run_da_with_prefs(problem, problem.all_prefs())
}

/// DA on `problem` with its preference lists replaced by `prefs`.
pub fn run_da_with_prefs(problem: &Problem, prefs: &[Vec<School>]) -> (Matching, DaTrace) {
    let n = problem.num_students();
    let m = problem.num_schools();
    let mut next = vec![0usize; n];
    let mut held: Vec<Vec<Student>> = vec![Vec::new(); m];
    let mut apps: Vec<Vec<Student>> = vec![Vec::new(); m];
    let mut proposers: Vec<Student> = problem
        .students()
        .filter(|i| !prefs[i.0].is_empty())
        .collect();
    let mut rounds = Vec::new();

    while !proposers.is_empty() {
        let mut touched = Vec::new();
        for &i in &proposers {
            let s = prefs[i.0][next[i.0]];
            next[i.0] += 1;
            if apps[s.0].is_empty() {
                touched.push(s);
            }
            apps[s.0].push(i);
        }
        touched.sort_unstable();

        let mut events = Vec::with_capacity(touched.len());
        let mut rejected_all = Vec::new();
        for s in touched {
            let mut applicants = std::mem::take(&mut apps[s.0]);
            applicants.sort_unstable();
            let mut pool = std::mem::take(&mut held[s.0]);
            pool.extend_from_slice(&applicants);
            pool.sort_unstable_by_key(|&i| problem.priority_rank(s, i));
            let rejected_slice = pool.split_off(problem.quota(s).min(pool.len()));
            let mut rejected = rejected_slice;
            rejected.sort_unstable();
            rejected_all.extend_from_slice(&rejected);
            held[s.0] = pool.clone();
            events.push(SchoolEvent {
                school: s,
                applicants,
                held: pool,
                rejected,
            });
        }
        rounds.push(DaRound {
            number: rounds.len() + 1,
            events,
        });
        rejected_all.sort_unstable();
        proposers = rejected_all
            .into_iter()
            .filter(|i| next[i.0] < prefs[i.0].len())
            .collect();
    }

    let mut matching = Matching::empty(n);
    for s in problem.schools() {
        for &i in &held[s.0] {
            matching.assign(i, Some(s));
        }
    }
    let trace = DaTrace {
        rounds,
        final_matching: matching.clone(),
    };
    (matching, trace)
}

/// Schools that rejected at least one student of `improvable` during the run.
pub fn rejecting_schools(
    problem: &Problem,
    trace: &DaTrace,
    improvable: &BTreeSet<Student>,
) -> Result<BTreeSet<School>> {
    for &i in improvable {
        problem.check_student(i)?;
    }
    Ok(trace
        .rounds
        .iter()
        .flat_map(|r| &r.events)
        .filter(|e| e.rejected.iter().any(|i| improvable.contains(i)))
        .map(|e| e.school)
        .collect())
}

/// All interrupting pairs of the run, sorted by rejection round (then student,
/// then school).
pub fn interrupters(problem: &Problem, trace: &DaTrace) -> Vec<InterruptPair> {
    let m = problem.num_schools();
    // Per school: round in which each currently held student started her stay,
    // and the rounds in which the school rejected someone.
    let mut hold_start: Vec<Vec<(Student, usize)>> = vec![Vec::new(); m];
    let mut rejection_rounds: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut out = Vec::new();

    for round in &trace.rounds {
        let r = round.number;
        for e in &round.events {
            let s = e.school.0;
            for &i in &e.rejected {
                if let Some(pos) = hold_start[s].iter().position(|&(h, _)| h == i) {
                    let (_, start) = hold_start[s].swap_remove(pos);
                    if rejection_rounds[s].iter().any(|&l| l >= start && l < r) {
                        out.push(InterruptPair {
                            student: i,
                            school: e.school,
                            rejection_round: r,
                        });
                    }
                }
            }
            for &i in &e.applicants {
                if e.held.contains(&i) {
                    hold_start[s].push((i, r));
                }
            }
            if !e.rejected.is_empty() {
                rejection_rounds[s].push(r);
            }
        }
    }
    out.sort_by_key(|p| (p.rejection_round, p.student, p.school));
    out
}

/// Round table: one row per round, one column per school. Each cell lists the
/// students considered by the school that round; rejected ones carry a `*`.
pub fn render_trace_table(problem: &Problem, trace: &DaTrace) -> String {
    let m = problem.num_schools();
    let held = trace.held_by_round(m);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["round".to_owned()];
    header.extend(problem.schools().map(|s| problem.school_name(s).to_owned()));
    rows.push(header);

    for (k, round) in trace.rounds.iter().enumerate() {
        let mut row = vec![format!("r{}", round.number)];
        for s in problem.schools() {
            let cell = match round.events.iter().find(|e| e.school == s) {
                Some(e) => {
                    let mut pool: Vec<Student> =
                        e.held.iter().chain(&e.rejected).copied().collect();
                    pool.sort_unstable();
                    pool.iter()
                        .map(|&i| {
                            let mark = if e.rejected.contains(&i) { "*" } else { "" };
                            format!("{}{mark}", problem.student_name(i))
                        })
                        .collect::<Vec<_>>()
                        .join(",")
                }
                None if k > 0 => held[k - 1][s.0]
                    .iter()
                    .map(|&i| problem.student_name(i).to_owned())
                    .collect::<Vec<_>>()
                    .join(","),
                None => String::new(),
            };
            row.push(cell);
        }
        rows.push(row);
    }

    let widths: Vec<usize> = (0..=m)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// Checks the structural trace invariants, returning a description of the
/// first failure.
pub fn check_trace(problem: &Problem, trace: &DaTrace) -> Result<()> {
    let fail = |msg: String| Err(Error::InvalidConfig(msg));
    let mut applied = BTreeSet::new();
    for round in &trace.rounds {
        for e in &round.events {
            if e.held.len() > problem.quota(e.school) {
                return fail(format!(
                    "round {}: school {} over quota",
                    round.number, e.school
                ));
            }
            for &i in &e.applicants {
                if !applied.insert((i, e.school)) {
                    return fail(format!("{i} applied to {} twice", e.school));
                }
            }
        }
    }
    let last = trace
        .held_by_round(problem.num_schools())
        .pop()
        .unwrap_or_else(|| vec![Vec::new(); problem.num_schools()]);
    let mut rebuilt = Matching::empty(problem.num_students());
    for (s, students) in last.iter().enumerate() {
        for &i in students {
            rebuilt.assign(i, Some(School(s)));
        }
    }
    if rebuilt != trace.final_matching {
        return fail("final matching differs from the last held sets".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::violations;

    fn pair(p: &Problem, i: &str, s: &str, r: usize) -> InterruptPair {
        InterruptPair {
            student: p.student_by_name(i).unwrap(),
            school: p.school_by_name(s).unwrap(),
            rejection_round: r,
        }
    }

    #[test]
    fn ex1_ends_on_the_diagonal_after_thirteen_rounds() {
        let p = fixtures::ex1();
        let (m, trace) = run_da(&p);
        assert_eq!(m, fixtures::ex1_da(&p));
        assert_eq!(trace.rounds.len(), 13);
        check_trace(&p, &trace).unwrap();
        assert!(violations(&p, &m).unwrap().is_empty());
    }

    #[test]
    fn ex1_round_table_matches_the_published_rows() {
        let p = fixtures::ex1();
        let (_, trace) = run_da(&p);
        let table = render_trace_table(&p, &trace);
        let lines: Vec<&str> = table.lines().collect();
        let cells = |line: &str| {
            line.split_whitespace()
                .map(str::to_owned)
                .collect::<Vec<_>>()
        };
        assert_eq!(
            cells(lines[1]),
            ["r1", "i2", "i5", "i6*,i7", "i4", "i1*,i3"]
        );
        assert_eq!(
            cells(lines[10]),
            ["r10", "i1,i5*", "i2", "i3", "i7", "i4", "i6"]
        );
        assert_eq!(
            cells(lines[13]),
            ["r13", "i1", "i2", "i3", "i4", "i5", "i6", "i7"]
        );
    }

    #[test]
    fn ex1_interrupters() {
        let p = fixtures::ex1();
        let (_, trace) = run_da(&p);
        let got = interrupters(&p, &trace);
        let want = vec![
            pair(&p, "i3", "s6", 2),
            pair(&p, "i5", "s1", 10),
            pair(&p, "i4", "s5", 11),
            pair(&p, "i7", "s4", 12),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn ex1_interrupter_after_first_deletion() {
        let p = fixtures::ex1();
        let mut prefs = p.all_prefs().to_vec();
        let (i7, s4) = (
            p.student_by_name("i7").unwrap(),
            p.school_by_name("s4").unwrap(),
        );
        prefs[i7.0].retain(|&s| s != s4);
        let (_, trace) = run_da_with_prefs(&p, &prefs);
        let last = *interrupters(&p, &trace).last().unwrap();
        assert_eq!(
            (last.student, last.school),
            (
                p.student_by_name("i3").unwrap(),
                p.school_by_name("s6").unwrap()
            )
        );
    }

    #[test]
    fn distinct_first_choices_finish_in_one_round() {
        let p = Problem::from_indices(
            vec![vec![1, 0], vec![0], vec![2]],
            vec![vec![], vec![], vec![]],
            vec![1, 1, 1],
        )
        .unwrap();
        let (m, trace) = run_da(&p);
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(
            m.assignment(),
            &[Some(School(1)), Some(School(0)), Some(School(2))]
        );
        assert!(interrupters(&p, &trace).is_empty());
    }

    #[test]
    fn rejecting_schools_of_ex1() {
        let p = fixtures::ex1();
        let (_, trace) = run_da(&p);
        let improvable: BTreeSet<Student> = (0..6).map(Student).collect();
        let got = rejecting_schools(&p, &trace, &improvable).unwrap();
        assert_eq!(got, (0..6).map(School).collect());
        assert!(rejecting_schools(&p, &trace, &BTreeSet::new())
            .unwrap()
            .is_empty());
        assert!(rejecting_schools(&p, &trace, &[Student(40)].into()).is_err());
    }

    #[test]
    fn exnoeff_is_diagonal() {
        let p = fixtures::exnoeff();
        let (m, _) = run_da(&p);
        assert!(p.students().all(|i| m.school_of(i) == Some(School(i.0))));
    }
}
