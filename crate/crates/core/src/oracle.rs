//! Brute-force ground truth for small markets.
//!
//! Everything here is recomputed from the definitions over an explicit list
//! of matchings: the stable matchings, the student-optimal one, the matchings
//! that Pareto-dominate it, improvable students, and the justifiable,
//! strongly justifiable and efficient families. Only the raw preference and
//! priority data of [`Problem`] is shared with the fast code paths, so the
//! claims at the bottom are genuine cross-checks.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::analysis::Baseline;
use crate::error::{Error, Result};
use crate::jbc::{family_by_subset, run_jbc_with};
use crate::model::{Matching, Problem, School, Student};
use crate::sjbc_plus::run_sjbc_plus_with;

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Every individually rational, non-wasteful matching, each exactly once.
/// The budget caps the number of search nodes visited.
pub fn enumerate_matchings(problem: &Problem, budget: u64) -> Result<Vec<Matching>> {
    struct Search<'a> {
        p: &'a Problem,
        load: Vec<usize>,
        current: Vec<Option<School>>,
        out: Vec<Matching>,
        nodes: u64,
        budget: u64,
    }
    impl Search<'_> {
        fn go(&mut self, k: usize) -> Result<()> {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExceeded {
                    budget: self.budget,
                });
            }
            if k == self.current.len() {
                if !self.wasteful() {
                    self.out.push(Matching::new(self.current.clone()));
                }
                return Ok(());
            }
            let i = Student(k);
            self.current[k] = None;
            self.go(k + 1)?;
            for idx in 0..self.p.prefs(i).len() {
                let s = self.p.prefs(i)[idx];
                if self.load[s.0] < self.p.quota(s) {
                    self.load[s.0] += 1;
                    self.current[k] = Some(s);
                    self.go(k + 1)?;
                    self.load[s.0] -= 1;
                }
            }
            self.current[k] = None;
            Ok(())
        }

        fn wasteful(&self) -> bool {
            (0..self.current.len()).any(|k| {
                let i = Student(k);
                let own = self.current[k];
                self.p
                    .prefs(i)
                    .iter()
                    .any(|&s| self.p.prefers(i, Some(s), own) && self.load[s.0] < self.p.quota(s))
            })
        }
    }
    let mut search = Search {
        p: problem,
        load: vec![0; problem.num_schools()],
        current: vec![None; problem.num_students()],
        out: Vec::new(),
        nodes: 0,
        budget,
    };
    search.go(0)?;
    Ok(search.out)
}

/// Victims whose priority `m` violates: `i` prefers a school holding
/// someone of lower priority there.
fn victims(p: &Problem, m: &Matching) -> BTreeSet<Student> {
    let mut out = BTreeSet::new();
    for i in p.students() {
        for j in p.students() {
            if let Some(s) = m.school_of(j) {
                if i != j && p.prefers(i, Some(s), m.school_of(i)) && p.outranks(s, i, j) {
                    out.insert(i);
                }
            }
        }
    }
    out
}

fn is_stable(p: &Problem, m: &Matching) -> bool {
    victims(p, m).is_empty()
}

fn weakly_better(p: &Problem, a: &Matching, b: &Matching) -> bool {
    p.students()
        .all(|i| p.rank(i, a.school_of(i)) <= p.rank(i, b.school_of(i)))
}

fn strictly_dominates(p: &Problem, a: &Matching, b: &Matching) -> bool {
    weakly_better(p, a, b)
        && p.students()
            .any(|i| p.rank(i, a.school_of(i)) < p.rank(i, b.school_of(i)))
}

fn gainers(p: &Problem, m: &Matching, base: &Matching) -> BTreeSet<Student> {
    p.students()
        .filter(|&i| p.rank(i, m.school_of(i)) < p.rank(i, base.school_of(i)))
        .collect()
}

/// Enumeration plus the definition-level families of one problem.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub matchings: Vec<Matching>,
    pub da: Matching,
    /// Indices into `matchings` of those strictly dominating `da`.
    pub dominating: Vec<usize>,
    pub unimprovable: BTreeSet<Student>,
}

impl Oracle {
    pub fn new(problem: &Problem, budget: u64) -> Result<Self> {
        let matchings = enumerate_matchings(problem, budget)?;
        let stable: Vec<&Matching> = matchings.iter().filter(|m| is_stable(problem, m)).collect();
        let da = stable
            .iter()
            .find(|m| stable.iter().all(|o| weakly_better(problem, m, o)))
            .map(|m| (*m).clone())
            .ok_or_else(|| {
                Error::InvalidInstance("no student-optimal stable matching found".into())
            })?;
        let dominating: Vec<usize> = (0..matchings.len())
            .filter(|&k| strictly_dominates(problem, &matchings[k], &da))
            .collect();
        let unimprovable = problem
            .students()
            .filter(|&i| {
                dominating
                    .iter()
                    .all(|&k| matchings[k].school_of(i) == da.school_of(i))
            })
            .collect();
        Ok(Self {
            matchings,
            da,
            dominating,
            unimprovable,
        })
    }

    pub fn improvable(&self, problem: &Problem) -> BTreeSet<Student> {
        problem
            .students()
            .filter(|i| !self.unimprovable.contains(i))
            .collect()
    }

    /// `M(P)` together with DA itself.
    pub fn candidates(&self) -> impl Iterator<Item = &Matching> {
        std::iter::once(&self.da).chain(self.dominating.iter().map(|&k| &self.matchings[k]))
    }

    pub fn beneficiaries(&self, problem: &Problem, m: &Matching) -> BTreeSet<Student> {
        gainers(problem, m, &self.da)
    }

    pub fn is_justifiable(&self, problem: &Problem, m: &Matching) -> bool {
        let b = self.beneficiaries(problem, m);
        victims(problem, m)
            .iter()
            .all(|v| self.unimprovable.contains(v) || b.contains(v))
    }

    /// Every student who moved took a seat where no improvable student who
    /// would rather be there has higher priority.
    pub fn is_strongly_justifiable(&self, problem: &Problem, m: &Matching) -> bool {
        problem.students().all(|i| {
            let s = m.school_of(i);
            if s == self.da.school_of(i) {
                return true;
            }
            let s = s.expect("movers in dominating matchings hold a seat");
            problem.students().all(|h| {
                self.unimprovable.contains(&h)
                    || !problem.prefers(h, Some(s), self.da.school_of(h))
                    || !problem.outranks(s, h, i)
            })
        })
    }

    pub fn is_pareto_efficient(&self, problem: &Problem, m: &Matching) -> bool {
        !self
            .matchings
            .iter()
            .any(|o| strictly_dominates(problem, o, m))
    }

    /// A matching that strictly dominates `m` while violating no priority of
    /// `protected`, if any.
    pub fn dominated_respecting(
        &self,
        problem: &Problem,
        m: &Matching,
        protected: &BTreeSet<Student>,
    ) -> Option<&Matching> {
        self.matchings.iter().find(|o| {
            strictly_dominates(problem, o, m) && victims(problem, o).is_disjoint(protected)
        })
    }

    pub fn respects(&self, problem: &Problem, m: &Matching, protected: &BTreeSet<Student>) -> bool {
        victims(problem, m).is_disjoint(protected)
    }

    pub fn dominates_da(&self, problem: &Problem, m: &Matching) -> bool {
        strictly_dominates(problem, m, &self.da)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Claim {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Claim {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_owned(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub num_matchings: usize,
    pub da: Matching,
    pub dominating_set: Vec<Matching>,
    pub unimprovable: BTreeSet<Student>,
    /// Justifiable members of the dominating set.
    pub justifiable: Vec<Matching>,
    /// Includes DA itself (the empty cycle subset).
    pub strongly_justifiable: Vec<Matching>,
    pub pareto_efficient: Vec<Matching>,
    pub claims: Vec<Claim>,
    /// No matching is both justifiable and Pareto-efficient (informational).
    pub no_justifiable_efficient: bool,
    /// Some check relied on priority entries that were completed on load.
    pub touches_completed_priorities: bool,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.claims.iter().all(|c| c.passed)
    }

    pub fn render(&self, problem: &Problem) -> String {
        let fmt_m = |m: &Matching| {
            problem
                .students()
                .map(|i| {
                    format!(
                        "{}:{}",
                        problem.student_name(i),
                        problem.slot_name(m.school_of(i))
                    )
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let fam = |title: &str, ms: &[Matching]| {
            let mut s = format!("{title} ({}):\n", ms.len());
            for m in ms {
                s += &format!("  {}\n", fmt_m(m));
            }
            s
        };
        let names: Vec<&str> = self
            .unimprovable
            .iter()
            .map(|&i| problem.student_name(i))
            .collect();
        let mut out = format!(
            "matchings enumerated: {}\nda: {}\nunimprovable: [{}]\n",
            self.num_matchings,
            fmt_m(&self.da),
            names.join(",")
        );
        out += &fam("dominating", &self.dominating_set);
        out += &fam("justifiable", &self.justifiable);
        out += &fam("strongly justifiable", &self.strongly_justifiable);
        out += &fam("pareto efficient", &self.pareto_efficient);
        out += &format!(
            "no justifiable and efficient matching: {}\n",
            self.no_justifiable_efficient
        );
        if self.touches_completed_priorities {
            out += "note: priority lists were completed on load\n";
        }
        for c in &self.claims {
            out += &format!(
                "{} {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        out
    }
}

pub fn oracle_report(problem: &Problem, budget: u64) -> Result<OracleReport> {
    let oracle = Oracle::new(problem, budget)?;
    let base = Baseline::new(problem);
    let mut claims = Vec::new();

    claims.push(Claim::new(
        "deferred acceptance is student-optimal stable",
        base.da == oracle.da,
        "fast DA against the enumerated student-optimal stable matching",
    ));

    let improvable = oracle.improvable(problem);
    let fast = base.envy.improvable();
    claims.push(Claim::new(
        "improvable set: nontrivial SCCs = enumeration",
        improvable == fast,
        format!(
            "{} improvable by enumeration, {} by SCC",
            improvable.len(),
            fast.len()
        ),
    ));

    let candidates: Vec<&Matching> = oracle.candidates().collect();
    let mut label_bad = 0;
    let mut verdict_bad = 0;
    for m in &candidates {
        let def = oracle.is_justifiable(problem, m);
        match base.verdict(problem, m) {
            Ok(v) => {
                if v.label_test != Some(def) {
                    label_bad += 1;
                }
                if v.justifiable != def {
                    verdict_bad += 1;
                }
            }
            Err(_) => {
                label_bad += 1;
                verdict_bad += 1;
            }
        }
    }
    claims.push(Claim::new(
        "label containment decides justifiability",
        label_bad == 0,
        format!("{label_bad} mismatches over {} matchings", candidates.len()),
    ));
    claims.push(Claim::new(
        "justifiability verdicts agree",
        verdict_bad == 0,
        format!("{verdict_bad} mismatches"),
    ));

    // Justifiable improvements: DA itself is left out.
    let justifiable: Vec<Matching> = candidates
        .iter()
        .filter(|m| **m != &oracle.da && oracle.is_justifiable(problem, m))
        .map(|m| (*m).clone())
        .collect();
    let strongly: Vec<Matching> = candidates
        .iter()
        .filter(|m| oracle.is_strongly_justifiable(problem, m))
        .map(|m| (*m).clone())
        .collect();
    let efficient: Vec<Matching> = candidates
        .iter()
        .filter(|m| oracle.is_pareto_efficient(problem, m))
        .map(|m| (*m).clone())
        .collect();

    let family = family_by_subset(problem, &base)?;
    let fam_set: BTreeSet<&Matching> = family.iter().map(|(_, m)| m).collect();
    let strong_set: BTreeSet<&Matching> = strongly.iter().collect();
    let lattice_ok = family.iter().all(|(a, ma)| {
        family.iter().all(|(b, mb)| {
            let dominates = a != b && weakly_better(problem, ma, mb);
            dominates == (a != b && a & b == *b)
        })
    });
    claims.push(Claim::new(
        "JBC cycle subsets = strongly justifiable family",
        fam_set == strong_set && lattice_ok,
        format!(
            "{} subset matchings, {} strongly justifiable, lattice {}",
            fam_set.len(),
            strong_set.len(),
            if lattice_ok { "ok" } else { "broken" }
        ),
    ));

    let plus = run_sjbc_plus_with(problem, &base);
    let outcome = plus.outcome();
    let b_plus = oracle.beneficiaries(problem, outcome);
    let (jbc, _) = run_jbc_with(problem, &base);
    let b_jbc = oracle.beneficiaries(problem, &jbc);
    let dominates_ok = if oracle.dominating.is_empty() {
        *outcome == oracle.da
    } else {
        oracle.dominates_da(problem, outcome)
    };
    claims.push(Claim::new(
        "SJBC+ dominates DA, is justifiable, keeps JBC beneficiaries",
        dominates_ok && oracle.is_justifiable(problem, outcome) && b_jbc.is_subset(&b_plus),
        format!("{} beneficiaries (JBC {})", b_plus.len(), b_jbc.len()),
    ));
    let beaten = justifiable.iter().find(|m| {
        oracle.beneficiaries(problem, m) == b_plus && strictly_dominates(problem, m, outcome)
    });
    claims.push(Claim::new(
        "SJBC+ undominated at its beneficiary set",
        beaten.is_none(),
        if beaten.is_some() {
            "dominated by a justifiable matching"
        } else {
            "no dominating justifiable matching"
        },
    ));

    let efficient_set: BTreeSet<&Matching> = efficient.iter().collect();
    let no_justifiable_efficient = justifiable.iter().all(|m| !efficient_set.contains(m));

    Ok(OracleReport {
        num_matchings: oracle.matchings.len(),
        da: oracle.da.clone(),
        dominating_set: oracle
            .dominating
            .iter()
            .map(|&k| oracle.matchings[k].clone())
            .collect(),
        unimprovable: oracle.unimprovable.clone(),
        justifiable,
        strongly_justifiable: strongly,
        pareto_efficient: efficient,
        claims,
        no_justifiable_efficient,
        touches_completed_priorities: problem.completed_priorities(),
    })
}

/// The instance-level steps behind the impossibility of being efficient
/// whenever possible, on the running example: three nested consent sets.
pub fn verify_theorem5_steps(problem: &Problem) -> Result<Vec<Claim>> {
    let oracle = Oracle::new(problem, DEFAULT_BUDGET)?;
    let st = |n: &str| problem.student_by_name(n);
    let sc = |n: &str| problem.school_by_name(n);
    let (i1, i3, i5, i7) = (st("i1")?, st("i3")?, st("i5")?, st("i7")?);
    let (s1, s4) = (sc("s1")?, sc("s4")?);
    let outside = |w: &[Student]| -> BTreeSet<Student> {
        problem.students().filter(|i| !w.contains(i)).collect()
    };
    let improvements: Vec<&Matching> = oracle
        .dominating
        .iter()
        .map(|&k| &oracle.matchings[k])
        .collect();
    let three_cycle = Matching::from_names(
        problem,
        &[
            ("i1", "s4"),
            ("i2", "s2"),
            ("i3", "s3"),
            ("i4", "s5"),
            ("i5", "s1"),
            ("i6", "s6"),
            ("i7", "s7"),
        ],
    )?;
    let packing = Matching::from_names(
        problem,
        &[
            ("i1", "s2"),
            ("i2", "s1"),
            ("i3", "s6"),
            ("i4", "s5"),
            ("i5", "s3"),
            ("i6", "s4"),
            ("i7", "s7"),
        ],
    )?;
    let describe = |ms: &[&Matching]| format!("{} matching(s)", ms.len());
    let mut claims = Vec::new();

    let w1 = outside(&[i7]);
    let step1: Vec<&Matching> = improvements
        .iter()
        .copied()
        .filter(|m| oracle.respects(problem, m, &w1))
        .collect();
    claims.push(Claim::new(
        "W1={i7}: only the 3-cycle respects everyone else",
        step1 == [&three_cycle],
        describe(&step1),
    ));

    let w2 = outside(&[i5, i7]);
    let step2: Vec<&Matching> = improvements
        .iter()
        .copied()
        .filter(|m| {
            oracle.respects(problem, m, &w2)
                && problem.rank(i5, m.school_of(i5)) <= problem.rank(i5, Some(s1))
        })
        .collect();
    claims.push(Claim::new(
        "W2={i5,i7}: only the 3-cycle gives i5 at least s1",
        step2 == [&three_cycle],
        describe(&step2),
    ));

    let step3: Vec<&Matching> = improvements
        .iter()
        .copied()
        .filter(|m| {
            problem.rank(i1, m.school_of(i1)) <= problem.rank(i1, Some(s4))
                && problem.rank(i5, m.school_of(i5)) <= problem.rank(i5, Some(s1))
        })
        .collect();
    let violating_i3 = step3
        .iter()
        .filter(|m| victims(problem, m).contains(&i3))
        .count();
    claims.push(Claim::new(
        "W3={i1,i5,i7}: exactly two improvements give i1 at least s4, one violates i3",
        step3.len() == 2 && violating_i3 == 1,
        format!("{}, {violating_i3} violating i3", describe(&step3)),
    ));

    let w3 = outside(&[i1, i5, i7]);
    claims.push(Claim::new(
        "W3={i1,i5,i7}: the two-cycle packing is efficient, dominates DA and respects everyone else",
        oracle.is_pareto_efficient(problem, &packing)
            && oracle.dominates_da(problem, &packing)
            && oracle.respects(problem, &packing, &w3),
        "packing (i1 i2)(i3 i6 i4 i5)",
    ));
    Ok(claims)
}
