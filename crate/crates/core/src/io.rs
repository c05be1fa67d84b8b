//! JSON instance and matching files.
//!
//! Instance: `{"students":[..],"schools":[{"name":..,"quota":..}],"prefs":{..},"priorities":{..}}`.
//! Priority lists may be partial and are completed on load. Matching:
//! `{"assignment":{"i1":"s4",..}}`; students absent from the map are unassigned.

use std::collections::BTreeMap;
use std::path::Path;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Matching, Problem, School, Student};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchoolSpec {
    pub name: String,
    pub quota: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub students: Vec<String>,
    pub schools: Vec<SchoolSpec>,
    #[serde(default)]
    pub prefs: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub priorities: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub completed_priorities: bool,
}

impl InstanceFile {
    pub fn into_problem(self) -> Result<Problem> {
        let student_names = self.students;
        let school_names: Vec<String> = self.schools.iter().map(|s| s.name.clone()).collect();
        let quotas = self.schools.iter().map(|s| s.quota).collect();
        let student_ix = |name: &str| {
            student_names
                .iter()
                .position(|n| n == name)
                .map(Student)
                .ok_or_else(|| Error::UnknownName(name.to_owned()))
        };
        let school_ix = |name: &str| {
            school_names
                .iter()
                .position(|n| n == name)
                .map(School)
                .ok_or_else(|| Error::UnknownName(name.to_owned()))
        };

        for key in self.prefs.keys() {
            student_ix(key)?;
        }
        for key in self.priorities.keys() {
            school_ix(key)?;
        }
        let prefs = student_names
            .iter()
            .map(|n| {
                self.prefs
                    .get(n)
                    .map(|l| l.iter().map(|s| school_ix(s)).collect::<Result<Vec<_>>>())
                    .unwrap_or_else(|| Ok(Vec::new()))
            })
            .collect::<Result<Vec<_>>>()?;
        let priorities = school_names
            .iter()
            .map(|n| {
                self.priorities
                    .get(n)
                    .map(|l| l.iter().map(|i| student_ix(i)).collect::<Result<Vec<_>>>())
                    .unwrap_or_else(|| Ok(Vec::new()))
            })
            .collect::<Result<Vec<_>>>()?;
        Problem::completing(
            student_names.clone(),
            school_names.clone(),
            prefs,
            priorities,
            quotas,
        )
    }

    pub fn from_problem(problem: &Problem) -> Self {
        Self {
            students: problem.student_names().to_vec(),
            schools: problem
                .schools()
                .map(|s| SchoolSpec {
                    name: problem.school_name(s).to_owned(),
                    quota: problem.quota(s),
                })
                .collect(),
            prefs: problem
                .students()
                .map(|i| {
                    (
                        problem.student_name(i).to_owned(),
                        problem
                            .prefs(i)
                            .iter()
                            .map(|&s| problem.school_name(s).to_owned())
                            .collect(),
                    )
                })
                .collect(),
            priorities: problem
                .schools()
                .map(|s| {
                    (
                        problem.school_name(s).to_owned(),
                        problem
                            .priorities(s)
                            .iter()
                            .map(|&i| problem.student_name(i).to_owned())
                            .collect(),
                    )
                })
                .collect(),
            completed_priorities: problem.completed_priorities(),
        }
    }
}

pub fn parse_instance(json: &str) -> Result<Problem> {
    serde_json::from_str::<InstanceFile>(json)?.into_problem()
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Problem> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn instance_to_json(problem: &Problem) -> Result<String> {
    Ok(serde_json::to_string_pretty(&InstanceFile::from_problem(
        problem,
    ))?)
}

#[derive(Deserialize)]
struct MatchingFile {
    assignment: BTreeMap<String, Option<String>>,
}

/// Serializes the assignment map in student declaration order.
struct AssignmentView<'a> {
    problem: &'a Problem,
    matching: &'a Matching,
}

impl Serialize for AssignmentView<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        for i in self.problem.students() {
            if let Some(s) = self.matching.school_of(i) {
                map.serialize_entry(self.problem.student_name(i), self.problem.school_name(s))?;
            }
        }
        map.end()
    }
}

#[derive(Serialize)]
struct MatchingOut<'a> {
    assignment: AssignmentView<'a>,
}

pub fn matching_to_json(problem: &Problem, matching: &Matching) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MatchingOut {
        assignment: AssignmentView { problem, matching },
    })?)
}

pub fn parse_matching(problem: &Problem, json: &str) -> Result<Matching> {
    let file: MatchingFile = serde_json::from_str(json)?;
    let mut m = Matching::empty(problem.num_students());
    for (student, school) in &file.assignment {
        let i = problem.student_by_name(student)?;
        let s = school
            .as_deref()
            .map(|s| problem.school_by_name(s))
            .transpose()?;
        m.assign(i, s);
    }
    m.check_feasible(problem)?;
    Ok(m)
}

pub fn read_matching(problem: &Problem, path: impl AsRef<Path>) -> Result<Matching> {
    parse_matching(problem, &std::fs::read_to_string(path)?)
}
