use thiserror::Error;

use crate::model::{School, Student};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("unknown student id {0}")]
    UnknownStudent(usize),

    #[error("unknown school id {0}")]
    UnknownSchool(usize),

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("infeasible matching: {0}")]
    InfeasibleMatching(String),

    #[error(
        "matching is wasteful: student {student} prefers school {school} which has a free seat"
    )]
    Wasteful { student: Student, school: School },

    #[error("matching makes student {0} worse off than deferred acceptance")]
    WorseThanDa(Student),

    #[error("invalid cycle packing: {0}")]
    InvalidPacking(String),

    #[error("school {0} has no deferred acceptance occupant")]
    EmptySchool(School),

    #[error("school {0} rejected no improvable student")]
    NotRejecting(School),

    #[error("priority of student {claimant} is not violated at school {school}")]
    NoViolation { claimant: Student, school: School },

    #[error("enumeration budget of {budget} candidates exceeded")]
    BudgetExceeded { budget: u64 },

    #[error("{students} students is too many for exhaustive consent enumeration (limit {limit})")]
    TooManyStudents { students: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
