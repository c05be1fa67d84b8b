//! Bundled example instances.
//!
//! `ex1` is the 7×7 running example, `exnoeff` the 6×6 instance with no
//! justifiable and Pareto-efficient matching, `explus` the 5×5 instance showing
//! why the refinement phase is needed, `exd` the instance with non-nested
//! beneficiary sets and `exe` the constrained-efficiency tightness instance.

use crate::io::parse_instance;
use crate::model::{Matching, Problem};

pub const EX1_JSON: &str = include_str!("../../../fixtures/ex1.json");
pub const EXNOEFF_JSON: &str = include_str!("../../../fixtures/exnoeff.json");
pub const EXPLUS_JSON: &str = include_str!("../../../fixtures/explus.json");
pub const EXD_JSON: &str = include_str!("../../../fixtures/exd.json");
pub const EXE_JSON: &str = include_str!("../../../fixtures/exe.json");

/// `(file name, contents)` of every bundled fixture.
pub const ALL: [(&str, &str); 5] = [
    ("ex1.json", EX1_JSON),
    ("exnoeff.json", EXNOEFF_JSON),
    ("explus.json", EXPLUS_JSON),
    ("exd.json", EXD_JSON),
    ("exe.json", EXE_JSON),
];

pub fn by_file_name(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, json)| *json)
}

fn load(json: &str) -> Problem {
    parse_instance(json).expect("bundled fixture parses")
}

pub fn ex1() -> Problem {
    load(EX1_JSON)
}

pub fn exnoeff() -> Problem {
    load(EXNOEFF_JSON)
}

pub fn explus() -> Problem {
    load(EXPLUS_JSON)
}

pub fn exd() -> Problem {
    load(EXD_JSON)
}

pub fn exe() -> Problem {
    load(EXE_JSON)
}

fn named(problem: &Problem, pairs: &[(&str, &str)]) -> Matching {
    Matching::from_names(problem, pairs).expect("fixture names are valid")
}

/// Diagonal DA outcome of `ex1`.
pub fn ex1_da(p: &Problem) -> Matching {
    named(
        p,
        &[
            ("i1", "s1"),
            ("i2", "s2"),
            ("i3", "s3"),
            ("i4", "s4"),
            ("i5", "s5"),
            ("i6", "s6"),
            ("i7", "s7"),
        ],
    )
}

/// `ex1` after the JBC cycle i1 -> i4 -> i5 -> i1.
pub fn ex1_jbc(p: &Problem) -> Matching {
    named(
        p,
        &[
            ("i1", "s4"),
            ("i2", "s2"),
            ("i3", "s3"),
            ("i4", "s5"),
            ("i5", "s1"),
            ("i6", "s6"),
            ("i7", "s7"),
        ],
    )
}

/// The justifiable and Pareto-efficient matching of `ex1`:
/// packing {(i1 i2), (i3 i6 i4 i5)}.
pub fn ex1_justifiable_pe(p: &Problem) -> Matching {
    named(
        p,
        &[
            ("i1", "s2"),
            ("i2", "s1"),
            ("i3", "s6"),
            ("i4", "s5"),
            ("i5", "s3"),
            ("i6", "s4"),
            ("i7", "s7"),
        ],
    )
}

/// EADA outcome of `ex1` under full consent: cycle i1 -> i6 -> i4 -> i5 -> i1.
pub fn ex1_eada_full(p: &Problem) -> Matching {
    named(
        p,
        &[
            ("i1", "s6"),
            ("i2", "s2"),
            ("i3", "s3"),
            ("i4", "s5"),
            ("i5", "s1"),
            ("i6", "s4"),
            ("i7", "s7"),
        ],
    )
}

/// The unique justifiable improvement of `exnoeff`: cycle i1 -> i4 -> i2 -> i1.
pub fn exnoeff_mu_j(p: &Problem) -> Matching {
    named(
        p,
        &[
            ("i1", "s4"),
            ("i2", "s1"),
            ("i3", "s3"),
            ("i4", "s2"),
            ("i5", "s5"),
            ("i6", "s6"),
        ],
    )
}
