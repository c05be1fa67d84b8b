//! School-choice improvement mechanisms over deferred acceptance.

pub mod analysis;
pub mod assignment;
pub mod da;
pub mod eada;
pub mod envy;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod jbc;
pub mod model;
pub mod oracle;
pub mod simgen;
pub mod sjbc_plus;

pub use analysis::{Baseline, Verdict};
pub use da::{run_da, DaTrace, InterruptPair};
pub use eada::{eada_orbit, run_eada, ConsentSet, EadaRun};
pub use envy::{build_envy, CyclePacking, LabelledEnvyDigraph};
pub use error::{Error, Result};
pub use jbc::{run_jbc, SchoolGraph};
pub use model::{Matching, ParetoOrder, Problem, Rank, School, Student, Violation};
pub use oracle::{oracle_report, OracleReport};
pub use simgen::{
    run_experiment, AggregateStats, GenConfig, InstanceMetrics, Mechanism, PreferenceModel,
};
pub use sjbc_plus::{run_sjbc_plus, SjbcRun};
