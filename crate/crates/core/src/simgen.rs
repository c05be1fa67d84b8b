//! Random markets and Monte-Carlo comparison of the mechanisms.
//!
//! Markets have `n` students and `n` unit-capacity schools with complete
//! lists. Replication `r` of a run seeded with `seed` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `r`: first the preference
//! lists (student by student), then the priority lists (school by school),
//! then the consent set. Normal variates come from `rand_distr::StandardNormal`
//! (ziggurat). Permutations use `SliceRandom::shuffle`.

use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::Baseline;
use crate::eada::{run_eada, ConsentSet};
use crate::error::{Error, Result};
use crate::jbc::run_jbc_with;
use crate::model::{Matching, Problem, Student};
use crate::sjbc_plus::run_sjbc_plus_with;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PreferenceModel {
    Iid,
    /// Utility of school `s` for student `i` is `rho * q_s + sqrt(1 - rho^2) * e_is`
    /// with standard normal `q_s` shared by all students.
    Correlated {
        rho: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub model: PreferenceModel,
    pub consent_fraction: f64,
    pub replications: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.n == 0 {
            return bad("market size must be positive");
        }
        if self.replications == 0 {
            return bad("replications must be positive");
        }
        if !(0.0..=1.0).contains(&self.consent_fraction) {
            return bad("consent fraction must lie in [0, 1]");
        }
        if let PreferenceModel::Correlated { rho } = self.model {
            if !(0.0..=1.0).contains(&rho) {
                return bad("rho must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn consent_size(&self) -> usize {
        (self.n as f64 * self.consent_fraction).floor() as usize
    }

    fn rng(&self, replication: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replication as u64);
        rng
    }
}

fn draw_instance(config: &GenConfig, rng: &mut ChaCha8Rng) -> Problem {
    let n = config.n;
    let prefs: Vec<Vec<usize>> = match config.model {
        PreferenceModel::Iid => (0..n)
            .map(|_| {
                let mut l: Vec<usize> = (0..n).collect();
                l.shuffle(rng);
                l
            })
            .collect(),
        PreferenceModel::Correlated { rho } => {
            let common: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let noise_weight = (1.0 - rho * rho).max(0.0).sqrt();
            (0..n)
                .map(|_| {
                    let u: Vec<f64> = (0..n)
                        .map(|s| {
                            rho * common[s] + noise_weight * rng.sample::<f64, _>(StandardNormal)
                        })
                        .collect();
                    let mut l: Vec<usize> = (0..n).collect();
                    l.sort_by(|&a, &b| u[b].total_cmp(&u[a]));
                    l
                })
                .collect()
        }
    };
    let priorities: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut l: Vec<usize> = (0..n).collect();
            l.shuffle(rng);
            l
        })
        .collect();
    Problem::from_indices(prefs, priorities, vec![1; n]).expect("generated lists are permutations")
}

pub fn gen_instance(config: &GenConfig, replication: usize) -> Problem {
    draw_instance(config, &mut config.rng(replication))
}

/// Instance and consent set of one replication.
pub fn gen_replication(config: &GenConfig, replication: usize) -> (Problem, ConsentSet) {
    let mut rng = config.rng(replication);
    let problem = draw_instance(config, &mut rng);
    let consent = ConsentSet::new(
        index::sample(&mut rng, config.n, config.consent_size())
            .into_iter()
            .map(Student),
    );
    (problem, consent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "DA")]
    Da,
    #[serde(rename = "JBC")]
    Jbc,
    #[serde(rename = "SJBC+")]
    SjbcPlus,
    #[serde(rename = "EADA-partial")]
    EadaPartial,
    #[serde(rename = "EADA-full")]
    EadaFull,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] = [
        Mechanism::Da,
        Mechanism::Jbc,
        Mechanism::SjbcPlus,
        Mechanism::EadaPartial,
        Mechanism::EadaFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Da => "DA",
            Mechanism::Jbc => "JBC",
            Mechanism::SjbcPlus => "SJBC+",
            Mechanism::EadaPartial => "EADA-partial",
            Mechanism::EadaFull => "EADA-full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanismMetrics {
    pub avg_rank: f64,
    pub beneficiaries: usize,
    pub pareto_efficient: bool,
    pub justifiable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceMetrics {
    pub replication: usize,
    /// Indexed like `Mechanism::ALL`.
    pub mechanisms: [MechanismMetrics; 5],
}

impl InstanceMetrics {
    pub fn get(&self, mechanism: Mechanism) -> &MechanismMetrics {
        let k = Mechanism::ALL
            .iter()
            .position(|&m| m == mechanism)
            .expect("listed");
        &self.mechanisms[k]
    }
}

fn metrics(problem: &Problem, base: &Baseline, m: &Matching) -> MechanismMetrics {
    let verdict = base
        .verdict(problem, m)
        .expect("mechanism outcomes weakly dominate DA");
    MechanismMetrics {
        avg_rank: m.average_rank(problem),
        beneficiaries: verdict.beneficiaries.len(),
        pareto_efficient: verdict.pareto_efficient,
        justifiable: verdict.justifiable,
    }
}

pub fn instance_metrics(config: &GenConfig, replication: usize) -> InstanceMetrics {
    let (problem, consent) = gen_replication(config, replication);
    let base = Baseline::new(&problem);
    let (jbc, _) = run_jbc_with(&problem, &base);
    let plus = run_sjbc_plus_with(&problem, &base);
    let (partial, _) = run_eada(&problem, &consent);
    let (full, _) = run_eada(&problem, &ConsentSet::all(&problem));
    let outcomes = [&base.da, &jbc, plus.outcome(), &partial, &full];
    InstanceMetrics {
        replication,
        mechanisms: outcomes.map(|m| metrics(&problem, &base, m)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AvgRank,
    Beneficiaries,
    /// Percent of instances.
    PeRate,
    /// Percent of instances.
    JustifiableRate,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::AvgRank,
        Metric::Beneficiaries,
        Metric::PeRate,
        Metric::JustifiableRate,
    ];

    fn value(self, m: &MechanismMetrics) -> f64 {
        let pct = |b: bool| if b { 100.0 } else { 0.0 };
        match self {
            Metric::AvgRank => m.avg_rank,
            Metric::Beneficiaries => m.beneficiaries as f64,
            Metric::PeRate => pct(m.pareto_efficient),
            Metric::JustifiableRate => pct(m.justifiable),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub mechanism: Mechanism,
    pub metric: Metric,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateStats {
    pub config: GenConfig,
    pub rows: Vec<StatRow>,
}

impl AggregateStats {
    pub fn get(&self, mechanism: Mechanism, metric: Metric) -> StatRow {
        *self
            .rows
            .iter()
            .find(|r| r.mechanism == mechanism && r.metric == metric)
            .expect("every mechanism/metric pair is aggregated")
    }

    pub fn from_instances(config: GenConfig, instances: &[InstanceMetrics]) -> Self {
        let reps = instances.len() as f64;
        let mut rows = Vec::new();
        for mech in Mechanism::ALL {
            for metric in Metric::ALL {
                let xs: Vec<f64> = instances
                    .iter()
                    .map(|im| metric.value(im.get(mech)))
                    .collect();
                let mean = xs.iter().sum::<f64>() / reps;
                let var = if xs.len() > 1 {
                    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1.0)
                } else {
                    0.0
                };
                rows.push(StatRow {
                    mechanism: mech,
                    metric,
                    mean,
                    stderr: var.sqrt() / reps.sqrt(),
                });
            }
        }
        Self { config, rows }
    }

    /// CSV with header `mechanism,metric,mean,stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Serialize)]
struct InstanceRow {
    replication: usize,
    mechanism: Mechanism,
    avg_rank: f64,
    beneficiaries: usize,
    pareto_efficient: bool,
    justifiable: bool,
}

pub fn write_instances_csv<W: Write>(instances: &[InstanceMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for im in instances {
        for (mech, m) in Mechanism::ALL.iter().zip(&im.mechanisms) {
            w.serialize(InstanceRow {
                replication: im.replication,
                mechanism: *mech,
                avg_rank: m.avg_rank,
                beneficiaries: m.beneficiaries,
                pareto_efficient: m.pareto_efficient,
                justifiable: m.justifiable,
            })
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-replication metrics in replication order. Replications run on the
/// current rayon pool.
pub fn run_instances(config: &GenConfig) -> Result<Vec<InstanceMetrics>> {
    config.validate()?;
    Ok((0..config.replications)
        .into_par_iter()
        .map(|r| instance_metrics(config, r))
        .collect())
}

pub fn run_experiment(config: &GenConfig) -> Result<AggregateStats> {
    Ok(AggregateStats::from_instances(
        *config,
        &run_instances(config)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::School;

    fn iid(n: usize, reps: usize, seed: u64) -> GenConfig {
        GenConfig {
            n,
            model: PreferenceModel::Iid,
            consent_fraction: 0.5,
            replications: reps,
            seed,
        }
    }

    #[test]
    fn instances_are_deterministic() {
        let c = iid(3, 1, 42);
        let a = gen_instance(&c, 0);
        let b = gen_instance(&c, 0);
        assert_eq!(a.all_prefs(), b.all_prefs());
        assert_ne!(
            gen_instance(&c, 0).all_prefs(),
            gen_instance(&c, 5).all_prefs()
        );
        let (_, w) = gen_replication(&iid(10, 1, 1), 0);
        assert_eq!(w.members().len(), 5);
    }

    #[test]
    fn full_correlation_gives_common_order() {
        let c = GenConfig {
            model: PreferenceModel::Correlated { rho: 1.0 },
            ..iid(8, 1, 3)
        };
        let p = gen_instance(&c, 0);
        assert!(p.all_prefs().windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn invalid_configs() {
        assert!(GenConfig {
            n: 0,
            ..iid(1, 1, 0)
        }
        .validate()
        .is_err());
        assert!(GenConfig {
            replications: 0,
            ..iid(1, 1, 0)
        }
        .validate()
        .is_err());
        assert!(GenConfig {
            consent_fraction: 1.5,
            ..iid(1, 1, 0)
        }
        .validate()
        .is_err());
        let c = GenConfig {
            model: PreferenceModel::Correlated { rho: -0.1 },
            ..iid(1, 1, 0)
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn experiments_are_reproducible() {
        let c = iid(8, 12, 9);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mechanism,metric,mean,stderr\n"));
        assert!(text.contains("SJBC+,justifiable_rate,100.0,0.0"));
    }

    #[test]
    fn standard_error_is_sample_sd_over_root_n() {
        let m = |r: f64| MechanismMetrics {
            avg_rank: r,
            beneficiaries: 0,
            pareto_efficient: false,
            justifiable: true,
        };
        let im = |k, r| InstanceMetrics {
            replication: k,
            mechanisms: [m(r); 5],
        };
        let stats =
            AggregateStats::from_instances(iid(1, 3, 0), &[im(0, 1.0), im(1, 2.0), im(2, 3.0)]);
        let row = stats.get(Mechanism::Da, Metric::AvgRank);
        assert_eq!(row.mean, 2.0);
        assert!((row.stderr - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn per_instance_guarantees() {
        let c = GenConfig {
            model: PreferenceModel::Correlated { rho: 0.5 },
            ..iid(20, 40, 11)
        };
        for im in run_instances(&c).unwrap() {
            let plus = im.get(Mechanism::SjbcPlus);
            assert!(plus.beneficiaries >= im.get(Mechanism::Jbc).beneficiaries);
            assert!(plus.justifiable);
            assert!(im.get(Mechanism::EadaFull).pareto_efficient);
            assert!(im
                .mechanisms
                .iter()
                .all(|m| m.avg_rank >= 1.0 && m.beneficiaries <= 20));
        }
    }

    fn spearman(a: &[School], b: &[School]) -> f64 {
        let n = a.len();
        let mut pos = vec![0usize; n];
        for (k, s) in b.iter().enumerate() {
            pos[s.0] = k;
        }
        let d2: f64 = a
            .iter()
            .enumerate()
            .map(|(k, s)| (k as f64 - pos[s.0] as f64).powi(2))
            .sum();
        1.0 - 6.0 * d2 / (n as f64 * (n as f64 * n as f64 - 1.0))
    }

    #[test]
    fn correlated_lists_agree_more_than_chance() {
        let c = GenConfig {
            model: PreferenceModel::Correlated { rho: 0.5 },
            ..iid(50, 100, 5)
        };
        let mut total = 0.0;
        let mut pairs = 0.0;
        for r in 0..100 {
            let p = gen_instance(&c, r);
            let lists = p.all_prefs();
            for a in 0..lists.len() {
                for b in a + 1..lists.len() {
                    total += spearman(&lists[a], &lists[b]);
                    pairs += 1.0;
                }
            }
        }
        assert!(
            total / pairs > 0.1,
            "mean rank correlation {}",
            total / pairs
        );
    }
}
