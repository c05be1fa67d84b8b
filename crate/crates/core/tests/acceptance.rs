//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line per check
//! and fails if any of its checks fail. Tests hold a shared lock so that the
//! timing gates do not compete with each other for cores.

use std::collections::BTreeSet;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use matchlab::analysis::{reassignment_chain, Baseline, ChainOutcome};
use matchlab::eada::{eada_orbit, run_eada, ConsentSet};
use matchlab::fixtures;
use matchlab::jbc::{family_by_subset, run_jbc, run_jbc_with, strongly_justifiable_family};
use matchlab::model::{pareto_compare, weakly_dominates, Matching, ParetoOrder, Problem, Student};
use matchlab::oracle::{oracle_report, verify_theorem5_steps, Oracle, DEFAULT_BUDGET};
use matchlab::simgen::{
    gen_instance, run_experiment, GenConfig, Mechanism, Metric, PreferenceModel,
};
use matchlab::sjbc_plus::{run_sjbc_plus, run_sjbc_plus_with};
use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

static SERIAL: Mutex<()> = Mutex::new(());

struct Checks {
    failed: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { failed: Vec::new() }
    }

    fn check(&mut self, name: &str, ok: bool, detail: impl AsRef<str>) {
        println!(
            "{} {name}: {}",
            if ok { "PASS" } else { "FAIL" },
            detail.as_ref()
        );
        if !ok {
            self.failed.push(name.to_owned());
        }
    }

    fn finish(self) {
        assert!(self.failed.is_empty(), "failed: {:?}", self.failed);
    }
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn names(p: &Problem, set: &BTreeSet<Student>) -> String {
    let v: Vec<&str> = set.iter().map(|&i| p.student_name(i)).collect();
    format!("{{{}}}", v.join(","))
}

fn students(p: &Problem, list: &[&str]) -> BTreeSet<Student> {
    list.iter().map(|n| p.student_by_name(n).unwrap()).collect()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

const FIXTURE_BUDGET: Duration = Duration::from_secs(1);

fn within_budget(d: Duration) -> String {
    format!("{:.1} ms", d.as_secs_f64() * 1e3)
}

#[test]
fn golden_ex1_mechanisms() {
    let _g = lock();
    let mut c = Checks::new();
    let p = fixtures::ex1();
    let ((da, _), d) = timed(|| matchlab::run_da(&p));
    c.check(
        "EX1 DA",
        da == fixtures::ex1_da(&p) && d < FIXTURE_BUDGET,
        within_budget(d),
    );
    let ((jbc, _), d) = timed(|| run_jbc(&p));
    c.check(
        "EX1 JBC",
        jbc == fixtures::ex1_jbc(&p) && d < FIXTURE_BUDGET,
        within_budget(d),
    );
    let (plus, d) = timed(|| run_sjbc_plus(&p));
    c.check(
        "EX1 SJBC+",
        plus == fixtures::ex1_justifiable_pe(&p) && d < FIXTURE_BUDGET,
        within_budget(d),
    );
    let ((full, _), d) = timed(|| run_eada(&p, &ConsentSet::all(&p)));
    c.check(
        "EX1 EADA full consent",
        full == fixtures::ex1_eada_full(&p) && d < FIXTURE_BUDGET,
        within_budget(d),
    );
    let ((partial, _), d) = timed(|| run_eada(&p, &ConsentSet::parse(&p, "i1,i5,i7").unwrap()));
    c.check(
        "EX1 EADA consent {i1,i5,i7}",
        partial == fixtures::ex1_jbc(&p) && d < FIXTURE_BUDGET,
        within_budget(d),
    );
    c.finish();
}

#[test]
fn golden_exnoeff() {
    let _g = lock();
    let mut c = Checks::new();
    let p = fixtures::exnoeff();
    let mu_j = fixtures::exnoeff_mu_j(&p);
    let (plus, d) = timed(|| run_sjbc_plus(&p));
    c.check(
        "EXNOEFF SJBC+ = mu^J",
        plus == mu_j && d < FIXTURE_BUDGET,
        within_budget(d),
    );
    let (report, d) = timed(|| oracle_report(&p, DEFAULT_BUDGET).unwrap());
    c.check(
        "EXNOEFF justifiable family = {mu^J}",
        report.justifiable == vec![mu_j.clone()] && d < FIXTURE_BUDGET,
        format!(
            "{} justifiable, {}",
            report.justifiable.len(),
            within_budget(d)
        ),
    );
    c.check(
        "EXNOEFF no justifiable matching is efficient",
        report.no_justifiable_efficient,
        format!("{} efficient matchings", report.pareto_efficient.len()),
    );
    c.finish();
}

fn serial_dictatorship(p: &Problem, order: &[Student]) -> Matching {
    let mut left: Vec<usize> = p.quotas().to_vec();
    let mut m = Matching::empty(p.num_students());
    for &i in order {
        if let Some(&s) = p.prefs(i).iter().find(|s| left[s.0] > 0) {
            left[s.0] -= 1;
            m.assign(i, Some(s));
        }
    }
    m
}

#[test]
fn golden_explus() {
    let _g = lock();
    let mut c = Checks::new();
    let p = fixtures::explus();
    let (plus, d) = timed(|| run_sjbc_plus(&p));
    let order: Vec<Student> = ["i2", "i3", "i4", "i5", "i1"]
        .iter()
        .map(|n| p.student_by_name(n).unwrap())
        .collect();
    let sd = serial_dictatorship(&p, &order);
    let oracle = Oracle::new(&p, DEFAULT_BUDGET).unwrap();
    c.check(
        "EXPLUS SJBC+ = serial dictatorship i2,i3,i4,i5,i1",
        plus == sd && d < FIXTURE_BUDGET,
        within_budget(d),
    );
    c.check(
        "EXPLUS SJBC+ is Pareto-efficient",
        matchlab::analysis::is_pareto_efficient(&p, &plus).unwrap()
            && oracle.is_pareto_efficient(&p, &plus),
        "fast check and oracle agree",
    );
    c.finish();
}

#[test]
fn golden_exd() {
    let _g = lock();
    let mut c = Checks::new();
    let p = fixtures::exd();
    let (b, d) = timed(|| {
        let base = Baseline::new(&p);
        let (jbc, _) = run_jbc_with(&p, &base);
        base.beneficiaries(&p, &jbc).unwrap()
    });
    c.check(
        "EXD B(JBC) = {i2,i3,i5,i6}",
        b == students(&p, &["i2", "i3", "i5", "i6"]) && d < FIXTURE_BUDGET,
        format!("got {}, {}", names(&p, &b), within_budget(d)),
    );
    c.finish();
}

#[test]
fn golden_exe_tightness() {
    let _g = lock();
    let mut c = Checks::new();
    let p = fixtures::exe();
    let base = Baseline::new(&p);
    let (run, d) = timed(|| run_sjbc_plus_with(&p, &base));
    let outcome = run.outcome().clone();
    let b = base.beneficiaries(&p, &outcome).unwrap();
    c.check(
        "EXE B(SJBC+) = {i1,i2,i4}",
        b == students(&p, &["i1", "i2", "i4"]) && d < FIXTURE_BUDGET,
        format!("got {}, {}", names(&p, &b), within_budget(d)),
    );
    let oracle = Oracle::new(&p, DEFAULT_BUDGET).unwrap();
    let witness = oracle.candidates().find(|m| {
        oracle.is_justifiable(&p, m)
            && oracle.beneficiaries(&p, m).len() == 5
            && pareto_compare(&p, m, &outcome).unwrap() == ParetoOrder::ADominates
    });
    c.check(
        "EXE oracle finds a 5-beneficiary justifiable matching dominating SJBC+",
        witness.is_some(),
        format!("{} candidates searched", oracle.candidates().count()),
    );
    c.finish();
}

#[test]
fn golden_ex1_orbit_and_consent_steps() {
    let _g = lock();
    let mut c = Checks::new();
    let p = fixtures::ex1();
    let target = fixtures::ex1_justifiable_pe(&p);
    let (orbit, d) = timed(|| eada_orbit(&p).unwrap());
    let hits = orbit.iter().filter(|(_, m)| *m == target).count();
    c.check(
        "EX1 no consent set yields the justifiable efficient matching",
        orbit.len() == 128 && hits == 0 && d < FIXTURE_BUDGET,
        format!(
            "{} consent sets, {hits} hits, {}",
            orbit.len(),
            within_budget(d)
        ),
    );
    let (claims, d) = timed(|| verify_theorem5_steps(&p).unwrap());
    let bad: Vec<&str> = claims
        .iter()
        .filter(|k| !k.passed)
        .map(|k| k.name.as_str())
        .collect();
    c.check(
        "EX1 nested consent steps",
        bad.is_empty() && d < FIXTURE_BUDGET,
        format!(
            "{} checks, failing {bad:?}, {}",
            claims.len(),
            within_budget(d)
        ),
    );
    c.finish();
}

#[test]
fn golden_ex1_reassignment_chain() {
    let _g = lock();
    let mut c = Checks::new();
    let p = fixtures::ex1();
    let m = fixtures::ex1_justifiable_pe(&p);
    let (chain, d) = timed(|| {
        reassignment_chain(
            &p,
            &m,
            p.student_by_name("i1").unwrap(),
            p.school_by_name("s4").unwrap(),
        )
        .unwrap()
    });
    let text = chain.render(&p);
    c.check(
        "EX1 chain from i1 claiming s4",
        chain.outcome == ChainOutcome::NonVacuous
            && !chain.truncated
            && text == "i1=>s4, i6=>s6, i3=>s3, i5=>s1, i2=>s2"
            && d < FIXTURE_BUDGET,
        text,
    );
    c.finish();
}

const BATTERY_SIZES: [usize; 4] = [4, 5, 6, 7];
const BATTERY_INSTANCES: usize = 500;
const BATTERY_SEED: u64 = 20_240_601;

#[derive(Default, Clone, Copy)]
struct Tally {
    improvable: usize,
    strong_family: usize,
    labels: usize,
    sjbc_plus: usize,
    eada: usize,
    other: usize,
}

impl Tally {
    fn add(mut self, o: Tally) -> Tally {
        self.improvable += o.improvable;
        self.strong_family += o.strong_family;
        self.labels += o.labels;
        self.sjbc_plus += o.sjbc_plus;
        self.eada += o.eada;
        self.other += o.other;
        self
    }
}

fn battery_instance(n: usize, rep: usize) -> Tally {
    let config = GenConfig {
        n,
        model: PreferenceModel::Iid,
        consent_fraction: 0.0,
        replications: BATTERY_INSTANCES,
        seed: BATTERY_SEED + n as u64,
    };
    let p = gen_instance(&config, rep);
    let mut t = Tally::default();
    let report = oracle_report(&p, DEFAULT_BUDGET).expect("n <= 7 fits the budget");
    for claim in &report.claims {
        let slot = match claim
            .name
            .split(' ')
            .take(2)
            .collect::<Vec<_>>()
            .join(" ")
            .as_str()
        {
            "lemma 1" => &mut t.improvable,
            "lemma 2" | "justifiability verdicts" => &mut t.labels,
            "theorem 1" => &mut t.strong_family,
            "theorem 3" => &mut t.sjbc_plus,
            _ => &mut t.other,
        };
        *slot += usize::from(!claim.passed);
    }
    // The strongly justifiable family once more, through the public function.
    let oracle = Oracle::new(&p, DEFAULT_BUDGET).unwrap();
    let family = strongly_justifiable_family(&p).unwrap();
    let strong: BTreeSet<Matching> = oracle
        .candidates()
        .filter(|m| oracle.is_strongly_justifiable(&p, m))
        .cloned()
        .collect();
    t.strong_family += usize::from(family != strong);
    let base = Baseline::new(&p);
    let subsets = family_by_subset(&p, &base).unwrap();
    t.strong_family += usize::from(subsets.len() != family.len());

    // EADA on a random consent set and a random extra student.
    let mut rng = ChaCha8Rng::seed_from_u64(BATTERY_SEED ^ (n as u64) << 32 ^ rep as u64);
    let w = ConsentSet::new(p.students().filter(|_| rng.random_bool(0.5)));
    let extra = p.students().choose(&mut rng).unwrap();
    let (out, _) = run_eada(&p, &w);
    let (out_more, _) = run_eada(&p, &w.with(extra));
    let (full, _) = run_eada(&p, &ConsentSet::all(&p));
    let outside = w.complement(&p);
    let ok = weakly_dominates(&p, &out, &oracle.da)
        && oracle.respects(&p, &out, &outside)
        && p.rank(extra, out_more.school_of(extra)) <= p.rank(extra, out.school_of(extra))
        && oracle.is_pareto_efficient(&p, &full)
        && oracle.dominated_respecting(&p, &out, &outside).is_none();
    t.eada += usize::from(!ok);
    t
}

#[test]
fn property_battery() {
    let _g = lock();
    let mut c = Checks::new();
    let start = Instant::now();
    let mut total = Tally::default();
    for n in BATTERY_SIZES {
        let tally = (0..BATTERY_INSTANCES)
            .into_par_iter()
            .map(|rep| battery_instance(n, rep))
            .reduce(Tally::default, Tally::add);
        println!(
            "  n={n}: {BATTERY_INSTANCES} instances, violations improvable={} strong_family={} labels={} sjbc_plus={} eada={} other={}",
            tally.improvable, tally.strong_family, tally.labels, tally.sjbc_plus, tally.eada, tally.other
        );
        total = total.add(tally);
    }
    let elapsed = start.elapsed();
    let count = |k: usize| {
        format!(
            "{k} violations over {} instances",
            BATTERY_INSTANCES * BATTERY_SIZES.len()
        )
    };
    c.check(
        "improvable set: SCC = enumeration",
        total.improvable == 0,
        count(total.improvable),
    );
    c.check(
        "cycle-subset family = strongly justifiable set, lattice = subset order",
        total.strong_family == 0,
        count(total.strong_family),
    );
    c.check(
        "label containment = definition-level justifiability",
        total.labels == 0,
        count(total.labels),
    );
    c.check(
        "SJBC+ dominance, justifiability, JBC containment, undominated",
        total.sjbc_plus == 0,
        count(total.sjbc_plus),
    );
    c.check(
        "EADA dominance, respect, consent monotonicity, efficiency",
        total.eada == 0,
        count(total.eada),
    );
    c.check(
        "DA agreement with the oracle",
        total.other == 0,
        count(total.other),
    );
    c.check(
        "battery runtime under 5 min",
        elapsed < Duration::from_secs(300),
        format!("{:.1} s", elapsed.as_secs_f64()),
    );
    c.finish();
}

const SIM_SEED: u64 = 1;
const SIM_REPS: usize = 500;

fn band(c: &mut Checks, label: &str, got: f64, want: f64, tol: f64) {
    c.check(
        label,
        (got - want).abs() <= tol,
        format!("{got:.3} vs {want} ± {tol}"),
    );
}

#[test]
fn simulation_iid_n50() {
    let _g = lock();
    let mut c = Checks::new();
    let config = GenConfig {
        n: 50,
        model: PreferenceModel::Iid,
        consent_fraction: 0.5,
        replications: SIM_REPS,
        seed: SIM_SEED,
    };
    let (stats, d) = timed(|| run_experiment(&config).unwrap());
    let mean = |m, k| stats.get(m, k).mean;
    use Mechanism::*;
    use Metric::*;
    band(&mut c, "iid DA avg rank", mean(Da, AvgRank), 4.2, 0.15);
    band(
        &mut c,
        "iid EADA-full avg rank",
        mean(EadaFull, AvgRank),
        2.6,
        0.1,
    );
    band(
        &mut c,
        "iid EADA-50% avg rank",
        mean(EadaPartial, AvgRank),
        3.3,
        0.15,
    );
    band(
        &mut c,
        "iid SJBC+ avg rank",
        mean(SjbcPlus, AvgRank),
        2.7,
        0.1,
    );
    band(
        &mut c,
        "iid SJBC+ beneficiaries",
        mean(SjbcPlus, Beneficiaries),
        22.0,
        1.5,
    );
    band(
        &mut c,
        "iid EADA-full beneficiaries",
        mean(EadaFull, Beneficiaries),
        19.8,
        1.5,
    );
    c.check(
        "iid SJBC+ beneficiaries exceed EADA-full",
        mean(SjbcPlus, Beneficiaries) > mean(EadaFull, Beneficiaries),
        format!(
            "{:.3} > {:.3}",
            mean(SjbcPlus, Beneficiaries),
            mean(EadaFull, Beneficiaries)
        ),
    );
    band(
        &mut c,
        "iid SJBC+ PE rate",
        mean(SjbcPlus, PeRate),
        66.9,
        7.0,
    );
    c.check(
        "iid EADA-full PE rate = 100",
        mean(EadaFull, PeRate) == 100.0,
        format!("{}", mean(EadaFull, PeRate)),
    );
    band(
        &mut c,
        "iid EADA-50% PE rate",
        mean(EadaPartial, PeRate),
        7.9,
        4.0,
    );
    c.check(
        "iid SJBC+ justifiable rate = 100",
        mean(SjbcPlus, JustifiableRate) == 100.0,
        format!("{}", mean(SjbcPlus, JustifiableRate)),
    );
    band(
        &mut c,
        "iid EADA-full justifiable rate",
        mean(EadaFull, JustifiableRate),
        27.3,
        7.0,
    );
    c.check(
        "iid runtime under 10 min",
        d < Duration::from_secs(600),
        format!("{:.1} s", d.as_secs_f64()),
    );
    c.finish();
}

#[test]
fn simulation_correlated_n50() {
    let _g = lock();
    let mut c = Checks::new();
    let config = GenConfig {
        n: 50,
        model: PreferenceModel::Correlated { rho: 0.5 },
        consent_fraction: 0.5,
        replications: SIM_REPS,
        seed: SIM_SEED,
    };
    let (stats, d) = timed(|| run_experiment(&config).unwrap());
    let mean = |m, k| stats.get(m, k).mean;
    use Mechanism::*;
    use Metric::*;
    band(
        &mut c,
        "correlated DA avg rank",
        mean(Da, AvgRank),
        10.4,
        0.3,
    );
    band(
        &mut c,
        "correlated SJBC+ avg rank",
        mean(SjbcPlus, AvgRank),
        5.8,
        0.2,
    );
    band(
        &mut c,
        "correlated SJBC+ PE rate",
        mean(SjbcPlus, PeRate),
        70.6,
        5.0,
    );
    band(
        &mut c,
        "correlated EADA-50% PE rate",
        mean(EadaPartial, PeRate),
        0.0,
        1.0,
    );
    c.check(
        "correlated runtime under 10 min",
        d < Duration::from_secs(600),
        format!("{:.1} s", d.as_secs_f64()),
    );
    c.finish();
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn sjbc_seconds(n: usize, rep: usize) -> f64 {
    let config = GenConfig {
        n,
        model: PreferenceModel::Iid,
        consent_fraction: 0.0,
        replications: 1,
        seed: 500 + n as u64,
    };
    let p = gen_instance(&config, rep);
    let (_, d) = timed(|| run_sjbc_plus(&p));
    d.as_secs_f64()
}

#[test]
fn scaling() {
    let _g = lock();
    let mut c = Checks::new();
    let big = sjbc_seconds(500, 0);
    c.check(
        "SJBC+ at n=500 under 60 s",
        big < 60.0,
        format!("{big:.3} s"),
    );

    let sizes = [100usize, 200, 400];
    let medians: Vec<f64> = sizes
        .iter()
        .map(|&n| median((0..7).map(|r| sjbc_seconds(n, r)).collect()))
        .collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|t| t.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    c.check(
        "SJBC+ median time grows at most cubically over n=100,200,400",
        slope <= 3.0,
        format!("log-log slope {slope:.2}, medians {medians:.4?} s"),
    );
    c.finish();
}
