//! Acceptance criteria 1-12, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed. The process
//! fails on any failing criterion except those in `KNOWN_FAILURES`, whose
//! checks are kept exactly as stated; a listed criterion that starts to pass
//! also fails the run so the list cannot go stale.

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use orbitkit::genfun::{backward_gf_window, forward_gf, iterate_gf, verify_pole_structure, Denominator};
use orbitkit::inverse::{fabry_case_check, trichotomy, BackwardAtlas, Relation};
use orbitkit::map::{t_apply, MapParam};
use orbitkit::poly::Poly;
use orbitkit::residue::{
    bi_invariance_check, closure_check, commutator_check, component_partition, divisor_conjugacy_check,
    ResidueSet,
};
use orbitkit::verdicts::{
    natural_boundary_certificate, rationality_check, sml_pattern, verify_certificate, CertificateResult,
    MembershipWindow, RationalityConfig, RationalityStatus, SmlResult,
};

const LIMIT_CYCLES: Duration = Duration::from_secs(1);
const LIMIT_EXCEPTIONAL: Duration = Duration::from_secs(5);
const LIMIT_CERTIFICATES: Duration = Duration::from_secs(30);
const LIMIT_FABRY: Duration = Duration::from_secs(5);
const LIMIT_ITERATE_GF: Duration = Duration::from_secs(10);

const FORWARD_TERMS: usize = 64;
const COMMUTATOR_SAMPLES: usize = 1000;
const TRICHOTOMY_PAIRS: usize = 500;
const TRICHOTOMY_WATERMARK: u64 = 10_000;
const SML_CASES: u64 = 100;

/// Criteria that fail as stated, with the reason (see the project notes).
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    12,
    "T_1(1) = 2 puts 1 into the backward orbit of 2, so the m = 2 window is all ones, not all ones minus {1}",
)];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn mp(k: i64) -> MapParam {
    MapParam::new(k).unwrap()
}

fn b(n: i64) -> BigInt {
    BigInt::from(n)
}

fn cli(args: &[&str]) -> (Value, Duration) {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_orbitkit")).args(args).output().expect("run orbitkit");
    let elapsed = t.elapsed();
    assert!(out.status.success(), "orbitkit {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    (serde_json::from_slice(&out.stdout).expect("json output"), elapsed)
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array()
        .map(|a| a.iter().map(|x| x.as_str().unwrap_or("?").to_string()).collect())
        .unwrap_or_default()
}

fn cycle_summary(v: &Value) -> (Vec<String>, Vec<usize>) {
    let cycles = v.as_array().cloned().unwrap_or_default();
    let gens = cycles.iter().map(|c| c["generator"].as_str().unwrap_or("?").to_string()).collect();
    let lens = cycles.iter().map(|c| c["elements"].as_array().map_or(0, |e| e.len())).collect();
    (gens, lens)
}

fn criterion_1() -> Verdict {
    let (v, t) = cli(&["cycles", "--k", "-1", "--bound", "200"]);
    let (gens, lens) = cycle_summary(&v);
    let ok = gens == ["1", "5", "17"] && lens == [1, 3, 11] && t < LIMIT_CYCLES;
    verdict(ok, format!("k=-1 generators {gens:?} lengths {lens:?} in {t:.2?} (limit {LIMIT_CYCLES:?})"))
}

fn criterion_2() -> Verdict {
    let (v, t) = cli(&["cycles", "--k", "1", "--bound", "1000"]);
    let (gens, _) = cycle_summary(&v);
    let elements: Vec<Vec<String>> = v.as_array().unwrap().iter().map(|c| strings(&c["elements"])).collect();
    let ok = elements == vec![vec!["1".to_string(), "2".to_string()]] && t < LIMIT_CYCLES;
    verdict(ok, format!("k=1 cycles {elements:?} (generators {gens:?}) in {t:.2?} (limit {LIMIT_CYCLES:?})"))
}

fn criterion_3() -> Verdict {
    let (one, t1) = cli(&["exceptional-set", "--k", "1"]);
    let (minus, t2) = cli(&["exceptional-set", "--k", "-1"]);
    let e1 = strings(&one["E"]);
    let ok1 = e1 == ["1", "2", "4", "8"] && one["branch"] == "8" && strings(&one["children"]) == ["16", "5"];
    let comps = minus["components"].as_array().cloned().unwrap_or_default();
    let ok2 = minus["E"].as_array().is_some_and(|e| e.is_empty())
        && comps.iter().all(|c| c["status"] == "Certified" && c["attractors"].as_array().map_or(0, |a| a.len()) == 3);
    let t = t1 + t2;
    verdict(
        ok1 && ok2 && t < LIMIT_EXCEPTIONAL,
        format!(
            "k=1 E={e1:?} branch={} children={:?}; k=-1 E={} over {} component(s); {t:.2?} (limit {LIMIT_EXCEPTIONAL:?})",
            one["branch"],
            strings(&one["children"]),
            minus["E"],
            comps.len()
        ),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut problems = Vec::new();
    for k in [-1i64, 1] {
        let p = mp(k);
        let ms: Vec<BigInt> = (1..=1000).map(BigInt::from).collect();
        let results = p.execution().map(&ms, |m| natural_boundary_certificate(&p, m, 1000).unwrap());
        for (m, r) in ms.iter().zip(&results) {
            let expect = k == -1 || ![1, 2, 4, 8].contains(&i64::try_from(m).unwrap());
            match r {
                CertificateResult::Certified(c) if expect => {
                    if !verify_certificate(&p, c) {
                        problems.push(format!("k={k} m={m}: certificate does not re-verify"));
                    }
                }
                CertificateResult::NoCertificateFound if !expect => {}
                _ => problems.push(format!("k={k} m={m}: {}", if expect { "missing" } else { "unexpected" })),
            }
        }
    }
    let t = start.elapsed();
    verdict(
        problems.is_empty() && t < LIMIT_CERTIFICATES,
        format!("2000 sweeps, {} problem(s) {:?}; {t:.2?} (limit {LIMIT_CERTIFICATES:?})", problems.len(), problems.first()),
    )
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let ok = fabry_case_check(&mp(1), &b(3), 1_000_000).unwrap();
    let t = start.elapsed();
    verdict(ok && t < LIMIT_FABRY, format!("O^-(3) up to 10^6 is the doubling chain: {ok}; {t:.2?} (limit {LIMIT_FABRY:?})"))
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut bad = Vec::new();
    for k in [1i64, -1, 5] {
        for m in 1..=4 {
            match iterate_gf(&mp(k), m) {
                Ok(g) if verify_pole_structure(&g, m) => {}
                Ok(_) => bad.push(format!("k={k} m={m}: pole structure")),
                Err(e) => bad.push(format!("k={k} m={m}: {e}")),
            }
        }
    }
    let t = start.elapsed();
    verdict(
        bad.is_empty() && t < LIMIT_ITERATE_GF,
        format!("12 series, 512-coefficient oracle and pole check, failures {bad:?}; {t:.2?} (limit {LIMIT_ITERATE_GF:?})"),
    )
}

fn direct_iterates(k: i64, n: i64, count: usize) -> Vec<BigInt> {
    let p = mp(k);
    let mut x = b(n);
    (0..count)
        .map(|_| {
            let y = x.clone();
            x = t_apply(&p, &x);
            y
        })
        .collect()
}

fn criterion_7() -> Verdict {
    let g = forward_gf(&mp(-1), &b(5)).unwrap();
    let shape = g.numerator == Poly::from_i64(&[5, 7, 10]) && g.denominator == Denominator::Pow { period: 3, exp: 1 };
    let m1 = g.expand(FORWARD_TERMS) == direct_iterates(-1, 5, FORWARD_TERMS);
    let h = forward_gf(&mp(1), &b(3)).unwrap();
    let m2 = h.expand(FORWARD_TERMS) == direct_iterates(1, 3, FORWARD_TERMS);
    verdict(shape && m1 && m2, format!("k=-1,n=5: {g} (expansion ok: {m1}); k=1,n=3: {h} (expansion ok: {m2})"))
}

fn criterion_8() -> Verdict {
    let part = component_partition(5).unwrap();
    let want = vec![ResidueSet::new(5, [0]).unwrap(), ResidueSet::new(5, [1, 2, 3, 4]).unwrap()];
    let ks = [1i64, -1, 5, -5, 7, -7, 35];
    let closed = ks.iter().all(|&k| component_partition(k).unwrap().components.iter().all(closure_check));
    let bi = ks.iter().all(|&k| bi_invariance_check(&mp(k), -10_000..=10_000).unwrap());
    let zero = BigRational::from_integer(b(0));
    let comm = ks.iter().all(|&k| commutator_check(k, &zero, COMMUTATOR_SAMPLES, 0));
    verdict(
        part.components == want && closed && bi && comm,
        format!(
            "partition(5) = [{}], closure {closed}, bi-invariance on [-10^4, 10^4] {bi}, commutators over {COMMUTATOR_SAMPLES} rationals {comm}",
            part.components.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_9() -> Verdict {
    let ok = divisor_conjugacy_check(35, 5, 1..=10_000).unwrap();
    verdict(ok, format!("5·T_7(n) = T_35(5n) for n in [1, 10^4]: {ok}"))
}

fn forward_contains(k: i64, from: i64, target: i64) -> bool {
    let p = mp(k);
    let mut seen = std::collections::HashSet::new();
    let mut x = b(from);
    while seen.insert(x.clone()) {
        if x == b(target) {
            return true;
        }
        x = t_apply(&p, &x);
    }
    false
}

fn criterion_10() -> Verdict {
    let atlases: Vec<(i64, BackwardAtlas)> =
        [1i64, -1].iter().map(|&k| (k, BackwardAtlas::build(&mp(k), TRICHOTOMY_WATERMARK).unwrap())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut counts = [0usize; 5];
    let mut problems = Vec::new();
    let mut done = 0;
    while done < TRICHOTOMY_PAIRS {
        let (k, atlas) = &atlases[rng.random_range(0..2)];
        let m1: i64 = rng.random_range(1..=10_000);
        let m2: i64 = rng.random_range(1..=10_000);
        if m1 == m2 {
            continue;
        }
        done += 1;
        let v = trichotomy(&mp(*k), &b(m1), &b(m2)).unwrap();
        let ok = match v.relation {
            Relation::NestedFirstInSecond => {
                counts[0] += 1;
                forward_contains(*k, m1, m2) && !forward_contains(*k, m2, m1)
            }
            Relation::NestedSecondInFirst => {
                counts[1] += 1;
                forward_contains(*k, m2, m1) && !forward_contains(*k, m1, m2)
            }
            Relation::Identical => {
                counts[2] += 1;
                forward_contains(*k, m1, m2) && forward_contains(*k, m2, m1)
            }
            Relation::Disjoint => {
                counts[3] += 1;
                let (s1, s2) = (atlas.sample(m1).unwrap(), atlas.sample(m2).unwrap());
                let exact = s1.exhausted_below > TRICHOTOMY_WATERMARK && s2.exhausted_below > TRICHOTOMY_WATERMARK;
                let a: BTreeSet<i64> = s1.members.into_iter().collect();
                exact && s2.members.iter().all(|x| !a.contains(x))
            }
            Relation::Unresolved => {
                counts[4] += 1;
                false
            }
        };
        if !ok {
            problems.push(format!("k={k} ({m1}, {m2}) {:?}", v.relation));
        }
    }
    verdict(
        problems.is_empty(),
        format!(
            "{TRICHOTOMY_PAIRS} pairs: nested {}+{}, identical {}, disjoint {}, unresolved {}; problems {:?}",
            counts[0],
            counts[1],
            counts[2],
            counts[3],
            counts[4],
            problems.first()
        ),
    )
}

/// Eventually periodic zero set with a primitive period `d <= 30`.
fn synthetic_zeros(rng: &mut ChaCha8Rng, n: u64) -> (BTreeSet<u64>, u64, Vec<u64>) {
    loop {
        let d: u64 = rng.random_range(1..=30);
        let prog: Vec<u64> = (0..d).filter(|_| rng.random_bool(0.4)).collect();
        let primitive =
            !(1..d).any(|e| d.is_multiple_of(e) && (0..d).all(|a| prog.contains(&a) == prog.contains(&(a % e))));
        if !primitive {
            continue;
        }
        let n0: u64 = rng.random_range(1..=n / 4);
        let mut zeros: BTreeSet<u64> = (n0..=n).filter(|i| prog.contains(&(i % d))).collect();
        for i in 1..n0 {
            if rng.random_bool(0.5) {
                zeros.insert(i);
            }
        }
        return (zeros, d, prog);
    }
}

fn criterion_11() -> Verdict {
    let w = backward_gf_window(&mp(1), &b(3), 10_000).unwrap();
    let v = rationality_check(&w, &RationalityConfig::default());
    let inconsistent = w.is_exact() && matches!(v.status, RationalityStatus::InconsistentWithinWindow { .. });

    let ones = MembershipWindow::from_fn(5, 1, 1000, |_| true).unwrap();
    let v = rationality_check(&ones, &RationalityConfig::default());
    let all = ResidueSet::full(5).unwrap();
    let consistent = matches!(&v.status, RationalityStatus::ConsistentWithRational { x, .. } if *x == all) && v.closure_ok;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 4000;
    let mut recovered = 0;
    for _ in 0..SML_CASES {
        let (zeros, d, prog) = synthetic_zeros(&mut rng, n);
        if let SmlResult::Match(m) = sml_pattern(&zeros, n, 30).unwrap() {
            if m.d == d && m.progressions == prog {
                recovered += 1;
            }
        }
    }
    verdict(
        inconsistent && consistent && recovered == SML_CASES,
        format!(
            "O^-(3) window inconsistent: {inconsistent}; all-ones window consistent with closure: {consistent}; sml recovered {recovered}/{SML_CASES}"
        ),
    )
}

fn criterion_12() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (m, prefix) in [(1i64, vec![]), (2, vec![1u64]), (4, vec![1, 2]), (8, vec![1, 2, 4])] {
        let w = backward_gf_window(&mp(1), &b(m), 2000).unwrap();
        let zeros: Vec<u64> = (1..=2000).filter(|&n| !w.bit(n)).collect();
        let good = w.is_exact() && zeros == prefix;
        ok &= good;
        parts.push(format!("m={m} missing {zeros:?} want {prefix:?}{}", if good { "" } else { " MISMATCH" }));
    }
    verdict(ok, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Verdict); 12] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    let mut unexpected = Vec::new();
    for (id, f) in criteria {
        let v = f();
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id);
        println!("criterion {id:>2} {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        match (v.pass, known) {
            (false, Some((_, why))) => println!("             known failure: {why}"),
            (false, None) => unexpected.push(format!("criterion {id} failed")),
            (true, Some(_)) => unexpected.push(format!("criterion {id} is listed as a known failure but passed")),
            (true, None) => {}
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{}", unexpected.join("\n"));
        ExitCode::FAILURE
    }
}
