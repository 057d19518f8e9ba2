use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Value};

use orbitkit::cache::{cache_load, cache_store};
use orbitkit::census::{census_with, CensusTable, RunConfig};
use orbitkit::cycles::{classify_many, find_cycles, CycleSet, Domain};
use orbitkit::error::{OrbitError, Result};
use orbitkit::genfun::{backward_gf_union_window, forward_gf, iterate_gf_with, GenfunBudget};
use orbitkit::inverse::{enumerate_backward, partition_refine, trichotomy, Relation, DEFAULT_NODE_CAP};
use orbitkit::map::{MapParam, DEFAULT_MAX_BITS, DEFAULT_MAX_STEPS};
use orbitkit::residue::{
    bi_invariance_check, closure_check, commutator_check, component_partition, divisor_conjugacy_check,
    residue_component,
};
use orbitkit::verdicts::{
    exceptional_set, natural_boundary_certificate, rationality_check, sml_pattern, verify_certificate,
    CertificateResult, ComponentVerdict, ExceptionalConfig, RationalityConfig,
    RationalityStatus, SmlResult,
};
use orbitkit::Execution;

const CACHE_ENV: &str = "ORBITKIT_CACHE";

#[derive(Parser, Debug)]
#[command(name = "orbitkit", version, about = "Experiments with the 3x+k maps")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Map parameter, congruent to ±1 mod 6.
    #[arg(long, global = true, default_value_t = 1, allow_negative_numbers = true)]
    k: i64,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_BITS)]
    max_bits: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Census cache file; the ORBITKIT_CACHE variable takes precedence.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Exit with status 2 when a result is cut off by a cap.
    #[arg(long, global = true)]
    strict: bool,
    /// Run batch work on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cycles reached from starting points up to a bound.
    #[command(allow_negative_numbers = true)]
    Cycles {
        #[arg(long, default_value_t = 1000)]
        bound: u64,
        /// Scan [-bound, bound] instead of [1, bound].
        #[arg(long)]
        all_integers: bool,
    },
    /// Attractor of each starting point.
    #[command(allow_negative_numbers = true)]
    Classify {
        #[arg(value_delimiter = ',')]
        n: Vec<BigInt>,
        #[arg(long, requires = "hi")]
        lo: Option<i64>,
        #[arg(long, requires = "lo")]
        hi: Option<i64>,
    },
    /// Backward orbit of m within |n| <= n-cap.
    #[command(allow_negative_numbers = true)]
    InverseOrbit {
        #[arg(long)]
        m: BigInt,
        #[arg(long, default_value_t = 1000)]
        n_cap: u64,
        #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
        node_cap: u64,
    },
    /// Relation between the backward orbits of two roots.
    #[command(allow_negative_numbers = true)]
    Trichotomy {
        #[arg(long)]
        m1: BigInt,
        #[arg(long)]
        m2: BigInt,
    },
    /// Residue components mod |k| under ×2 and ×3.
    #[command(allow_negative_numbers = true)]
    Residues {
        /// Only the component of this residue.
        #[arg(long)]
        component: Option<u64>,
        /// Also run the invariance, commutator and conjugacy checks.
        #[arg(long)]
        self_test: bool,
        #[arg(long, default_value_t = 10_000)]
        range: i64,
        /// Random rationals for the commutator check.
        #[arg(long, default_value_t = 1000)]
        depth: usize,
        /// Check d'·T_{k/d'}(n) = T_k(d'·n) for this multiplier.
        #[arg(long)]
        multiplier: Option<i64>,
    },
    /// Rationality window verdict for a union of backward orbits.
    #[command(allow_negative_numbers = true)]
    RationalityCheck {
        #[arg(long, required = true, value_delimiter = ',')]
        m: Vec<BigInt>,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 10)]
        min_tail_periods: u64,
    },
    /// Eventually periodic zero pattern of a 0/1 sequence.
    #[command(allow_negative_numbers = true)]
    Sml {
        /// Zero positions; defaults to the zeros of the backward window of --m.
        #[arg(long, value_delimiter = ',', conflicts_with = "m")]
        zeros: Option<Vec<u64>>,
        #[arg(long)]
        m: Option<BigInt>,
        #[arg(long, default_value_t = 2000)]
        n: u64,
        #[arg(long, default_value_t = 64)]
        d_max: u64,
    },
    /// Natural-boundary certificates: a disjoint partner for each m.
    #[command(allow_negative_numbers = true)]
    Certify {
        #[arg(long, required_unless_present = "from")]
        m: Option<BigInt>,
        #[arg(long, requires = "to", conflicts_with = "m")]
        from: Option<u64>,
        #[arg(long, requires = "from")]
        to: Option<u64>,
        #[arg(long, default_value_t = 1000)]
        bound: u64,
    },
    /// Exceptional set search.
    #[command(allow_negative_numbers = true)]
    ExceptionalSet {
        #[arg(long, default_value_t = 1000)]
        cycle_bound: u64,
        #[arg(long, default_value_t = 1000)]
        partner_search_bound: u64,
    },
    /// Rational generating function of the m-th iterate.
    #[command(allow_negative_numbers = true)]
    GenfunIterate {
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = GenfunBudget::default().max_m)]
        max_m: u32,
        /// Also print this many series coefficients.
        #[arg(long)]
        terms: Option<usize>,
    },
    /// Rational generating function of a forward orbit.
    #[command(allow_negative_numbers = true)]
    GenfunForward {
        #[arg(long)]
        n: BigInt,
        #[arg(long)]
        terms: Option<usize>,
    },
    /// 0/1 coefficients of a backward-orbit generating function.
    #[command(allow_negative_numbers = true)]
    OrbitWindow {
        #[arg(long, required = true, value_delimiter = ',')]
        m: Vec<BigInt>,
        #[arg(long, default_value_t = 1000)]
        n: u64,
    },
    /// Attractor census with block statistics.
    #[command(allow_negative_numbers = true)]
    Census {
        #[arg(long, default_value_t = 1)]
        lo: i64,
        #[arg(long)]
        hi: i64,
        #[arg(long, default_value_t = 1000)]
        block: u64,
    },
    /// Splits one root of a disjoint collection of backward orbits.
    #[command(allow_negative_numbers = true)]
    Refine {
        #[arg(long, required = true, value_delimiter = ',')]
        roots: Vec<BigInt>,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

struct Output {
    text: String,
    /// Some result was cut off by a cap.
    unresolved: bool,
}

impl Output {
    fn json(v: Value, unresolved: bool) -> Result<Self> {
        Ok(Output { text: serde_json::to_string_pretty(&v)? + "\n", unresolved })
    }

    fn csv(text: String, unresolved: bool) -> Result<Self> {
        Ok(Output { text, unresolved })
    }
}

fn strs<'a>(xs: impl IntoIterator<Item = &'a BigInt>) -> Vec<String> {
    xs.into_iter().map(|x| x.to_string()).collect()
}

fn no_csv(cmd: &str) -> OrbitError {
    OrbitError::Precondition(format!("{cmd} has no csv output"))
}

fn param(g: &Global) -> Result<MapParam> {
    let e = if g.sequential { Execution::Sequential } else { Execution::default() };
    Ok(MapParam::with_caps(g.k, g.max_steps, g.max_bits)?.with_execution(e))
}

fn run(cli: &Cli) -> Result<Output> {
    let g = &cli.global;
    let p = param(g)?;
    match &cli.command {
        Command::Cycles { bound, all_integers } => {
            let domain = if *all_integers { Domain::AllIntegers } else { Domain::Positive };
            let s = find_cycles(&p, *bound, domain);
            let capped = !s.capped.is_empty();
            match g.format {
                Format::Json => Output::json(
                    Value::Array(
                        s.cycles
                            .iter()
                            .map(|c| json!({ "generator": c.generator().to_string(), "elements": strs(c.elements()) }))
                            .collect(),
                    ),
                    capped,
                ),
                Format::Csv => {
                    let mut out = String::from("generator,length,elements\n");
                    for c in &s.cycles {
                        out += &format!("{},{},{}\n", c.generator(), c.len(), strs(c.elements()).join(" "));
                    }
                    Output::csv(out, capped)
                }
            }
        }
        Command::Classify { n, lo, hi } => {
            let mut starts = n.clone();
            if let (Some(lo), Some(hi)) = (lo, hi) {
                starts.extend((*lo..=*hi).map(BigInt::from));
            }
            if starts.is_empty() {
                return Err(OrbitError::Precondition("nothing to classify".into()));
            }
            let rc = classify_many(&p, &starts, &CycleSet::new());
            let unresolved = rc.outcomes.iter().any(|o| o.cycle().is_none());
            match g.format {
                Format::Json => Output::json(
                    Value::Array(
                        rc.outcomes
                            .iter()
                            .map(|o| match &o.result {
                                orbitkit::cycles::Attraction::Attracted { cycle, steps_to_entry } => {
                                    json!({ "n": o.n.to_string(), "cycle": cycle.to_string(), "steps": steps_to_entry })
                                }
                                orbitkit::cycles::Attraction::Unresolved => {
                                    json!({ "n": o.n.to_string(), "cycle": null, "steps": null })
                                }
                            })
                            .collect(),
                    ),
                    unresolved,
                ),
                Format::Csv => {
                    let mut out = String::from("n,cycle,steps\n");
                    for o in &rc.outcomes {
                        match &o.result {
                            orbitkit::cycles::Attraction::Attracted { cycle, steps_to_entry } => {
                                out += &format!("{},{cycle},{steps_to_entry}\n", o.n)
                            }
                            orbitkit::cycles::Attraction::Unresolved => out += &format!("{},unresolved,\n", o.n),
                        }
                    }
                    Output::csv(out, unresolved)
                }
            }
        }
        Command::InverseOrbit { m, n_cap, node_cap } => {
            let s = enumerate_backward(&p, m, *n_cap, *node_cap)?;
            let partial = !s.is_exact();
            match g.format {
                Format::Json => Output::json(
                    json!({
                        "root": m.to_string(),
                        "n_cap": n_cap,
                        "exhausted_below": s.frontier_exhausted_below,
                        "exact": s.is_exact(),
                        "depth": s.depth_used,
                        "frontier_size": s.frontier.len(),
                        "positive": strs(&s.positive_members),
                        "negative": strs(&s.negative_members),
                    }),
                    partial,
                ),
                Format::Csv => {
                    let mut out = String::from("n\n");
                    for x in s.members() {
                        out += &format!("{x}\n");
                    }
                    Output::csv(out, partial)
                }
            }
        }
        Command::Trichotomy { m1, m2 } => {
            if g.format == Format::Csv {
                return Err(no_csv("trichotomy"));
            }
            let v = trichotomy(&p, m1, m2)?;
            Output::json(
                json!({
                    "m1": m1.to_string(),
                    "m2": m2.to_string(),
                    "relation": v.relation.as_str(),
                    "witness": v.witness.to_string(),
                }),
                v.relation == Relation::Unresolved,
            )
        }
        Command::Residues { component, self_test, range, depth, multiplier } => {
            if g.format == Format::Csv {
                return Err(no_csv("residues"));
            }
            let comps = match component {
                Some(a) => vec![residue_component(g.k, *a)?],
                None => component_partition(g.k)?.components,
            };
            let mut v = json!({
                "modulus": g.k.unsigned_abs(),
                "components": comps.iter().map(|c| c.members().iter().collect::<Vec<_>>()).collect::<Vec<_>>(),
                "closed": comps.iter().map(closure_check).collect::<Vec<_>>(),
            });
            let mut failed = Vec::new();
            if *self_test {
                let bi = bi_invariance_check(&p, -range..=*range)?;
                let zero = BigRational::from_integer(BigInt::from(0));
                let comm = commutator_check(g.k, &zero, *depth, g.seed);
                v["bi_invariant"] = json!(bi);
                v["commutator"] = json!(comm);
                if !bi {
                    failed.push("bi-invariance");
                }
                if !comm {
                    failed.push("commutator identities");
                }
            }
            if let Some(d) = multiplier {
                let ok = divisor_conjugacy_check(g.k, *d, 1..=*range)?;
                v["conjugacy"] = json!(ok);
                if !ok {
                    failed.push("divisor conjugacy");
                }
            }
            if !failed.is_empty() {
                return Err(OrbitError::Verification(format!("{} failed", failed.join(", "))));
            }
            Output::json(v, false)
        }
        Command::RationalityCheck { m, n, min_tail_periods } => {
            if g.format == Format::Csv {
                return Err(no_csv("rationality-check"));
            }
            let w = backward_gf_union_window(&p, m, *n)?;
            let cfg = RationalityConfig { min_tail_periods: *min_tail_periods, ..RationalityConfig::default() };
            let v = rationality_check(&w, &cfg);
            let mut out = json!({
                "status": v.status.name(),
                "X": Value::Null,
                "k0": Value::Null,
                "closure_ok": v.closure_ok,
                "exact_below": w.exact_below,
            });
            match &v.status {
                RationalityStatus::ConsistentWithRational { x, k0 } => {
                    out["X"] = json!(x.members());
                    out["k0"] = json!(k0);
                }
                RationalityStatus::InconsistentWithinWindow { witness } => {
                    out["witness"] = json!([witness.0, witness.1]);
                }
                RationalityStatus::Inconclusive => {}
            }
            Output::json(out, v.status == RationalityStatus::Inconclusive)
        }
        Command::Sml { zeros, m, n, d_max } => {
            if g.format == Format::Csv {
                return Err(no_csv("sml"));
            }
            let (zeros, partial): (BTreeSet<u64>, bool) = match (zeros, m) {
                (Some(z), _) => (z.iter().copied().collect(), false),
                (None, Some(m)) => {
                    let w = backward_gf_union_window(&p, std::slice::from_ref(m), *n)?;
                    ((1..=*n).filter(|&i| !w.bit(i)).collect(), !w.is_exact())
                }
                (None, None) => return Err(OrbitError::Precondition("give --zeros or --m".into())),
            };
            match sml_pattern(&zeros, *n, *d_max)? {
                SmlResult::Match(mm) => Output::json(
                    json!({
                        "match": true,
                        "d": mm.d,
                        "progressions": mm.progressions,
                        "n0": mm.n0,
                        "exceptions": mm.exceptions,
                    }),
                    partial,
                ),
                SmlResult::NoMatch => Output::json(json!({ "match": false }), partial),
            }
        }
        Command::Certify { m, from, to, bound } => {
            let ms: Vec<BigInt> = match (m, from, to) {
                (Some(m), _, _) => vec![m.clone()],
                (None, Some(a), Some(b)) => (*a..=*b).map(BigInt::from).collect(),
                _ => return Err(OrbitError::Precondition("give --m or --from/--to".into())),
            };
            let mut rows = Vec::new();
            for m in &ms {
                let r = natural_boundary_certificate(&p, m, *bound)?;
                rows.push((m.clone(), r));
            }
            if let Some((m, _)) = rows
                .iter()
                .find(|(_, r)| r.certificate().is_some_and(|c| !verify_certificate(&p, c)))
            {
                return Err(OrbitError::Verification(format!("certificate for {m} failed re-verification")));
            }
            match g.format {
                Format::Json => Output::json(
                    Value::Array(
                        rows.iter()
                            .map(|(m, r)| match r {
                                CertificateResult::Certified(c) => json!({
                                    "m": m.to_string(),
                                    "status": "Certificate",
                                    "partner": c.partner.to_string(),
                                    "witness": c.witness.witness.to_string(),
                                }),
                                CertificateResult::NoCertificateFound => {
                                    json!({ "m": m.to_string(), "status": "NoCertificateFound" })
                                }
                            })
                            .collect(),
                    ),
                    false,
                ),
                Format::Csv => {
                    let mut out = String::from("m,status,partner\n");
                    for (m, r) in &rows {
                        match r {
                            CertificateResult::Certified(c) => out += &format!("{m},Certificate,{}\n", c.partner),
                            CertificateResult::NoCertificateFound => out += &format!("{m},NoCertificateFound,\n"),
                        }
                    }
                    Output::csv(out, false)
                }
            }
        }
        Command::ExceptionalSet { cycle_bound, partner_search_bound } => {
            if g.format == Format::Csv {
                return Err(no_csv("exceptional-set"));
            }
            let cfg = ExceptionalConfig::new(*cycle_bound, *partner_search_bound);
            let r = exceptional_set(&p, &cfg)?;
            let mut branch = Value::Null;
            let mut children = Vec::new();
            let comps: Vec<Value> = r
                .per_component
                .iter()
                .map(|c| {
                    let base = json!({
                        "component": c.component.members(),
                        "attractors": c.attractors.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                    });
                    match &c.verdict {
                        ComponentVerdict::Certified { exceptional, certificate_pairs, branch: b, children: ch } => {
                            if let Some(b) = b {
                                if branch.is_null() {
                                    branch = json!(b.to_string());
                                    children = strs(ch);
                                }
                            }
                            let mut v = base;
                            v["status"] = json!("Certified");
                            v["exceptional"] = json!(strs(exceptional));
                            v["certificate_pairs"] = json!(certificate_pairs
                                .iter()
                                .map(|(a, b)| [a.to_string(), b.to_string()])
                                .collect::<Vec<_>>());
                            v["branch"] = b.as_ref().map_or(Value::Null, |b| json!(b.to_string()));
                            v["children"] = json!(strs(ch));
                            v
                        }
                        ComponentVerdict::Unresolved { reason } => {
                            let mut v = base;
                            v["status"] = json!("Unresolved");
                            v["reason"] = json!(reason);
                            v
                        }
                    }
                })
                .collect();
            let unresolved = r.e_k.is_none();
            Output::json(
                json!({
                    "k": r.k,
                    "E": r.e_k.as_ref().map(strs),
                    "branch": branch,
                    "children": children,
                    "components": comps,
                }),
                unresolved,
            )
        }
        Command::GenfunIterate { m, max_m, terms } => {
            if g.format == Format::Csv {
                return Err(no_csv("genfun-iterate"));
            }
            let s = iterate_gf_with(&p, *m, GenfunBudget { max_m: *max_m })?;
            let mut v = s.to_json();
            v["display"] = json!(s.to_string());
            if let Some(t) = terms {
                v["terms"] = json!(strs(&s.expand(*t)));
            }
            Output::json(v, false)
        }
        Command::GenfunForward { n, terms } => {
            if g.format == Format::Csv {
                return Err(no_csv("genfun-forward"));
            }
            match forward_gf(&p, n) {
                Some(s) => {
                    let mut v = s.to_json();
                    v["display"] = json!(s.to_string());
                    if let Some(t) = terms {
                        v["terms"] = json!(strs(&s.expand(*t)));
                    }
                    Output::json(v, false)
                }
                None => Output::json(json!({ "status": "Unresolved" }), true),
            }
        }
        Command::OrbitWindow { m, n } => {
            let w = backward_gf_union_window(&p, m, *n)?;
            let partial = !w.is_exact();
            match g.format {
                Format::Json => Output::json(
                    json!({
                        "roots": strs(m),
                        "n": n,
                        "exact_below": w.exact_below,
                        "coefficients": w.bits.iter().map(|&b| u8::from(b)).collect::<Vec<_>>(),
                    }),
                    partial,
                ),
                Format::Csv => {
                    let mut out = String::from("n,coefficient,exact\n");
                    for i in 1..=*n {
                        out += &format!("{i},{},{}\n", u8::from(w.bit(i)), u8::from(i < w.exact_below));
                    }
                    Output::csv(out, partial)
                }
            }
        }
        Command::Census { lo, hi, block } => {
            let cfg = RunConfig { k: g.k, lo: *lo, hi: *hi, max_steps: g.max_steps, max_bits: g.max_bits, block_size: *block };
            let cache = std::env::var_os(CACHE_ENV).map(PathBuf::from).or_else(|| g.cache.clone());
            let table = load_or_build(&cfg, cache.as_deref(), param(g)?.execution())?;
            let unresolved = table.blocks.iter().any(|b| b.unresolved > 0);
            match g.format {
                Format::Json => Output::csv(table.to_json()? + "\n", unresolved),
                Format::Csv => Output::csv(table.to_csv(), unresolved),
            }
        }
        Command::Refine { roots, index } => {
            if g.format == Format::Csv {
                return Err(no_csv("refine"));
            }
            let r = partition_refine(&p, roots, *index)?;
            Output::json(json!({ "roots": strs(&r.roots), "removed": strs(&r.removed) }), false)
        }
    }
}

fn load_or_build(cfg: &RunConfig, cache: Option<&Path>, execution: Execution) -> Result<CensusTable> {
    match cache {
        Some(path) if path.exists() => cache_load(path, cfg),
        Some(path) => {
            let t = census_with(cfg, execution)?;
            cache_store(path, &t)?;
            Ok(t)
        }
        None => census_with(cfg, execution),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(o) => {
            if let Err(e) = emit(&cli.global.out, &o.text) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            if cli.global.strict && o.unresolved {
                eprintln!("unresolved: a result was cut off by --max-steps or --max-bits");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
