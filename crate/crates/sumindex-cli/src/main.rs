//! Command-line surface: instance generation, index build/query/verify,
//! and the scaling experiment harness.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error,
//! 3 I/O or data-format error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sumindex::bench::{self, run_grid};
use sumindex::{preprocess, Element, Instance, KSumIndex, Mode, MODULUS};

#[derive(Parser)]
#[command(
    name = "sumindex",
    version,
    about = "Sum-membership indexing over preprocessed lists"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a uniformly random instance file.
    Gen {
        /// Elements per list.
        #[arg(long)]
        n: usize,
        /// Arity: the instance holds k-1 lists.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an index from an instance file; the result is always
    /// verified before it is written.
    Build {
        #[arg(long)]
        instance: PathBuf,
        /// Time/space knob in (0, 1): queries cost ~n^delta evaluations.
        #[arg(long)]
        delta: f64,
        /// Parameter regime: general|random.
        #[arg(long, default_value = "general")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Verification failures tolerated per level before L grows.
        #[arg(long, default_value_t = 4)]
        max_retries: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer membership queries against a built index.
    Query {
        #[arg(long)]
        index: PathBuf,
        /// One element value to query.
        #[arg(long)]
        c: Option<String>,
        /// Batch file: one decimal element value per line.
        #[arg(long)]
        queries: Option<PathBuf>,
    },
    /// Re-check an index against its instance file.
    Verify {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        /// `full` re-runs the whole verification; `sampled:S` spot
        /// checks S members and S non-members.
        #[arg(long, default_value = "full")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build/query scaling measurements over an n grid, written as CSV.
    BenchScaling {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        delta: f64,
        /// Parameter regime: general|random.
        #[arg(long, default_value = "general")]
        mode: String,
        /// Comma-separated list sizes, at least four (e.g. 64,128,256,512).
        #[arg(long)]
        grid: String,
        /// Comma-separated seeds, one build per (n, seed).
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        /// Queries measured per cell (half members, half non-members).
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn verification(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn io(path: &Path, err: impl std::fmt::Display) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {err}", path.display()),
    }
}

fn parse_mode(s: &str) -> Result<Mode, Failure> {
    s.parse::<Mode>().map_err(usage)
}

fn check_delta(delta: f64) -> Result<f64, Failure> {
    if delta.is_finite() && delta > 0.0 && delta < 1.0 {
        Ok(delta)
    } else {
        Err(usage(format!("delta must lie in (0, 1), got {delta}")))
    }
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
    Instance::parse(&text).map_err(|e| io(path, e))
}

fn load_index(path: &Path) -> Result<KSumIndex, Failure> {
    let bytes = fs::read(path).map_err(|e| io(path, e))?;
    KSumIndex::deserialize(&bytes).map_err(|e| io(path, e))
}

fn parse_comma_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(|f| f.trim())
        .filter(|f| !f.is_empty())
        .map(|f| {
            f.parse::<T>()
                .map_err(|_| usage(format!("invalid {what} entry `{f}`")))
        })
        .collect()
}

fn parse_element(s: &str) -> Result<Element, String> {
    match s.parse::<u64>() {
        Ok(v) if v < MODULUS => Ok(Element::new(v)),
        Ok(v) => Err(format!("element {v} not below the modulus")),
        Err(_) => Err(format!("invalid element `{s}`")),
    }
}

fn query_line(index: &KSumIndex, c: Element) -> String {
    let out = index.query(c);
    match out.witness {
        Some(t) => {
            let indices: Vec<String> = t.indices().iter().map(|i| i.to_string()).collect();
            format!("yes {} steps={}", indices.join(" "), out.f_evals)
        }
        None => format!("no steps={}", out.f_evals),
    }
}

fn cmd_gen(n: usize, k: usize, seed: u64, out: &Path) -> Result<(), Failure> {
    if n < 1 {
        return Err(usage("n must be at least 1"));
    }
    if !(2..=16).contains(&k) {
        return Err(usage("k must lie in [2, 16]"));
    }
    if (n as u64).checked_pow((k - 1) as u32).is_none_or(|d| d > MODULUS) {
        return Err(usage(format!("n^(k-1) too large for n={n}, k={k}")));
    }
    let instance = bench::random_instance(n, k, seed);
    fs::write(out, instance.to_text()).map_err(|e| io(out, e))
}

fn cmd_build(
    instance_path: &Path,
    delta: f64,
    mode: &str,
    seed: u64,
    max_retries: u64,
    out: &Path,
) -> Result<(), Failure> {
    let delta = check_delta(delta)?;
    let mode = parse_mode(mode)?;
    let instance = load_instance(instance_path)?;
    let started = Instant::now();
    let index = preprocess(instance, delta, mode, seed, max_retries);
    let seconds = started.elapsed().as_secs_f64();
    fs::write(out, index.serialize()).map_err(|e| io(out, e))?;
    let stats = index.build_stats();
    println!(
        "{{\"stored_words\":{},\"retries\":{},\"L\":{},\"seconds\":{seconds}}}",
        index.space_words(),
        stats.retries,
        index.num_levels()
    );
    Ok(())
}

fn cmd_query(index_path: &Path, c: Option<&str>, queries: Option<&Path>) -> Result<(), Failure> {
    let index = load_index(index_path)?;
    match (c, queries) {
        (Some(value), None) => {
            let c = parse_element(value).map_err(usage)?;
            println!("{}", query_line(&index, c));
            Ok(())
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
            let mut bad_lines = 0usize;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                match parse_element(line) {
                    Ok(c) => println!("{}", query_line(&index, c)),
                    Err(msg) => {
                        eprintln!("line {}: {msg}", i + 1);
                        bad_lines += 1;
                    }
                }
            }
            if bad_lines > 0 {
                Err(Failure {
                    code: 3,
                    message: format!("{bad_lines} malformed query line(s)"),
                })
            } else {
                Ok(())
            }
        }
        _ => Err(usage("pass exactly one of --c or --queries")),
    }
}

fn cmd_verify(
    index_path: &Path,
    instance_path: &Path,
    mode: &str,
    seed: u64,
) -> Result<(), Failure> {
    let index = load_index(index_path)?;
    let instance = load_instance(instance_path)?;
    if index.instance() != &instance {
        return Err(usage(
            "instance/index fingerprint mismatch: the index was built from different lists",
        ));
    }
    if mode == "full" {
        let bad = index.verify_counterexamples(5);
        if bad.is_empty() {
            println!("pass (full)");
            return Ok(());
        }
        for z in &bad {
            println!("counterexample: query misses sum {z}");
        }
        return Err(verification(format!(
            "verification failed on {} sum(s)",
            bad.len()
        )));
    }
    let samples: usize = mode
        .strip_prefix("sampled:")
        .and_then(|s| s.parse().ok())
        .filter(|&s| s >= 1)
        .ok_or_else(|| usage(format!("--mode must be full or sampled:S, got `{mode}`")))?;

    let sumset = instance.enumerate_sumset();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for _ in 0..samples {
        let entry = &sumset.entries()[rng.random_range(0..sumset.len())];
        let out = index.query(entry.element);
        let ok = out
            .witness
            .as_ref()
            .is_some_and(|w| instance.sum_at(w) == entry.element);
        if !ok {
            bad.push(entry.element);
        }
    }
    let mut checked = 0usize;
    while checked < samples {
        let c = Element::sample(&mut rng);
        if sumset.contains(c) {
            continue;
        }
        if index.query(c).is_member() {
            bad.push(c);
        }
        checked += 1;
    }
    if bad.is_empty() {
        println!("pass (sampled:{samples})");
        Ok(())
    } else {
        for z in bad.iter().take(5) {
            println!("counterexample: wrong answer for {z}");
        }
        Err(verification(format!(
            "sampled verification failed on {} value(s)",
            bad.len()
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench_scaling(
    k: usize,
    delta: f64,
    mode: &str,
    grid: &str,
    seeds: &str,
    queries: usize,
    out: &Path,
) -> Result<(), Failure> {
    let delta = check_delta(delta)?;
    let mode = parse_mode(mode)?;
    let grid: Vec<usize> = parse_comma_list(grid, "grid")?;
    let seeds: Vec<u64> = parse_comma_list(seeds, "seeds")?;
    if seeds.is_empty() {
        return Err(usage("at least one seed is required"));
    }
    if !(2..=16).contains(&k) {
        return Err(usage("k must lie in [2, 16]"));
    }
    let report = run_grid(k, delta, mode, &grid, &seeds, queries, 4)
        .map_err(|e| usage(e.to_string()))?;
    fs::write(out, report.to_csv()).map_err(|e| io(out, e))?;
    println!(
        "{{\"fitted_space_slope\":{},\"fitted_steps_slope\":{},\"rows\":{}}}",
        report.fitted_space_slope,
        report.fitted_steps_slope,
        report.rows.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen { n, k, seed, out } => cmd_gen(n, k, seed, &out),
        Command::Build {
            instance,
            delta,
            mode,
            seed,
            max_retries,
            out,
        } => cmd_build(&instance, delta, &mode, seed, max_retries, &out),
        Command::Query { index, c, queries } => {
            cmd_query(&index, c.as_deref(), queries.as_deref())
        }
        Command::Verify {
            index,
            instance,
            mode,
            seed,
        } => cmd_verify(&index, &instance, &mode, seed),
        Command::BenchScaling {
            k,
            delta,
            mode,
            grid,
            seeds,
            queries,
            out,
        } => cmd_bench_scaling(k, delta, &mode, &grid, &seeds, queries, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
