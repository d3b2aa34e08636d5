//! Command-line front end: expander construction, CSP evaluation,
//! Hadamard checks, the amplification pipeline, and the statistics
//! facts, all emitting machine-readable reports.
//!
//! Exit codes: 0 all assertions passed, 1 an assertion failed,
//! 2 usage or resource error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::{One, Zero};

use pcplab::csp::{is_nice, CspInstance};
use pcplab::dinur::{
    fixture_cnfs, parse_dimacs, run_manifest, run_pipeline, PcpProof, PipelineConfig,
    VerifierDescriptor,
};
use pcplab::error::Error;
use pcplab::exactmath::{rat_from_string, rat_to_string, Rat};
use pcplab::hadamard::{blr_pass_rate, nearest_linear, BoolFn};
use pcplab::harness::{
    binom_statdist, enumerate_or_sample, second_moment_bound, ExperimentReport, ProbEstimate,
};
use pcplab::specgraph::{find_base_expander, lambda_auto, RotationGraph};

#[derive(Parser)]
#[command(name = "pcplab", version, about = "desk-scale PCP constructions")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Global {
    /// versioned config file (pipecfg v1)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// enumeration/sampling budget
    #[arg(long, global = true, default_value_t = 1 << 20)]
    budget: u64,
    /// write outputs here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// build or check rotation-map expanders
    Expander {
        #[command(subcommand)]
        cmd: ExpanderCmd,
    },
    /// evaluate or describe CSP instances
    Csp {
        #[command(subcommand)]
        cmd: CspCmd,
    },
    /// Hadamard-code checks
    Hadamard {
        #[command(subcommand)]
        cmd: HadamardCmd,
    },
    /// gap-amplification pipeline
    Pipeline {
        #[command(subcommand)]
        cmd: PipelineCmd,
    },
    /// exact statistics facts
    Stats {
        #[command(subcommand)]
        cmd: StatsCmd,
    },
    /// end-to-end fixture suite
    Suite {
        #[command(subcommand)]
        cmd: SuiteCmd,
    },
}

#[derive(Subcommand)]
enum ExpanderCmd {
    /// search for an (n, d, lambda) expander
    Build {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// target lambda as num/den
        #[arg(long, default_value = "3/5")]
        lambda: String,
    },
    /// certify the lambda of a graph file
    Check {
        file: PathBuf,
        /// fail (exit 1) when lambda exceeds this
        #[arg(long)]
        lambda: Option<String>,
    },
}

#[derive(Subcommand)]
enum CspCmd {
    /// exact value, or a lower bound when over budget
    Val { file: PathBuf },
    /// sizes, degrees and niceness report
    Info { file: PathBuf },
}

#[derive(Subcommand)]
enum HadamardCmd {
    /// BLR pass rate and nearest codeword of a truth table
    Blr {
        /// table bits, length a power of two
        table: String,
    },
    /// check that a table is exactly linear
    Verify { table: String },
}

#[derive(Subcommand)]
enum PipelineCmd {
    /// run the pipeline on a DIMACS file and emit the manifest
    Run {
        cnf: PathBuf,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
    },
    /// measure a proof's acceptance against a descriptor file
    Verify {
        desc: PathBuf,
        /// proof as a 0/1 string, or a file containing one
        proof: String,
        /// fail (exit 1) when acceptance falls below this num/den
        #[arg(long)]
        threshold: Option<String>,
    },
}

#[derive(Subcommand)]
enum StatsCmd {
    /// exact binomial statistical distance, asserted against 20·delta
    Binom {
        #[arg(long)]
        t: usize,
        #[arg(long, allow_hyphen_values = true)]
        shift: i64,
    },
    /// second-moment bound on a comma-separated multiset of rationals
    Moment { values: String },
}

#[derive(Subcommand)]
enum SuiteCmd {
    /// run every fixture through the pipeline and assert its gap law
    Run,
}

fn load_config(g: &Global) -> Result<PipelineConfig, Error> {
    match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            PipelineConfig::from_text(&text)
        }
        None => Ok(PipelineConfig::desk_default(g.seed)),
    }
}

fn emit(g: &Global, rep: &ExperimentReport) -> Result<(), Error> {
    let body = match g.format {
        Format::Json => serde_json::to_string_pretty(&rep.to_json()).expect("serializable") + "\n",
        Format::Csv => rep.to_csv(),
    };
    match &g.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
            let ext = match g.format {
                Format::Json => "json",
                Format::Csv => "csv",
            };
            let path = dir.join(format!("report.{ext}"));
            fs::write(&path, body).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn read_file(path: &PathBuf) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn parse_table(bits: &str) -> Result<BoolFn, Error> {
    let table: Vec<bool> = bits
        .trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Parse(format!("bad table character {c:?}"))),
        })
        .collect::<Result<_, _>>()?;
    if !table.len().is_power_of_two() {
        return Err(Error::Parse(format!("table length {} is not a power of two", table.len())));
    }
    let k = table.len().trailing_zeros() as usize;
    BoolFn::new(k, table)
}

/// Ok(true): assertions passed. Ok(false): an assertion failed.
fn run(cli: Cli) -> Result<bool, Error> {
    let g = cli.global.clone();
    let started = Instant::now();
    let cfg = load_config(&g)?;
    let mut rep = ExperimentReport::new(cfg.to_text(), g.seed);
    let mut ok = true;
    match cli.cmd {
        Cmd::Expander { cmd: ExpanderCmd::Build { n, d, lambda } } => {
            let target = rat_from_string(&lambda)?;
            let graph = find_base_expander(n, d, &target, g.seed, cfg.expander_budget)?;
            let est = lambda_auto(&graph)?;
            rep.metric("n", n);
            rep.metric("d", d);
            rep.metric("lambda_upper", rat_to_string(&est.lambda_upper));
            rep.metric("certified", est.certified);
            match &g.out {
                Some(dir) => {
                    fs::create_dir_all(dir)
                        .map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
                    let path = dir.join(format!("expander-{n}-{d}.rot"));
                    fs::write(&path, graph.to_text())
                        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                    rep.metric("graph_file", path.display());
                }
                None => rep.metric("graph", graph.to_text().replace('\n', ";")),
            }
            ok = est.lambda_upper <= target;
        }
        Cmd::Expander { cmd: ExpanderCmd::Check { file, lambda } } => {
            let graph = RotationGraph::from_text(&read_file(&file)?)?;
            let est = lambda_auto(&graph)?;
            rep.metric("n", graph.n());
            rep.metric("d", graph.d());
            rep.metric("lambda_upper", rat_to_string(&est.lambda_upper));
            rep.metric("certified", est.certified);
            if let Some(t) = lambda {
                ok = est.lambda_upper <= rat_from_string(&t)?;
            }
        }
        Cmd::Csp { cmd: CspCmd::Val { file } } => {
            let phi = CspInstance::from_text(&read_file(&file)?)?;
            match phi.val_exact(g.budget) {
                Ok(v) => rep.probability("val", ProbEstimate::Exact(v)),
                Err(Error::Resource(_)) => {
                    let lower = phi.val_lower(g.seed, 32, &[])?;
                    rep.metric("val_lower", rat_to_string(&lower));
                    rep.metric("method", "val_lower");
                }
                Err(e) => return Err(e),
            }
        }
        Cmd::Csp { cmd: CspCmd::Info { file } } => {
            let phi = CspInstance::from_text(&read_file(&file)?)?;
            rep.metric("n", phi.n);
            rep.metric("m", phi.m());
            rep.metric("q", phi.q);
            rep.metric("w", phi.w);
            let nice = is_nice(&phi);
            rep.metric("nice", nice.is_nice);
            for f in &nice.failures {
                rep.metric("nice_failure", f);
            }
            if let Some(l) = nice.lambda {
                rep.metric("lambda_upper", rat_to_string(&l.lambda_upper));
            }
        }
        Cmd::Hadamard { cmd: HadamardCmd::Blr { table } } => {
            let f = parse_table(&table)?;
            let rate = blr_pass_rate(&f);
            let (mask, agree) = nearest_linear(&f);
            rep.probability("blr_pass", ProbEstimate::Exact(rate));
            rep.metric("nearest_mask", mask);
            rep.metric("agreement", rat_to_string(&agree));
        }
        Cmd::Hadamard { cmd: HadamardCmd::Verify { table } } => {
            let f = parse_table(&table)?;
            let rate = blr_pass_rate(&f);
            let (mask, agree) = nearest_linear(&f);
            rep.probability("blr_pass", ProbEstimate::Exact(rate.clone()));
            rep.metric("nearest_mask", mask);
            ok = rate.is_one() && agree.is_one();
        }
        Cmd::Pipeline { cmd: PipelineCmd::Run { cnf, rounds } } => {
            let formula = parse_dimacs(&read_file(&cnf)?)?;
            let run = run_pipeline(&formula, rounds, &cfg)?;
            let manifest = run_manifest(&run, &cfg);
            let body = serde_json::to_string_pretty(&manifest).expect("serializable");
            match &g.out {
                Some(dir) => {
                    fs::create_dir_all(dir)
                        .map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
                    let path = dir.join("manifest.json");
                    fs::write(&path, body + "\n")
                        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                    let dpath = dir.join("descriptor.pcpdesc");
                    fs::write(&dpath, run.descriptor.to_text())
                        .map_err(|e| Error::Parse(format!("{}: {e}", dpath.display())))?;
                    eprintln!("wrote {} and {}", path.display(), dpath.display());
                }
                None => println!("{body}"),
            }
            return Ok(true);
        }
        Cmd::Pipeline { cmd: PipelineCmd::Verify { desc, proof, threshold } } => {
            let descriptor = VerifierDescriptor::from_text(&read_file(&desc)?)?;
            let bit_text = if proof.chars().all(|c| c == '0' || c == '1') {
                proof
            } else {
                read_file(&PathBuf::from(proof))?
            };
            let bits: Vec<bool> = bit_text.trim().chars().map(|c| c == '1').collect();
            let p = PcpProof { bits };
            let space = descriptor.randomness()?;
            let est = enumerate_or_sample(
                space,
                |w| descriptor.verify(&p, w).unwrap_or(false),
                g.budget,
                g.seed,
            )?;
            rep.metric("randomness_space", space);
            rep.probability("acceptance", est.clone());
            if let Some(t) = threshold {
                let t = rat_from_string(&t)?;
                ok = match est {
                    ProbEstimate::Exact(v) => v >= t,
                    ProbEstimate::Sampled { lo, .. } => {
                        lo >= t.numer().to_string().parse::<f64>().unwrap()
                            / t.denom().to_string().parse::<f64>().unwrap()
                    }
                };
            }
        }
        Cmd::Stats { cmd: StatsCmd::Binom { t, shift } } => {
            let d = binom_statdist(t, shift)?;
            rep.metric("t", t);
            rep.metric("shift", shift);
            rep.metric("statdist", rat_to_string(&d));
            // the paper-style bound with delta = |shift|/sqrt(t)
            let bound_sq = Rat::new((400 * shift * shift).into(), (t as i64).into());
            rep.metric("bound_sq_20delta", rat_to_string(&bound_sq));
            ok = shift == 0 || d.clone() * d <= bound_sq;
        }
        Cmd::Stats { cmd: StatsCmd::Moment { values } } => {
            let vals: Vec<Rat> = values
                .split(',')
                .map(|s| rat_from_string(s.trim()))
                .collect::<Result<_, _>>()?;
            let (lhs, rhs) = second_moment_bound(&vals)?;
            rep.metric("pr_positive", rat_to_string(&lhs));
            rep.metric("moment_ratio", rat_to_string(&rhs));
            ok = lhs >= rhs;
        }
        Cmd::Suite { cmd: SuiteCmd::Run } => {
            for (name, cnf) in fixture_cnfs() {
                let run = run_pipeline(&cnf, 1, &cfg)?;
                let gap = run.gap0.gap.clone();
                rep.metric(
                    &format!("{name}.gap"),
                    gap.as_ref().map(rat_to_string).unwrap_or_else(|| "-".into()),
                );
                rep.metric(&format!("{name}.k_rep"), run.descriptor.k_rep);
                rep.metric(&format!("{name}.stopped"), &run.stopped);
                match gap {
                    Some(gap) if gap.is_zero() => {}
                    Some(gap) => {
                        if gap < cfg.epsilon0 {
                            ok = false;
                        }
                    }
                    None => ok = false,
                }
            }
        }
    }
    rep.wall_ms = started.elapsed().as_millis();
    rep.metric("ok", ok);
    emit(&g, &rep)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
