//! Command-line front end: allocate scenario files, compare allocators,
//! run seeded experiment batches, inspect cycle structure, and walk through
//! the two-phase scenario where the halting filler strands capacity.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 I/O failure.

use std::io::Read;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fairalloc::drf::{self, DrfOptions};
use fairalloc::harness::{self, ExperimentConfig};
use fairalloc::{cycles, edrf, pdrf};
use fairalloc::{scenario_from_json, Error, Scenario, UserDemand};

#[derive(Parser)]
#[command(name = "fairalloc", version, about = "Multi-resource fair allocation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one allocator over a scenario file
    Allocate(AllocateArgs),
    /// Per-user task deltas between a reference and a candidate allocator
    Compare(CompareArgs),
    /// Seeded batch experiment; writes deviation statistics
    Bench(BenchArgs),
    /// Cycle structure of a scenario
    Cycles(CyclesArgs),
    /// Two-user walkthrough of the halting filler stranding capacity
    ParetoDemo,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Drf,
    Edrf,
    Pdrf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Reference {
    Drf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Candidate {
    Pdrf,
}

#[derive(Args)]
struct AllocateArgs {
    /// Scenario JSON file, or - for stdin
    scenario: String,
    #[arg(long, value_enum, default_value_t = Algo::Drf)]
    algo: Algo,
    /// Halt progressive filling at the first blocked grant instead of
    /// removing the saturated user
    #[arg(long)]
    drf_no_removal: bool,
    /// Apply the single top-up sweep after precomputation
    #[arg(long)]
    finishing_pass: bool,
    /// Write the grant-by-grant trace to this file (drf only)
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Write the JSON result here instead of stdout
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Scenario JSON file, or - for stdin
    scenario: String,
    #[arg(long, value_enum, default_value_t = Reference::Drf)]
    reference: Reference,
    #[arg(long, value_enum, default_value_t = Candidate::Pdrf)]
    candidate: Candidate,
    /// Reference filler halts at the first blocked grant
    #[arg(long)]
    drf_no_removal: bool,
    /// Candidate applies the top-up sweep
    #[arg(long)]
    finishing_pass: bool,
    /// Write the JSON result here instead of stdout
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Users per trial
    #[arg(long, default_value_t = 1000)]
    users: usize,
    /// Resource types per trial
    #[arg(long, default_value_t = 10)]
    resources: usize,
    /// Inclusive per-entry demand range
    #[arg(long, default_value = "1:10", value_name = "LO:HI")]
    demands: String,
    /// Inclusive per-resource capacity range
    #[arg(long, default_value = "50000:100000", value_name = "LO:HI")]
    reserves: String,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Reference filler halts at the first blocked grant
    #[arg(long)]
    drf_no_removal: bool,
    /// Candidate applies the top-up sweep
    #[arg(long)]
    finishing_pass: bool,
    /// Directory receiving stats.csv and stats.json
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct CyclesArgs {
    /// Scenario JSON file, or - for stdin
    scenario: String,
    /// Also peel the scenario into nested cycle layers
    #[arg(long)]
    decompose: bool,
    /// Emit JSON instead of text
    #[arg(long)]
    json: bool,
}

enum Failure {
    Usage(String),
    Invalid(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Invalid(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Allocate(args) => allocate(args),
        Command::Compare(args) => compare(args),
        Command::Bench(args) => bench(args),
        Command::Cycles(args) => cycles_cmd(args),
        Command::ParetoDemo => pareto_demo(),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn read_scenario(path: &str) -> Result<Scenario, Failure> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Failure::Io(format!("stdin: {e}")))?;
        buf
    } else {
        std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{path}: {e}")))?
    };
    Ok(scenario_from_json(&text)?)
}

fn emit(output: &Option<PathBuf>, value: &serde_json::Value) -> Result<(), Failure> {
    let text = format!("{:#}\n", value);
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn allocate(args: AllocateArgs) -> Result<(), Failure> {
    if args.trace.is_some() && args.algo != Algo::Drf {
        return Err(Failure::Usage("--trace requires --algo drf".into()));
    }
    if args.drf_no_removal && args.algo != Algo::Drf {
        return Err(Failure::Usage("--drf-no-removal requires --algo drf".into()));
    }
    if args.finishing_pass && args.algo != Algo::Pdrf {
        return Err(Failure::Usage("--finishing-pass requires --algo pdrf".into()));
    }

    let scenario = read_scenario(&args.scenario)?;
    let doc = match args.algo {
        Algo::Drf => {
            let mut options = if args.drf_no_removal {
                DrfOptions::strict()
            } else {
                DrfOptions::default()
            };
            if args.trace.is_some() {
                options = options.with_trace();
            }
            let (allocation, trace) = drf::allocate(&scenario, &options)?;
            if let Some(path) = &args.trace {
                std::fs::write(path, trace.to_text())
                    .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            }
            json!({
                "schema_version": 1,
                "algorithm": "drf",
                "remove_saturated": options.remove_saturated,
                "strict_halt": options.strict_halt,
                "halt_reason": trace.halt_reason,
                "allocation": allocation,
            })
        }
        Algo::Edrf => {
            let allocation = edrf::allocate(&scenario)?;
            json!({
                "schema_version": 1,
                "algorithm": "edrf",
                "allocation": allocation,
            })
        }
        Algo::Pdrf => {
            let result = pdrf::allocate(&scenario)?;
            let allocation = if args.finishing_pass {
                pdrf::finishing_pass(&scenario, &result)?
            } else {
                result.allocation.clone()
            };
            json!({
                "schema_version": 1,
                "algorithm": "pdrf",
                "cycle_factor": result.cycle_factor,
                "multipliers": result.multipliers,
                "finishing_pass": args.finishing_pass,
                "allocation": allocation,
            })
        }
    };
    emit(&args.output, &doc)
}

fn compare(args: CompareArgs) -> Result<(), Failure> {
    let scenario = read_scenario(&args.scenario)?;
    let options = if args.drf_no_removal {
        DrfOptions::strict()
    } else {
        DrfOptions::default()
    };
    let (reference, _) = drf::allocate(&scenario, &options)?;
    let result = pdrf::allocate(&scenario)?;
    let candidate = if args.finishing_pass {
        pdrf::finishing_pass(&scenario, &result)?
    } else {
        result.allocation
    };
    let deltas = harness::compare(&reference, &candidate)?;
    let summary = harness::bucket_deltas(&deltas);
    let doc = json!({
        "schema_version": 1,
        "reference": { "algorithm": "drf", "remove_saturated": options.remove_saturated },
        "candidate": { "algorithm": "pdrf", "finishing_pass": args.finishing_pass },
        "deltas": deltas,
        "summary": summary,
    });
    emit(&args.output, &doc)
}

fn parse_range(flag: &str, text: &str) -> Result<(u64, u64), Failure> {
    let parsed = text
        .split_once(':')
        .and_then(|(lo, hi)| Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?)));
    parsed.ok_or_else(|| Failure::Usage(format!("--{flag} expects LO:HI, got {text:?}")))
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let config = ExperimentConfig {
        n_users: args.users,
        n_resources: args.resources,
        demand_range: parse_range("demands", &args.demands)?,
        reserve_range: parse_range("reserves", &args.reserves)?,
        trials: args.trials,
        seed: args.seed,
        drf_options: if args.drf_no_removal {
            DrfOptions::strict()
        } else {
            DrfOptions::default()
        },
        finishing_pass: args.finishing_pass,
    };
    let stats = harness::run_experiment(&config)?;
    harness::export_stats(&stats, &args.out)?;
    print!("{}", harness::csv_table(&stats));
    eprintln!(
        "wrote {} and {}",
        args.out.join("stats.csv").display(),
        args.out.join("stats.json").display()
    );
    Ok(())
}

fn cycles_cmd(args: CyclesArgs) -> Result<(), Failure> {
    let scenario = read_scenario(&args.scenario)?;
    let profile = cycles::cycle_profile(&scenario)?;
    let decomposition = if args.decompose {
        Some(cycles::decompose_higher_order(&scenario)?)
    } else {
        None
    };

    if args.json {
        let doc = json!({
            "schema_version": 1,
            "profile": profile,
            "decomposition": decomposition,
        });
        return emit(&None, &doc);
    }

    println!("lcm share: {}", profile.lcm_share);
    println!("full cycle: {} grants", profile.full_length);
    println!("basic subcycle: {} grants", profile.basic_length);
    for (user, count) in &profile.occurrences {
        println!(
            "  {user}: {count} per full cycle, {} per basic subcycle",
            profile.basic_occurrences[user]
        );
    }
    if let Some(d) = decomposition {
        for (i, layer) in d.layers.iter().enumerate() {
            let active: Vec<&str> = layer.active.iter().map(|u| u.as_str()).collect();
            println!(
                "layer {i}: active {:?}, factor {}, iterations {}",
                active, layer.cycle_factor, layer.iterations
            );
            for (user, count) in &layer.counts {
                println!("  {user}: {count} grants per iteration");
            }
            println!("  consumed {:?}", layer.consumed.as_slice());
        }
        println!("residual: {:?}", d.residual.as_slice());
    }
    Ok(())
}

fn pareto_demo() -> Result<(), Failure> {
    let scenario = Scenario::new(
        vec![59, 19],
        vec![
            UserDemand::new("A", vec![1, 4]),
            UserDemand::new("B", vec![3, 1]),
        ],
    );
    let a = &scenario.users[0];
    let b = &scenario.users[1];
    println!(
        "capacities {:?}; A demands {:?}; B demands {:?}",
        scenario.resources.as_slice(),
        a.demand.as_slice(),
        b.demand.as_slice()
    );

    let (halted, trace) = drf::allocate(&scenario, &DrfOptions::strict().with_trace())?;
    println!(
        "halting mode: stopped after {} grants ({})",
        trace.steps.len(),
        trace.halt_reason
    );
    for user in &scenario.users {
        println!(
            "  {}: {} tasks, amounts {:?}",
            user.id,
            halted.tasks[&user.id],
            halted.per_user_amounts[&user.id].as_slice()
        );
    }
    // How many more B tasks the stranded residual would still admit.
    let extra = halted
        .residual
        .iter()
        .zip(b.demand.iter())
        .map(|(&r, &d)| r / d)
        .min()
        .unwrap_or(0);
    println!(
        "  residual {:?} is stranded: A's next task does not fit, but {} more B tasks would",
        halted.residual.as_slice(),
        extra
    );

    let (finished, trace) = drf::allocate(&scenario, &DrfOptions::default().with_trace())?;
    println!(
        "removal mode: {} grants ({})",
        trace.steps.len(),
        trace.halt_reason
    );
    for user in &scenario.users {
        println!(
            "  {}: {} tasks, amounts {:?}",
            user.id,
            finished.tasks[&user.id],
            finished.per_user_amounts[&user.id].as_slice()
        );
    }
    let drained: Vec<String> = finished
        .residual
        .iter()
        .enumerate()
        .filter(|(_, &r)| r == 0)
        .map(|(i, _)| i.to_string())
        .collect();
    println!(
        "  residual {:?}: resource {} fully drained",
        finished.residual.as_slice(),
        drained.join(", ")
    );
    Ok(())
}
