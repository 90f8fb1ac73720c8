//! `d2d`: run protocol scenarios, check traces, and print the analysis
//! tables and curves.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 protocol rejection
//! (`run`), 3 failed property check (`check`).

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use d2d::analysis::{
    cost_table, emit_curves, eval_cost, eval_overhead_sode, write_curves_csv, CostProtocol, SodeTopology, SweepAxis,
    SweepSpec,
};
use d2d::netsim::{self, EventTrace, ScenarioConfig};
use d2d::properties::{run_all_checks, summary_table};
use d2d::wire::size::{floor_bytes, model_size, SizeRole, DEFAULT_KEY_SIZE_BITS};

const EXIT_REJECTED: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "d2d", version, about = "Secure D2D protocol simulator and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trace log.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override a config key, e.g. `--set seed=7`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate the security properties over a trace log.
    Check {
        #[arg(long)]
        trace: PathBuf,
        /// Also print a summary table.
        #[arg(long)]
        table: bool,
    },
    /// Emit communication overhead curves as CSV.
    Analyze(AnalyzeArgs),
    /// Print the packet size model.
    Sizes(NodeRange),
    /// Print the computation cost formulas.
    Costs {
        #[command(flatten)]
        range: NodeRange,
        /// Only this protocol.
        #[arg(long)]
        protocol: Option<String>,
    },
}

#[derive(Args)]
struct NodeRange {
    /// A single node count.
    #[arg(long, conflicts_with_all = ["from", "to"])]
    n: Option<u64>,
    #[arg(long, requires = "to")]
    from: Option<u64>,
    #[arg(long, requires = "from")]
    to: Option<u64>,
}

impl NodeRange {
    fn values(&self) -> Result<Vec<u64>> {
        let (from, to) = match (self.n, self.from, self.to) {
            (Some(n), _, _) => (n, n),
            (None, Some(a), Some(b)) => (a, b),
            _ => bail!("give --n or --from/--to"),
        };
        if from < 2 || from > to {
            bail!("need 2 <= from <= to, got {from}..{to}");
        }
        Ok((from..=to).collect())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    Nodes,
    Timeslots,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_enum)]
    sweep: Sweep,
    /// Requests per slot.
    #[arg(long, default_value_t = 1)]
    m: u64,
    /// eNodeB count.
    #[arg(long, default_value_t = 2)]
    b: u64,
    /// Fixed node count; only for timeslot sweeps.
    #[arg(long)]
    n: Option<u64>,
    /// Fixed request slots; only for node sweeps.
    #[arg(long = "t-prime")]
    t_prime: Option<u64>,
    /// Total slots.
    #[arg(long = "t")]
    t_total: Option<u64>,
    #[arg(long)]
    devices_per_enodeb: Option<u64>,
    #[arg(long)]
    from: Option<u64>,
    #[arg(long)]
    to: Option<u64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, out, overrides } => cmd_run(&config, &out, &overrides),
        Command::Check { trace, table } => cmd_check(&trace, table),
        Command::Analyze(args) => cmd_analyze(&args).map(|()| 0),
        Command::Sizes(range) => cmd_sizes(&range).map(|()| 0),
        Command::Costs { range, protocol } => cmd_costs(&range, protocol.as_deref()).map(|()| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &PathBuf, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    for o in overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("override {o:?} is not KEY=VALUE"))?;
        // later lines win
        text.push_str(&format!("\n{} = {}\n", k.trim(), v.trim()));
    }
    ScenarioConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_run(config: &PathBuf, out: &PathBuf, overrides: &[String]) -> Result<u8> {
    let cfg = load_config(config, overrides)?;
    let r = netsim::run(&cfg).context("starting simulation")?;
    fs::write(out, r.trace.to_log()).with_context(|| format!("writing {}", out.display()))?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "scenario {} n={} seed={}", cfg.scenario, cfg.n, cfg.seed)?;
    for rej in &r.rejections {
        writeln!(stdout, "reject slot={} node={} {}", rej.slot, rej.node, rej.reason.label())?;
    }
    if r.source_accepted {
        writeln!(stdout, "source accepted")?;
        Ok(0)
    } else {
        writeln!(stdout, "source did not accept")?;
        Ok(EXIT_REJECTED)
    }
}

fn cmd_check(path: &PathBuf, table: bool) -> Result<u8> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let trace = EventTrace::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let results = run_all_checks(&trace)?;
    let mut stdout = io::stdout().lock();
    for r in &results {
        writeln!(stdout, "{r}")?;
    }
    if table {
        write!(stdout, "{}", summary_table(&results))?;
    }
    Ok(if results.iter().all(|r| r.holds) { 0 } else { EXIT_CHECK_FAILED })
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let axis = match args.sweep {
        Sweep::Nodes => SweepAxis::Nodes,
        Sweep::Timeslots => SweepAxis::Timeslots,
    };
    match axis {
        SweepAxis::Nodes if args.n.is_some() => bail!("--n conflicts with --sweep nodes"),
        SweepAxis::Timeslots if args.t_prime.is_some() => bail!("--t-prime conflicts with --sweep timeslots"),
        _ => {}
    }
    let mut spec = SweepSpec::default_for(axis, args.m, args.b);
    if let Some(n) = args.n {
        spec.base.n = n;
    }
    if let Some(t) = args.t_prime {
        spec.base.t_prime = t;
    }
    if let Some(t) = args.t_total {
        spec.base.t_total = t;
    }
    if let Some(d) = args.devices_per_enodeb {
        spec.devices_per_enodeb = d;
    }
    spec.from = args.from.unwrap_or(spec.from);
    spec.to = args.to.unwrap_or(spec.to);
    let rows = emit_curves(&spec)?;

    let first = &rows[0].params;
    let sode = eval_overhead_sode(first, &SodeTopology::full_mesh(first.b, spec.devices_per_enodeb))?;
    eprintln!("# {}", sode.assumptions());
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_curves_csv(&rows, file)?;
        }
        None => write_curves_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_sizes(range: &NodeRange) -> Result<()> {
    let values = range.values()?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{:>3}  {:<22}  {:>6}  {:>5}", "n", "role", "bits", "bytes")?;
    for n in values {
        for role in SizeRole::ALL {
            let bits = model_size(role, n, DEFAULT_KEY_SIZE_BITS)?;
            writeln!(stdout, "{n:>3}  {:<22}  {bits:>6}  {:>5}", role.name(), floor_bytes(bits))?;
        }
    }
    writeln!(
        stdout,
        "note: destination_direct is listed at 286 bits; its fields (type 4, ids 16, t 4, id 4, MAC 256) add up to 284"
    )?;
    Ok(())
}

fn cmd_costs(range: &NodeRange, protocol: Option<&str>) -> Result<()> {
    let protocol = protocol.map(str::parse::<CostProtocol>).transpose()?;
    let values = range.values()?;
    let mut stdout = io::stdout().lock();
    for n in values {
        match protocol {
            Some(p) => writeln!(stdout, "{p} n={n} {}", eval_cost(p, n)?)?,
            None => write!(stdout, "{}", cost_table(n)?)?,
        }
    }
    Ok(())
}
