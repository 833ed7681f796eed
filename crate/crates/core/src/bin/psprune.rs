use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use psprune::experiment::{
    parse_algos, parse_epsilons, run_ratio_study, run_sweep_on, spec_for_game, write_ratio_csv, write_sweep_csv,
    write_verdicts_jsonl, ExperimentConfig, ScheduleChoice,
};
use psprune::{Error, Execution, NormalFormGame, Result};

/// Progressive sampling query-complexity experiments on random zero-sum games.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Strategies per player.
    #[arg(long, default_value_t = 10)]
    actions: usize,
    /// Utility range lo:hi.
    #[arg(long, default_value = "-2:2", allow_hyphen_values = true)]
    range: String,
    /// Noise amplitude; samples are u ± amplitude·ν.
    #[arg(long, default_value_t = 10.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Comma list of numbers, c/K terms, or c/K..c/L sweeps.
    #[arg(long, default_value = "c/10,c/20")]
    eps: String,
    /// Comma list of ps-we, ps-reg0, ps-reg:G, ps-reg+:G, ps-reg-m. G may be
    /// a number or a multiple of ε such as 2eps.
    #[arg(long, default_value = "ps-we,ps-reg0,ps-reg:2eps,ps-reg+:0,ps-reg+:2eps,ps-reg-m")]
    algos: String,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.1)]
    beta: f64,
    /// auto (geometric for ps-we, hybrid otherwise), geometric or hybrid.
    #[arg(long, default_value = "auto")]
    schedule: String,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the query-ratio study instead of the sweep.
    #[arg(long)]
    ratio: bool,
    /// Check every run against the true game and write a verdicts sidecar.
    #[arg(long)]
    verify: bool,
    /// Mixed profiles sampled per verified run.
    #[arg(long, default_value_t = 50)]
    mixed_profiles: usize,
    /// Sweep a game loaded from JSON instead of a generated one.
    #[arg(long)]
    game: Option<PathBuf>,
    /// Write the swept game to JSON.
    #[arg(long)]
    dump_game: Option<PathBuf>,
    /// Disable data parallelism.
    #[arg(long)]
    sequential: bool,
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("expected lo:hi, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(args: Args) -> Result<()> {
    let mut cfg = ExperimentConfig {
        actions: args.actions,
        range: parse_range(&args.range)?,
        amplitude: args.amplitude,
        delta: args.delta,
        algorithms: parse_algos(&args.algos)?,
        runs: args.runs,
        seed: args.seed,
        beta: args.beta,
        schedule: args.schedule.parse::<ScheduleChoice>()?,
        verify: args.verify,
        mixed_profiles: args.mixed_profiles,
        ..Default::default()
    };
    cfg.epsilons = parse_epsilons(&args.eps, cfg.c())?;
    cfg.validate()?;
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };

    if args.ratio {
        let rows = run_ratio_study(&cfg, exec)?;
        return write_ratio_csv(&rows, output(args.out.as_deref())?);
    }

    let spec = match &args.game {
        Some(path) => spec_for_game(NormalFormGame::from_json(&std::fs::read_to_string(path)?)?, &cfg, cfg.seed)?,
        None => cfg.make_spec(cfg.seed)?,
    };
    if let Some(path) = &args.dump_game {
        std::fs::write(path, spec.truth().to_json()?)?;
    }
    let outcomes = run_sweep_on(&cfg, &spec, exec)?;
    let rows: Vec<_> = outcomes.iter().map(|o| o.row.clone()).collect();
    write_sweep_csv(&rows, output(args.out.as_deref())?)?;
    if cfg.verify {
        let sidecar = match &args.out {
            Some(p) => {
                let mut name = p.as_os_str().to_owned();
                name.push(".verdicts.jsonl");
                PathBuf::from(name)
            }
            None => PathBuf::from("verdicts.jsonl"),
        };
        write_verdicts_jsonl(&outcomes, BufWriter::new(File::create(sidecar)?))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
