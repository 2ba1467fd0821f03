use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaplab::harness::{run_file, Mode};

#[derive(Parser)]
#[command(name = "gaplab", version, about = "Magnetic gap-labelling laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frequency group Σ Pf(Θ_I) Z_I[μ] at one level
    Freq(Common),
    /// Cohomological containment table over levels and index sets
    Coh(Common),
    /// Chern-character integrality of an exterior-algebra element
    Chern(Common),
    /// Gap detection, labels and membership (gaps.csv)
    Spectrum(Common),
    /// Randomized exact verification suites
    Verify(Common),
    /// Hofstadter band data (butterfly.csv)
    Butterfly(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (mode, args) = match cli.command {
        Command::Freq(a) => (Mode::Freq, a),
        Command::Coh(a) => (Mode::Coh, a),
        Command::Chern(a) => (Mode::Chern, a),
        Command::Spectrum(a) => (Mode::Spectrum, a),
        Command::Verify(a) => (Mode::Verify, a),
        Command::Butterfly(a) => (Mode::Butterfly, a),
    };
    if let Some(jobs) = args.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("gaplab: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = run_file(&args.config, mode, args.seed)
        .and_then(|o| o.write(&args.out).map(|paths| (o, paths)));
    match outcome {
        Ok((o, paths)) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            if o.exit_code == 0 {
                println!("{}", o.message);
            } else {
                eprintln!("gaplab {mode}: {}", o.message);
            }
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => {
            eprintln!("gaplab {mode}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
