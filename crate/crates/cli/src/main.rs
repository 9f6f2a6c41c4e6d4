use clap::Parser;
use gausstest_cli::cli::{self, Cli, Command};
use gausstest_cli::CliError;

fn main() {
    let args = Cli::parse();
    if args.workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers)
            .build_global();
    }
    match dispatch(&args) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(args: &Cli) -> Result<(), CliError> {
    match &args.command {
        Command::Run(run_args) => {
            let report = cli::run_command(run_args)?;
            let json = report.to_json();
            match &run_args.out {
                Some(path) => std::fs::write(path, json)?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Bench(bench_args) => {
            let result = cli::bench_command(bench_args)?;
            println!(
                "example {} n={} p={} m={} signal={} test={} multiplier={} N={} alpha={} reps={}: rejection {}% (se {:.1}pp) in {:.1}s",
                result.example_id,
                result.n,
                result.p,
                result.m,
                result.signal,
                result.test,
                result.multiplier,
                result.n_draws,
                result.alpha,
                result.replications,
                result.rate_pct(),
                100.0 * result.std_error,
                result.wall_time_s,
            );
            Ok(())
        }
        Command::Bh(bh_args) => {
            let table = cli::bh_command(bh_args)?;
            let csv = table.to_csv();
            match &bh_args.out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            eprintln!(
                "rejected {} of {} hypotheses at FDR {}",
                table.rejected(),
                table.rows.len(),
                table.q
            );
            Ok(())
        }
    }
}
