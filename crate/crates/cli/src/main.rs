use std::process::ExitCode;

use avsup_cli::{execute, exit_code, parse_args, Outcome, UsageError};

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn report(outcome: &Outcome) {
    match outcome {
        Outcome::Run { log, files } => {
            let s = &log.summary;
            println!(
                "period {:.2} s | end t = {:.2} s | min speed {:.2} m/s | final speed {:.2} m/s | collisions {}",
                log.decision_period,
                s.end_time,
                s.min_speed,
                s.final_speed,
                log.collisions.len()
            );
            for c in &log.collisions {
                println!(
                    "  collision with {} at t = {:.2} s (X = {:.2}, Y = {:.2})",
                    c.pedestrian, c.time, c.x, c.y
                );
            }
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Outcome::Sweep { outcomes, file } => {
            println!(
                "{:>8}  {:>8}  {:>9}  {:>9}",
                "period", "collided", "min speed", "min dist"
            );
            for o in outcomes {
                match &o.result {
                    Ok(s) => println!(
                        "{:>8.2}  {:>8}  {:>9.2}  {:>9.2}",
                        o.decision_period, s.collided, s.min_speed, s.min_distance
                    ),
                    Err(e) => println!("{:>8.2}  error: {e}", o.decision_period),
                }
            }
            println!("wrote {}", file.display());
        }
    }
}

fn main() -> ExitCode {
    let opts = match parse_args(std::env::args_os()) {
        Ok(o) => o,
        Err(UsageError::Clap(e)) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit_code::USAGE as u8 } else { 0 });
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code::USAGE as u8);
        }
    };
    init_logging(opts.verbosity);

    match execute(&opts) {
        Ok(outcome) => {
            report(&outcome);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
