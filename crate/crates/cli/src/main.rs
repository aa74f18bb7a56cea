use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relaysim_core::{Architecture, ExperimentConfig};
use relaysim_runner::{
    config, emit_figure_data, read_table, run_experiment, write_csv, write_series, CliError,
    ExperimentPlan, FigureId, Result, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "relaysim",
    version,
    about = "Multi-band, multi-hop LoRaWAN network simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write one CSV row per (architecture, sweep point).
    Run {
        /// Flat key = value config file; unset keys keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Architecture to simulate (subghz, 24ghz, proposal); repeat to compare several.
        #[arg(long = "preset")]
        presets: Vec<String>,
        /// Sweep such as `N=50,100,200,500`; repeat for a cartesian product.
        #[arg(long = "sweep")]
        sweeps: Vec<String>,
        /// Override one config key, `KEY=VALUE`; repeatable.
        #[arg(long = "set")]
        overrides: Vec<String>,
        /// Runs per sweep point.
        #[arg(long)]
        runs: Option<usize>,
        /// Base seed of the run seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 1 runs serially.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract plot-ready series for one figure from a results CSV.
    Figure {
        /// fig3, fig4, fig5 or table3.
        id: String,
        /// Results CSV written by `run`.
        #[arg(long)]
        input: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Runtime(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config: path,
            presets,
            sweeps,
            overrides,
            runs,
            seed,
            workers,
            out,
        } => {
            let mut base = match &path {
                Some(p) => config::load(p)?,
                None => ExperimentConfig::default(),
            };
            config::apply_overrides(&mut base, &overrides)?;
            if let Some(runs) = runs {
                base.run_count = runs;
            }
            if let Some(seed) = seed {
                base.base_seed = seed;
            }
            let architectures = if presets.is_empty() {
                vec![base.architecture]
            } else {
                presets
                    .iter()
                    .map(|p| {
                        p.parse::<Architecture>()
                            .map_err(|e| CliError::Config(e.to_string()))
                    })
                    .collect::<Result<_>>()?
            };
            let sweeps = sweeps
                .iter()
                .map(|s| s.parse::<SweepSpec>())
                .collect::<Result<Vec<_>>>()?;
            let plan = ExperimentPlan {
                base,
                architectures,
                sweeps,
            };
            let rows = run_experiment(&plan, workers)?;
            write_csv(&rows, output(out.as_ref())?)
        }
        Command::Figure { id, input, out } => {
            let figure: FigureId = id.parse()?;
            let file = File::open(&input)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", input.display())))?;
            let rows = read_table(BufReader::new(file))?;
            let points = emit_figure_data(&rows, figure)?;
            write_series(&points, output(out.as_ref())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // usage mistakes are configuration errors; --help and --version succeed
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relaysim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invoke(args: &[&str]) -> Result<()> {
        let cli = Cli::try_parse_from(std::iter::once("relaysim").chain(args.iter().copied()))
            .expect("arguments parse");
        execute(cli)
    }

    fn scratch(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("relaysim-{}-{name}", std::process::id()))
    }

    fn small_run(out: &PathBuf, workers: &str) -> String {
        let out_s = out.to_str().unwrap();
        invoke(&[
            "run",
            "--preset",
            "subghz",
            "--preset",
            "proposal",
            "--set",
            "N=8",
            "--set",
            "sim_time=20",
            "--sweep",
            "R=1,2",
            "--runs",
            "3",
            "--seed",
            "42",
            "--workers",
            workers,
            "--out",
            out_s,
        ])
        .unwrap();
        std::fs::read_to_string(out).unwrap()
    }

    #[test]
    fn run_writes_one_row_per_point_and_is_reproducible() {
        let (a, b) = (scratch("a.csv"), scratch("b.csv"));
        let serial = small_run(&a, "1");
        let parallel = small_run(&b, "2");
        assert_eq!(serial, parallel);
        assert_eq!(serial, small_run(&a, "1"));
        let lines: Vec<&str> = serial.lines().collect();
        assert_eq!(lines[0], relaysim_runner::CSV_HEADER.join(","));
        assert_eq!(lines.len(), 1 + 3);
        assert!(lines[1].starts_with("subghz,8,0,5000,42,"));
        let _ = std::fs::remove_file(a);
        let _ = std::fs::remove_file(b);
    }

    #[test]
    fn configuration_mistakes_exit_with_one() {
        let err = invoke(&["run", "--set", "bogus=1"]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = invoke(&["run", "--set", "R=17", "--set", "N=5", "--runs", "1"]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = invoke(&["run", "--sweep", "R=5,2"]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = invoke(&["run", "--config", "/nonexistent/relaysim.cfg"]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(Cli::try_parse_from(["relaysim", "run", "--runs", "many"]).is_err());
    }

    #[test]
    fn figure_reports_missing_points() {
        let table = scratch("table.csv");
        std::fs::write(
            &table,
            format!(
                "{}\nsubghz,50,0,5000,1,1.0,0.1,2.0,0.2,0.0,0.0,0.0\n",
                relaysim_runner::CSV_HEADER.join(",")
            ),
        )
        .unwrap();
        let err = invoke(&["figure", "table3", "--input", table.to_str().unwrap()]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(
            err.to_string().contains("architecture=subghz N=500"),
            "{err}"
        );
        let _ = std::fs::remove_file(table);
    }
}
