use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use cardiocausal::pipeline::{run_pipeline, write_outputs, InputKind, MaskMode, MediationPath, Method, RunConfig};
use cardiocausal::record_io::{save_parameter_table, write_signal_csv};
use cardiocausal::search::SearchConfig;
use cardiocausal::{synth, Error, Position};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_COHORT: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "cardiocausal", version, about = "Cardiorespiratory causal structure analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Signals,
    Params,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mask {
    Exclude,
    PostHoc,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis and write the report files.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        input_kind: Kind,
        #[arg(long, value_delimiter = ',', default_value = "supine,standing")]
        positions: Vec<Position>,
        #[arg(long, value_delimiter = ',', default_value = "gc,hc,tabu,fges,cam")]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "exclude")]
        mask_derived: Mask,
        /// Candidate path `x,m,y`, optionally suffixed `@position`.
        #[arg(long, num_args = 1..)]
        mediation: Vec<MediationPath>,
        #[arg(long, default_value_t = 4)]
        max_parents: usize,
        #[arg(long, default_value_t = 0)]
        random_restarts: usize,
    },
    /// Write a parameter table sampled from the bundled cohort model.
    SynthCohort {
        #[arg(long, default_value_t = 100)]
        subjects: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic ECG/IP recordings, one CSV per subject and position.
    SynthSignals {
        #[arg(long, default_value_t = 20)]
        subjects: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300.0)]
        duration_s: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command) -> cardiocausal::Result<()> {
    match command {
        Command::Analyze {
            input,
            input_kind,
            positions,
            methods,
            seed,
            out,
            mask_derived,
            mediation,
            max_parents,
            random_restarts,
        } => {
            let config = RunConfig {
                input,
                input_kind: match input_kind {
                    Kind::Signals => InputKind::Signals,
                    Kind::Params => InputKind::Params,
                },
                positions,
                methods,
                mask: match mask_derived {
                    Mask::Exclude => MaskMode::Exclude,
                    Mask::PostHoc => MaskMode::PostHoc,
                },
                mediation,
                search: SearchConfig {
                    max_parents,
                    random_restarts,
                    seed,
                    ..SearchConfig::default()
                },
            };
            let output = run_pipeline(&config)?;
            for w in &output.report.warnings {
                log::warn!("{w}");
            }
            write_outputs(&output, &out)?;
            log::info!("wrote report to {}", out.display());
            Ok(())
        }
        Command::SynthCohort { subjects, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            save_parameter_table(&synth::cohort(subjects, &mut rng)?, out)
        }
        Command::SynthSignals {
            subjects,
            seed,
            duration_s,
            out,
        } => {
            fs::create_dir_all(&out).map_err(|source| Error::Io {
                path: out.clone(),
                source,
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let table = synth::cohort(subjects, &mut rng)?;
            for row in table.rows() {
                let rec = synth::signal_record(&row.subject_id, row.position, &row.params, duration_s, &mut rng)?;
                let path = out.join(format!("{}_{}.csv", row.subject_id, row.position));
                let file = fs::File::create(&path).map_err(|source| Error::Io { path, source })?;
                write_signal_csv(&rec, std::io::BufWriter::new(file))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(EXIT_COHORT),
            }
        }
    }
}
