use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kissgev::beamform::Postfilter;
use kissgev::cli::{self, EnhanceJob};
use kissgev::config::{RunConfig, CONFIG_ENV};
use kissgev::metrics::{Method, Metric};
use kissgev::synth::CorpusPlan;
use kissgev::WavEncoding;

#[derive(Parser)]
#[command(name = "kissgev", version, about = "DoA-informed, training-free GEV beamforming")]
struct Cli {
    /// JSON run configuration
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Worker threads for batch commands (0 = all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Array geometry JSON (defaults to the built-in 8-mic circular array)
    #[arg(long, global = true)]
    geometry: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DoaArgs {
    /// Target azimuth in degrees
    #[arg(long, allow_hyphen_values = true)]
    azimuth: Option<f64>,
    /// Target elevation in degrees
    #[arg(long, allow_hyphen_values = true)]
    elevation: Option<f64>,
    /// Target direction as x,y,z
    #[arg(long, allow_hyphen_values = true)]
    doa: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PostfilterArg {
    Ban,
    Projection,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Pcm16,
    Float32,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic source corpus
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        clips: usize,
        #[arg(long, default_value_t = 3.0)]
        seconds: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate reverberant mixtures from a corpus
    Simulate {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Allow room parameters outside the supported ranges
        #[arg(long)]
        unchecked: bool,
    },
    /// Enhance a multichannel recording
    Enhance {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "kissgev")]
        method: String,
        #[command(flatten)]
        doa: DoaArgs,
        /// Clean target image (oracle method)
        #[arg(long)]
        target_ref: Option<PathBuf>,
        /// Clean interference image (oracle method)
        #[arg(long)]
        interference_ref: Option<PathBuf>,
        #[arg(long, value_enum)]
        postfilter: Option<PostfilterArg>,
        #[arg(long, value_enum, default_value = "float32")]
        encoding: EncodingArg,
    },
    /// Write the target and noise masks as CSV and PGM
    MaskDump {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        doa: DoaArgs,
    },
    /// Score methods over a simulated batch
    Evaluate {
        manifest: PathBuf,
        /// Comma-separated: unprocessed,ds,kissgev,oracle_gev
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the FIR-projected SDR with this many taps instead of SI-SDR
        #[arg(long)]
        filtered_sdr_taps: Option<usize>,
        #[arg(long, value_enum)]
        postfilter: Option<PostfilterArg>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn set_postfilter(config: &mut RunConfig, p: Option<PostfilterArg>) {
    if let Some(p) = p {
        config.beamform.postfilter = match p {
            PostfilterArg::Ban => Postfilter::Ban,
            PostfilterArg::Projection => Postfilter::Projection,
        };
    }
}

fn doa_of(args: &DoaArgs) -> kissgev::Result<kissgev::Doa> {
    cli::resolve_doa(args.azimuth, args.elevation, args.doa.as_deref())
}

fn run(cli: Cli) -> kissgev::Result<ExitCode> {
    let mut config = RunConfig::resolve(cli.config.as_deref())?;
    if let Some(j) = cli.jobs {
        config.jobs = j;
    }
    if cli.geometry.is_some() {
        config.geometry = cli.geometry;
    }
    match cli.command {
        Command::Corpus { out, clips, seconds, seed } => {
            let plan = CorpusPlan {
                clips_per_kind: clips,
                seconds,
                ..CorpusPlan::default()
            };
            cli::cmd_corpus(&out, &plan, seed)?;
        }
        Command::Simulate { corpus, out, count, seed, unchecked } => {
            config.corpus = corpus.or(config.corpus);
            config.output = out.or(config.output);
            config.count = count.unwrap_or(config.count);
            config.seed = seed.unwrap_or(config.seed);
            let manifest = cli::cmd_simulate(&config, unchecked)?;
            println!("simulated {} scenarios", manifest.scenarios.len());
        }
        Command::Enhance {
            input,
            output,
            method,
            doa,
            target_ref,
            interference_ref,
            postfilter,
            encoding,
        } => {
            set_postfilter(&mut config, postfilter);
            let job = EnhanceJob {
                input,
                output,
                method: method.parse()?,
                doa: doa_of(&doa)?,
                references: target_ref.zip(interference_ref),
                encoding: match encoding {
                    EncodingArg::Pcm16 => WavEncoding::Pcm16,
                    EncodingArg::Float32 => WavEncoding::Float32,
                },
            };
            cli::cmd_enhance(&job, &config)?;
        }
        Command::MaskDump { input, out, doa } => {
            let masks = cli::cmd_mask_dump(&input, &doa_of(&doa)?, &out, &config)?;
            println!(
                "{} frames x {} bins, masks written to {}",
                masks.target.num_frames(),
                masks.target.num_bins(),
                out.display()
            );
        }
        Command::Evaluate {
            manifest,
            methods,
            out,
            filtered_sdr_taps,
            postfilter,
        } => {
            set_postfilter(&mut config, postfilter);
            let methods: Vec<Method> = match methods {
                Some(list) => list.iter().map(|m| m.parse()).collect::<Result<_, _>>()?,
                None => config.methods.clone(),
            };
            if let Some(taps) = filtered_sdr_taps {
                config.metric = Metric::FilteredSdr { taps };
            }
            config.output = out.or(config.output);
            let report = cli::cmd_evaluate(&manifest, &methods, &config)?;
            print!("{}", report.summary_table());
            for (id, err) in &report.failures {
                eprintln!("{id}: {err}");
            }
            if !report.failures.is_empty() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
