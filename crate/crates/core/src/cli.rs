//! Batch commands behind the `kissgev` binary: corpus generation,
//! simulation, enhancement, mask dumps and evaluation.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::Doa;
use crate::beamform;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::maskgen::{self, KissMasks};
use crate::metrics::{self, EvalOptions, Method, ScoreReport};
use crate::oracle;
use crate::roomsim::{self, Corpus, Mixture, ScenarioRanges, ScenarioSpec};
use crate::synth::{self, CorpusPlan};
use crate::wavio::{self, AudioClip, WavEncoding};

pub const MANIFEST_NAME: &str = "manifest.json";

/// 2 for usage and validation problems (bad flags, config, missing or
/// malformed inputs), 1 for failures during processing.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
        Error::Io { .. } | Error::Numeric(_) | Error::Solver { .. } => 1,
        _ => 2,
    }
}

/// Parses `x,y,z` into a unit direction.
pub fn parse_doa_vector(text: &str) -> Result<Doa> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Input(format!("DoA `{text}` must have three comma-separated components")));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p
            .parse()
            .map_err(|_| Error::Input(format!("DoA component `{p}` is not a number")))?;
    }
    Doa::from_vector(v)
}

/// Either a vector or azimuth (with optional elevation, default 0) in
/// degrees, but not both.
pub fn resolve_doa(azimuth: Option<f64>, elevation: Option<f64>, vector: Option<&str>) -> Result<Doa> {
    match (azimuth, vector) {
        (Some(_), Some(_)) => Err(Error::Input("give either --doa or --azimuth/--elevation, not both".into())),
        (None, Some(v)) => {
            if elevation.is_some() {
                return Err(Error::Input("--elevation needs --azimuth".into()));
            }
            parse_doa_vector(v)
        }
        (Some(az), None) => Doa::from_degrees(az, elevation.unwrap_or(0.0)),
        (None, None) => Err(Error::Input("a target direction is required (--doa or --azimuth)".into())),
    }
}

/// Runs `f` on a rayon pool with `jobs` threads (0 = default pool).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Input(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

fn required<'a>(value: &'a Option<PathBuf>, field: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::config(field, "is required for this command"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the synthetic stand-in corpus (`target/`, `ambient/`, `music/`,
/// `speech/`).
pub fn cmd_corpus(root: &Path, plan: &CorpusPlan, seed: u64) -> Result<()> {
    synth::write_corpus(root, plan, seed)
}

/// RMS levels of the reference-channel images, dB re full scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub target_db: f64,
    pub interference_db: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scenario: ScenarioSpec,
    /// Paths relative to the manifest directory.
    pub mixture: PathBuf,
    pub target_image: PathBuf,
    pub interference_image: PathBuf,
    pub levels: Levels,
}

/// Everything `evaluate` needs to score a simulated batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub corpus: PathBuf,
    pub ranges: ScenarioRanges,
    pub reference_channel: usize,
    pub scenarios: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })
    }
}

fn rms_db(clip: &AudioClip, channel: usize) -> f64 {
    let ch = clip.channel(channel);
    let ms = ch.iter().map(|v| v * v).sum::<f64>() / ch.len().max(1) as f64;
    if ms > 0.0 {
        10.0 * ms.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Draws `config.count` scenarios from the corpus, simulates them and writes
/// `<id>/mixture.wav`, `<id>/target.wav`, `<id>/interference.wav` and
/// `manifest.json` under `config.output`. Ranges outside the reference ones
/// are refused unless `unchecked`.
pub fn cmd_simulate(config: &RunConfig, unchecked: bool) -> Result<Manifest> {
    config.validate(unchecked)?;
    let corpus_root = required(&config.corpus, "corpus")?;
    let out = required(&config.output, "output")?;
    let geometry = config.load_geometry()?;
    let reference = config.beamform.reference_channel;
    if reference >= geometry.num_mics() {
        return Err(Error::config("beamform.reference_channel", format!("{reference} out of range")));
    }
    let corpus = Corpus::load(corpus_root)?;
    let scenarios = roomsim::sample_scenarios(&corpus, &geometry, &config.ranges, config.count, config.seed)?;
    create_dir(out)?;
    let entries: Vec<Result<ManifestEntry>> = with_jobs(config.jobs, || {
        scenarios
            .par_iter()
            .map(|s| {
                let mix = roomsim::synthesize_mixture(s)?;
                let rel = PathBuf::from(&s.spec.id);
                create_dir(&out.join(&rel))?;
                let files = [
                    (rel.join("mixture.wav"), &mix.mixture),
                    (rel.join("target.wav"), &mix.target_image),
                    (rel.join("interference.wav"), &mix.interference_image),
                ];
                for (path, clip) in &files {
                    wavio::write_wav(clip, out.join(path), WavEncoding::Float32)?;
                }
                let target_db = rms_db(&mix.target_image, reference);
                let interference_db = rms_db(&mix.interference_image, reference);
                let [(mixture, _), (target_image, _), (interference_image, _)] = files;
                Ok(ManifestEntry {
                    scenario: s.spec.clone(),
                    mixture,
                    target_image,
                    interference_image,
                    levels: Levels {
                        target_db,
                        interference_db,
                        snr_db: target_db - interference_db,
                    },
                })
            })
            .collect()
    })?;
    let manifest = Manifest {
        seed: config.seed,
        corpus: corpus_root.to_owned(),
        ranges: config.ranges.clone(),
        reference_channel: reference,
        scenarios: entries.into_iter().collect::<Result<_>>()?,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&out.join(MANIFEST_NAME), json + "\n")?;
    log::info!("wrote {} scenarios to {}", manifest.scenarios.len(), out.display());
    Ok(manifest)
}

/// One enhancement job.
#[derive(Debug, Clone)]
pub struct EnhanceJob {
    pub input: PathBuf,
    pub output: PathBuf,
    pub method: Method,
    pub doa: Doa,
    /// Clean target and interference images, required by the oracle method.
    pub references: Option<(PathBuf, PathBuf)>,
    pub encoding: WavEncoding,
}

/// Enhances one multichannel recording and writes a mono WAV at the input
/// rate.
pub fn cmd_enhance(job: &EnhanceJob, config: &RunConfig) -> Result<AudioClip> {
    config.validate(true)?;
    let geometry = config.load_geometry()?;
    let params = config.enhance_params();
    let clip = wavio::read_wav(&job.input)?;
    let out = match job.method {
        Method::Unprocessed => {
            beamform::prepare(&clip, &geometry, &job.doa, &params)?;
            clip.channel_clip(params.reference_channel)
        }
        Method::Ds => beamform::ds_enhance(&clip, &geometry, &job.doa, &params)?,
        Method::Kissgev => beamform::kissgev_enhance(&clip, &geometry, &job.doa, &params)?,
        Method::OracleGev => {
            let (t, i) = job
                .references
                .as_ref()
                .ok_or_else(|| Error::Input("the oracle method needs --target-ref and --interference-ref".into()))?;
            let target = wavio::read_wav(t)?;
            let interference = wavio::read_wav(i)?;
            oracle::oracle_gev_enhance(&clip, &target, &interference, &geometry, &job.doa, &params, &config.irm)?
        }
    };
    wavio::write_wav(&out, &job.output, job.encoding)?;
    Ok(out)
}

/// Computes the KISS-GEV masks for a recording and writes
/// `target_mask.{csv,pgm}` and `noise_mask.{csv,pgm}` into `out_dir`.
/// CSV rows are frames and columns are bins; in the PGM black means 1.
pub fn cmd_mask_dump(input: &Path, doa: &Doa, out_dir: &Path, config: &RunConfig) -> Result<KissMasks> {
    config.validate(true)?;
    let geometry = config.load_geometry()?;
    let params = config.enhance_params();
    let clip = wavio::read_wav(input)?;
    let (spec, steering) = beamform::prepare(&clip, &geometry, doa, &params)?;
    let masks = maskgen::kiss_masks(&spec, &steering, params.gamma, params.alpha)?;
    create_dir(out_dir)?;
    for (name, mask) in [("target_mask", &masks.target), ("noise_mask", &masks.noise)] {
        write_file(&out_dir.join(format!("{name}.csv")), mask.to_csv())?;
        write_file(&out_dir.join(format!("{name}.pgm")), mask.to_pgm())?;
    }
    Ok(masks)
}

fn load_entry(entry: &ManifestEntry, base: &Path) -> Result<Mixture> {
    let paths = [&entry.mixture, &entry.target_image, &entry.interference_image];
    let missing: Vec<String> = paths
        .iter()
        .map(|p| base.join(p))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Input(format!("missing {}", missing.join(", "))));
    }
    Ok(Mixture {
        mixture: wavio::read_wav(base.join(&entry.mixture))?,
        target_image: wavio::read_wav(base.join(&entry.target_image))?,
        interference_image: wavio::read_wav(base.join(&entry.interference_image))?,
    })
}

/// Scores `methods` on every scenario of a manifest. Per-scenario problems
/// (missing files, processing errors) land in `failures`; the rest are
/// still scored. Writes `scores.csv` and `summary.txt` to `config.output`
/// (default: the manifest directory).
pub fn cmd_evaluate(manifest_path: &Path, methods: &[Method], config: &RunConfig) -> Result<ScoreReport> {
    if methods.is_empty() {
        return Err(Error::Input("no methods selected".into()));
    }
    config.validate(true)?;
    let manifest = Manifest::from_json_file(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut params = config.enhance_params();
    params.reference_channel = manifest.reference_channel;
    let opts = EvalOptions {
        params,
        irm: config.irm,
        metric: config.metric,
    };
    let results: Vec<(String, Result<Vec<metrics::ScoreRecord>>)> = with_jobs(config.jobs, || {
        manifest
            .scenarios
            .par_iter()
            .map(|e| {
                let scored = load_entry(e, base).and_then(|mix| metrics::score_mixture(&e.scenario, &mix, methods, &opts));
                (e.scenario.id.clone(), scored)
            })
            .collect()
    })?;
    let mut report = ScoreReport::default();
    for (id, r) in results {
        match r {
            Ok(mut recs) => report.records.append(&mut recs),
            Err(e) => report.failures.push((id, e.to_string())),
        }
    }
    let out = config.output.clone().unwrap_or_else(|| base.to_owned());
    create_dir(&out)?;
    write_file(&out.join("scores.csv"), report.to_csv())?;
    write_file(&out.join("summary.txt"), report.summary_table())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doa_arguments() {
        let d = parse_doa_vector("0, 2, 0").unwrap();
        assert!((d.unit()[1] - 1.0).abs() < 1e-12);
        assert!(parse_doa_vector("1,2").is_err());
        assert!(parse_doa_vector("a,b,c").is_err());
        assert!(parse_doa_vector("0,0,0").is_err());
        let az = resolve_doa(Some(90.0), None, None).unwrap();
        assert!((az.unit()[1] - 1.0).abs() < 1e-12);
        assert!(resolve_doa(Some(90.0), None, Some("1,0,0")).is_err());
        assert!(resolve_doa(None, None, None).is_err());
    }

    #[test]
    fn exit_codes() {
        let missing = Error::io("/nope", std::io::Error::from(std::io::ErrorKind::NotFound));
        assert_eq!(exit_code(&missing), 2);
        assert_eq!(exit_code(&Error::config("alpha", "bad")), 2);
        assert_eq!(exit_code(&Error::Numeric("x".into())), 1);
    }

    #[test]
    fn evaluate_rejects_empty_methods() {
        let err = cmd_evaluate(Path::new("/does/not/matter.json"), &[], &RunConfig::default()).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }
}
