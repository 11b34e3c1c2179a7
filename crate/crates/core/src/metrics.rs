//! SDR-family scoring and the four-method evaluation harness.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::beamform::{self, EnhanceParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::oracle::{self, IrmOptions};
use crate::roomsim::{self, InterferenceKind, Mixture, MixtureScenario, ScenarioSpec};
use crate::wavio::AudioClip;

/// Scores are clamped to `[-DB_CAP, DB_CAP]`.
pub const DB_CAP: f64 = 100.0;

fn to_db(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        return if num > 0.0 { DB_CAP } else { -DB_CAP };
    }
    if num <= 0.0 {
        return -DB_CAP;
    }
    (10.0 * (num / den).log10()).clamp(-DB_CAP, DB_CAP)
}

fn check_pair(estimate: &[f64], reference: &[f64]) -> Result<()> {
    if estimate.len() != reference.len() {
        return Err(Error::Shape(format!(
            "estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    if reference.iter().all(|v| *v == 0.0) {
        return Err(Error::Input("reference signal is all zeros".into()));
    }
    Ok(())
}

/// Scale-invariant SDR in dB between equal-length sample slices.
pub fn si_sdr_samples(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(estimate, reference)?;
    let dot: f64 = estimate.iter().zip(reference).map(|(e, r)| e * r).sum();
    let energy: f64 = reference.iter().map(|r| r * r).sum();
    let scale = dot / energy;
    let (mut target, mut noise) = (0.0, 0.0);
    for (e, r) in estimate.iter().zip(reference) {
        let s = scale * r;
        target += s * s;
        noise += (e - s) * (e - s);
    }
    Ok(to_db(target, noise))
}

fn mono(clip: &AudioClip, what: &str) -> Result<Vec<f64>> {
    if clip.num_channels() != 1 {
        return Err(Error::Input(format!("{what} must be mono, has {} channels", clip.num_channels())));
    }
    Ok(clip.channel(0).to_vec())
}

/// SI-SDR of a mono estimate against a mono reference of equal length.
pub fn si_sdr(estimate: &AudioClip, reference: &AudioClip) -> Result<f64> {
    si_sdr_samples(&mono(estimate, "estimate")?, &mono(reference, "reference")?)
}

/// SDR allowing a time-invariant FIR distortion of the reference: the
/// estimate is projected by least squares onto `taps` delayed copies of the
/// reference, and the residual counts as distortion.
pub fn filtered_sdr_samples(estimate: &[f64], reference: &[f64], taps: usize) -> Result<f64> {
    check_pair(estimate, reference)?;
    if taps == 0 {
        return Err(Error::param("taps", "must be positive"));
    }
    let n = reference.len();
    let size = (n + taps).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let spectrum = |x: &[f64]| {
        let mut b: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        b.resize(size, Complex64::default());
        fwd.process(&mut b);
        b
    };
    let rs = spectrum(reference);
    let es = spectrum(estimate);
    // auto[k] = Σ r[n] r[n+k], cross[k] = Σ r[n] e[n+k]
    let correlate = |a: &[Complex64], b: &[Complex64]| {
        let mut p: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x.conj() * y).collect();
        inv.process(&mut p);
        p.into_iter().take(taps).map(|z| z.re / size as f64).collect::<Vec<f64>>()
    };
    let auto = correlate(&rs, &rs);
    let cross = correlate(&rs, &es);
    let mut gram = Array2::from_shape_fn((taps, taps), |(i, j)| auto[i.abs_diff(j)]);
    // tiny ridge keeps the Toeplitz system definite for band-limited references
    let ridge = 1e-10 * auto[0];
    for i in 0..taps {
        gram[[i, i]] += ridge;
    }
    let coeffs = linalg::spd_solve(&gram, &cross)
        .ok_or_else(|| Error::Numeric("distortion filter system is singular".into()))?;
    let (mut target, mut noise) = (0.0, 0.0);
    for t in 0..n {
        let s: f64 = (0..taps.min(t + 1)).map(|k| coeffs[k] * reference[t - k]).sum();
        target += s * s;
        noise += (estimate[t] - s) * (estimate[t] - s);
    }
    Ok(to_db(target, noise))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Unprocessed,
    Ds,
    Kissgev,
    OracleGev,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Unprocessed, Method::Ds, Method::Kissgev, Method::OracleGev];

    pub fn name(self) -> &'static str {
        match self {
            Method::Unprocessed => "unprocessed",
            Method::Ds => "ds",
            Method::Kissgev => "kissgev",
            Method::OracleGev => "oracle_gev",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Unprocessed => "Unprocessed",
            Method::Ds => "Delay-and-sum",
            Method::Kissgev => "KISS-GEV",
            Method::OracleGev => "GEV with oracle mask",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s || (s == "oracle" && *m == Method::OracleGev))
            .ok_or_else(|| Error::Input(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    SiSdr,
    /// Least-squares FIR-projected SDR with the given filter length.
    FilteredSdr { taps: usize },
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::SiSdr => "si_sdr",
            Metric::FilteredSdr { .. } => "filtered_sdr",
        }
    }

    pub fn score(self, estimate: &[f64], reference: &[f64]) -> Result<f64> {
        match self {
            Metric::SiSdr => si_sdr_samples(estimate, reference),
            Metric::FilteredSdr { taps } => filtered_sdr_samples(estimate, reference, taps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub scenario: String,
    pub kind: InterferenceKind,
    pub method: Method,
    pub metric: String,
    pub value_db: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub records: Vec<ScoreRecord>,
    /// `(scenario id, error)` for items that could not be scored.
    pub failures: Vec<(String, String)>,
}

impl ScoreReport {
    /// Mean score per `(method, interference kind)`.
    pub fn means(&self) -> BTreeMap<(Method, InterferenceKind), f64> {
        let mut acc: BTreeMap<(Method, InterferenceKind), (f64, usize)> = BTreeMap::new();
        for r in &self.records {
            let e = acc.entry((r.method, r.kind)).or_default();
            e.0 += r.value_db;
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    pub fn mean(&self, method: Method, kind: InterferenceKind) -> Option<f64> {
        self.means().get(&(method, kind)).copied()
    }

    fn methods_and_kinds(&self) -> (Vec<Method>, Vec<InterferenceKind>) {
        let mut methods: Vec<Method> = self.records.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();
        let mut kinds: Vec<InterferenceKind> = self.records.iter().map(|r| r.kind).collect();
        kinds.sort();
        kinds.dedup();
        (methods, kinds)
    }

    /// One row per scenario × method, with the improvement over the
    /// unprocessed mixture when that was scored.
    pub fn to_csv(&self) -> String {
        let baseline: BTreeMap<&str, f64> = self
            .records
            .iter()
            .filter(|r| r.method == Method::Unprocessed)
            .map(|r| (r.scenario.as_str(), r.value_db))
            .collect();
        let mut out = String::from("scenario,interference,method,metric,value_db,improvement_db\n");
        for r in &self.records {
            let imp = baseline
                .get(r.scenario.as_str())
                .map(|b| format!("{:.4}", r.value_db - b))
                .unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{:.4},{}", r.scenario, r.kind, r.method.name(), r.metric, r.value_db, imp);
        }
        out
    }

    /// Text table of mean scores, methods as rows and interference kinds as
    /// columns, followed by the mean improvement over the unprocessed input.
    pub fn summary_table(&self) -> String {
        let (methods, kinds) = self.methods_and_kinds();
        let means = self.means();
        let metric = self.records.first().map_or("sdr", |r| r.metric.as_str());
        let mut out = String::new();
        let _ = writeln!(out, "Mean {metric} (dB) by interference type");
        let _ = write!(out, "{:<24}", "Method");
        for k in &kinds {
            let _ = write!(out, "{:>10}", k.dir_name());
        }
        out.push('\n');
        for m in &methods {
            let _ = write!(out, "{:<24}", m.label());
            for k in &kinds {
                match means.get(&(*m, *k)) {
                    Some(v) => {
                        let _ = write!(out, "{v:>10.2}");
                    }
                    None => {
                        let _ = write!(out, "{:>10}", "-");
                    }
                }
            }
            out.push('\n');
        }
        if methods.contains(&Method::Unprocessed) {
            let _ = writeln!(out, "\nImprovement over unprocessed (dB)");
            for m in methods.iter().filter(|m| **m != Method::Unprocessed) {
                let _ = write!(out, "{:<24}", m.label());
                for k in &kinds {
                    match (means.get(&(*m, *k)), means.get(&(Method::Unprocessed, *k))) {
                        (Some(v), Some(b)) => {
                            let _ = write!(out, "{:>+10.2}", v - b);
                        }
                        _ => {
                            let _ = write!(out, "{:>10}", "-");
                        }
                    }
                }
                out.push('\n');
            }
        }
        if !self.failures.is_empty() {
            let _ = writeln!(out, "\n{} item(s) failed", self.failures.len());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalOptions {
    pub params: EnhanceParams,
    pub irm: IrmOptions,
    pub metric: Metric,
}

/// Output of `method` for one simulated mixture, trimmed to the reference
/// length if longer.
pub fn run_method(method: Method, spec: &ScenarioSpec, mix: &Mixture, opts: &EvalOptions) -> Result<AudioClip> {
    let reference = opts.params.reference_channel;
    match method {
        Method::Unprocessed => Ok(mix.mixture.channel_clip(reference)),
        Method::Ds => beamform::ds_enhance(&mix.mixture, &spec.array_geometry, &spec.target_doa, &opts.params),
        Method::Kissgev => beamform::kissgev_enhance(&mix.mixture, &spec.array_geometry, &spec.target_doa, &opts.params),
        Method::OracleGev => oracle::oracle_gev_enhance(
            &mix.mixture,
            &mix.target_image,
            &mix.interference_image,
            &spec.array_geometry,
            &spec.target_doa,
            &opts.params,
            &opts.irm,
        ),
    }
}

/// Scores `estimate` against the clean reverberant target at the reference
/// channel, over their common length.
pub fn score_against_image(estimate: &AudioClip, target_image: &AudioClip, reference: usize, metric: Metric) -> Result<f64> {
    let len = estimate.len().min(target_image.len());
    let est = estimate.channel(0);
    let refc = target_image.channel(reference);
    let e: Vec<f64> = est.iter().take(len).copied().collect();
    let r: Vec<f64> = refc.iter().take(len).copied().collect();
    metric.score(&e, &r)
}

fn score_scenario(scenario: &MixtureScenario, methods: &[Method], opts: &EvalOptions) -> Result<Vec<ScoreRecord>> {
    let mix = roomsim::synthesize_mixture(scenario)?;
    score_mixture(&scenario.spec, &mix, methods, opts)
}

/// Scores every method on an already synthesized mixture.
pub fn score_mixture(spec: &ScenarioSpec, mix: &Mixture, methods: &[Method], opts: &EvalOptions) -> Result<Vec<ScoreRecord>> {
    methods
        .iter()
        .map(|&method| {
            let out = run_method(method, spec, mix, opts)?;
            let value_db = score_against_image(&out, &mix.target_image, opts.params.reference_channel, opts.metric)?;
            Ok(ScoreRecord {
                scenario: spec.id.clone(),
                kind: spec.kind,
                method,
                metric: opts.metric.name().to_owned(),
                value_db,
            })
        })
        .collect()
}

/// Simulates and scores every scenario with every method. Scenarios run in
/// parallel on the current rayon pool; records keep scenario order. A
/// failing scenario is reported in `failures` and the rest continue.
pub fn evaluate_methods(scenarios: &[MixtureScenario], methods: &[Method], opts: &EvalOptions) -> Result<ScoreReport> {
    if methods.is_empty() {
        return Err(Error::Input("no methods selected".into()));
    }
    let results: Vec<(String, Result<Vec<ScoreRecord>>)> = scenarios
        .par_iter()
        .map(|s| (s.spec.id.clone(), score_scenario(s, methods, opts)))
        .collect();
    let mut report = ScoreReport::default();
    for (id, res) in results {
        match res {
            Ok(mut recs) => report.records.append(&mut recs),
            Err(e) => report.failures.push((id, e.to_string())),
        }
    }
    Ok(report)
}
