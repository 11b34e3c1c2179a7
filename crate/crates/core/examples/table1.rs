//! Desk-scale reproduction of the four-method comparison: simulates a batch
//! of scenarios per interference type and prints mean scores.
//!
//!     cargo run --release --example table1 -- [--count N] [--seed S]
//!         [--postfilter ban|projection] [--filtered-sdr TAPS] [--corpus DIR]
//!
//! Without --corpus the synthetic stand-in corpus is used.

use kissgev::beamform::Postfilter;
use kissgev::metrics::{evaluate_methods, EvalOptions, Method, Metric};
use kissgev::roomsim::{sample_scenarios, Corpus, ScenarioRanges};
use kissgev::synth::{self, CorpusPlan};
use kissgev::ArrayGeometry;

fn main() -> kissgev::Result<()> {
    let mut count = 60;
    let mut seed = 1;
    let mut opts = EvalOptions::default();
    let mut corpus_dir = None;
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let value = args.next().unwrap_or_default();
        match flag.as_str() {
            "--count" => count = value.parse().expect("--count takes an integer"),
            "--seed" => seed = value.parse().expect("--seed takes an integer"),
            "--postfilter" => {
                opts.params.gev.postfilter = match value.as_str() {
                    "projection" => Postfilter::Projection,
                    _ => Postfilter::Ban,
                }
            }
            "--filtered-sdr" => {
                opts.metric = Metric::FilteredSdr {
                    taps: value.parse().expect("--filtered-sdr takes a tap count"),
                }
            }
            "--corpus" => corpus_dir = Some(value),
            other => panic!("unknown flag {other}"),
        }
    }
    let corpus = match corpus_dir {
        Some(dir) => Corpus::load(dir)?,
        None => synth::corpus(&CorpusPlan::default(), 7)?,
    };
    let scenarios = sample_scenarios(&corpus, &ArrayGeometry::respeaker_like(), &ScenarioRanges::default(), count, seed)?;
    let started = std::time::Instant::now();
    let report = evaluate_methods(&scenarios, &Method::ALL, &opts)?;
    print!("{}", report.summary_table());
    println!("\n{} scenarios in {:.1} s", scenarios.len(), started.elapsed().as_secs_f64());
    Ok(())
}
