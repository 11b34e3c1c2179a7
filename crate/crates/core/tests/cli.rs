//! Black-box tests of the `kissgev` binary.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kissgev::cli::Manifest;
use kissgev::wavio::{read_wav, write_wav};
use kissgev::{AudioClip, WavEncoding};
use ndarray::Array2;
use tempfile::TempDir;

fn kissgev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kissgev"))
        .args(args)
        .env_remove("KISSGEV_CONFIG")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn corpus(dir: &Path) -> PathBuf {
    let root = dir.join("corpus");
    let out = kissgev(&["corpus", "--out", p(&root), "--clips", "1", "--seconds", "1.5", "--seed", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    root
}

fn simulate(corpus: &Path, out: &Path, count: usize, seed: u64) -> Output {
    kissgev(&[
        "simulate",
        "--corpus",
        p(corpus),
        "--out",
        p(out),
        "--count",
        &count.to_string(),
        "--seed",
        &seed.to_string(),
    ])
}

#[test]
fn simulate_writes_one_scenario_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let root = corpus(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = simulate(&root, out, 1, 9);
        assert!(res.status.success(), "{}", stderr(&res));
    }
    let manifest = Manifest::from_json_file(a.join("manifest.json")).unwrap();
    assert_eq!(manifest.scenarios.len(), 1);
    let id = &manifest.scenarios[0].scenario.id;
    let mut files: Vec<String> = std::fs::read_dir(a.join(id))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["interference.wav", "mixture.wav", "target.wav"]);
    let top: Vec<_> = std::fs::read_dir(&a).unwrap().collect();
    assert_eq!(top.len(), 2, "one scenario directory and the manifest");

    let bytes = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(bytes(&a, "manifest.json"), bytes(&b, "manifest.json"));
    for f in ["mixture.wav", "target.wav", "interference.wav"] {
        assert_eq!(bytes(&a.join(id), f), bytes(&b.join(id), f));
    }
    let mix = read_wav(a.join(id).join("mixture.wav")).unwrap();
    assert_eq!(mix.num_channels(), 8);
}

#[test]
fn out_of_range_absorption_is_rejected_before_writing() {
    let dir = TempDir::new().unwrap();
    let root = corpus(dir.path());
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"ranges": {"absorption": [0.2, 0.9]}}"#).unwrap();
    let out = dir.path().join("sim");
    let base = ["--config", p(&config), "simulate", "--corpus", p(&root), "--out", p(&out), "--count", "1"];
    let res = kissgev(&base);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("absorption"), "{}", stderr(&res));
    assert!(!out.exists());

    let mut unchecked = base.to_vec();
    unchecked.push("--unchecked");
    let res = kissgev(&unchecked);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn config_file_can_come_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let root = corpus(dir.path());
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"maskgen": {"alpha": 70}}"#).unwrap();
    let res = Command::new(env!("CARGO_BIN_EXE_kissgev"))
        .args(["simulate", "--corpus", p(&root), "--out", p(&dir.path().join("sim")), "--count", "1"])
        .env("KISSGEV_CONFIG", &config)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("maskgen.alpha"), "{}", stderr(&res));
}

fn two_mic_geometry(dir: &Path) -> PathBuf {
    let path = dir.join("pair.json");
    std::fs::write(&path, r#"{"mics": [[-0.05, 0, 0], [0.05, 0, 0]], "speed_of_sound": 343.0}"#).unwrap();
    path
}

#[test]
fn delay_and_sum_of_identical_channels_is_the_channel() {
    let dir = TempDir::new().unwrap();
    let geometry = two_mic_geometry(dir.path());
    let mut r = common::rng(12);
    let x: Vec<f64> = common::white(&mut r, 8000).iter().map(|v| 0.5 * v).collect();
    let stereo = Array2::from_shape_fn((2, x.len()), |(_, n)| x[n]);
    let input = dir.path().join("in.wav");
    write_wav(&AudioClip::new(stereo, 16000).unwrap(), &input, WavEncoding::Float32).unwrap();
    let output = dir.path().join("out.wav");
    // broadside: both microphones have the same delay
    let res = kissgev(&[
        "--geometry",
        p(&geometry),
        "enhance",
        p(&input),
        "-o",
        p(&output),
        "--method",
        "ds",
        "--doa",
        "0,1,0",
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let y = read_wav(&output).unwrap();
    assert_eq!((y.num_channels(), y.sample_rate()), (1, 16000));
    let x32: Vec<f64> = x.iter().map(|v| f64::from(*v as f32)).collect();
    // the first and last hop are only partly covered by analysis frames
    for n in 256..y.len() - 512 {
        assert!((y.channel(0)[n] - x32[n]).abs() <= 1e-6, "sample {n}");
    }
}

#[test]
fn missing_geometry_exits_2_naming_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere").join("array.json");
    let input = dir.path().join("in.wav");
    write_wav(&AudioClip::new(Array2::zeros((2, 4096)), 16000).unwrap(), &input, WavEncoding::Float32).unwrap();
    let res = kissgev(&[
        "--geometry",
        p(&missing),
        "enhance",
        p(&input),
        "-o",
        p(&dir.path().join("o.wav")),
        "--azimuth",
        "30",
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains(p(&missing)), "{}", stderr(&res));
}

#[test]
fn enhance_usage_errors() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.wav");
    let mut r = common::rng(2);
    let noise = Array2::from_shape_fn((8, 8000), |_| 0.1 * common::white(&mut r, 1)[0]);
    write_wav(&AudioClip::new(noise, 16000).unwrap(), &input, WavEncoding::Float32).unwrap();
    let o = dir.path().join("o.wav");
    let run = |extra: &[&str]| {
        let mut args = vec!["enhance", p(&input), "-o", p(&o)];
        args.extend_from_slice(extra);
        kissgev(&args)
    };
    for bad in [
        vec!["--doa", "1,zero,0"],
        vec!["--doa", "0,0,0"],
        vec![],
        vec!["--azimuth", "10", "--doa", "1,0,0"],
        vec!["--azimuth", "10", "--method", "mvdr"],
        vec!["--azimuth", "10", "--method", "oracle"],
    ] {
        let res = run(&bad);
        assert_eq!(res.status.code(), Some(2), "{bad:?}: {}", stderr(&res));
        assert!(stderr(&res).starts_with("error:"), "{bad:?}: {}", stderr(&res));
    }
    // channel count does not match the two-microphone geometry
    let geometry = two_mic_geometry(dir.path());
    let res = kissgev(&["--geometry", p(&geometry), "enhance", p(&input), "-o", p(&o), "--azimuth", "0"]);
    assert_eq!(res.status.code(), Some(2), "{}", stderr(&res));
    assert!(!o.exists());

    let res = run(&["--azimuth", "-45", "--elevation", "10", "--encoding", "pcm16"]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert_eq!(read_wav(&o).unwrap().num_channels(), 1);
}

#[test]
fn evaluate_scores_every_scenario_and_method() {
    let dir = TempDir::new().unwrap();
    let root = corpus(dir.path());
    let sim = dir.path().join("sim");
    assert!(simulate(&root, &sim, 3, 2).status.success());
    let manifest = sim.join("manifest.json");
    let res = kissgev(&["evaluate", p(&manifest), "--methods", "unprocessed,ds,kissgev"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let csv = std::fs::read_to_string(sim.join("scores.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "scenario,interference,method,metric,value_db,improvement_db");
    assert_eq!(rows.len() - 1, 3 * 3);
    let summary = std::fs::read_to_string(sim.join("summary.txt")).unwrap();
    assert!(summary.contains("KISS-GEV") && summary.contains("music"), "{summary}");
    assert!(String::from_utf8_lossy(&res.stdout).contains("Unprocessed"));

    let res = kissgev(&["evaluate", p(&manifest), "--methods="]);
    assert_eq!(res.status.code(), Some(2), "{}", stderr(&res));
    let empty_config = dir.path().join("none.json");
    std::fs::write(&empty_config, r#"{"methods": []}"#).unwrap();
    let res = kissgev(&["--config", p(&empty_config), "evaluate", p(&manifest)]);
    assert_eq!(res.status.code(), Some(2), "{}", stderr(&res));
    assert!(stderr(&res).contains("method"), "{}", stderr(&res));
}

#[test]
fn evaluate_reports_missing_files_and_keeps_partial_results() {
    let dir = TempDir::new().unwrap();
    let root = corpus(dir.path());
    let sim = dir.path().join("sim");
    assert!(simulate(&root, &sim, 2, 5).status.success());
    let manifest = Manifest::from_json_file(sim.join("manifest.json")).unwrap();
    let broken = &manifest.scenarios[1];
    std::fs::remove_file(sim.join(&broken.target_image)).unwrap();
    let out = dir.path().join("scores");
    let res = kissgev(&["evaluate", p(&sim.join("manifest.json")), "--methods", "unprocessed,ds", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(1), "{}", stderr(&res));
    let err = stderr(&res);
    assert!(err.contains(&broken.scenario.id) && err.contains("target.wav"), "{err}");
    let csv = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    assert_eq!(csv.lines().count() - 1, 2);
    assert!(csv.contains(&manifest.scenarios[0].scenario.id));
}

#[test]
fn mask_dump_files_are_consistent() {
    let dir = TempDir::new().unwrap();
    let (s, mix) = common::scenario(2);
    let input = dir.path().join("mix.wav");
    write_wav(&mix.mixture, &input, WavEncoding::Float32).unwrap();
    let out = dir.path().join("masks");
    let az = s.spec.target_doa.azimuth_degrees();
    let u = s.spec.target_doa.unit();
    let el = u[2].asin().to_degrees();
    let res = kissgev(&[
        "mask-dump",
        p(&input),
        "--out",
        p(&out),
        &format!("--azimuth={az}"),
        &format!("--elevation={el}"),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let read = |name: &str| -> Vec<Vec<u8>> {
        std::fs::read_to_string(out.join(name))
            .unwrap()
            .lines()
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    };
    let (target, noise) = (read("target_mask.csv"), read("noise_mask.csv"));
    let frames = kissgev::StftConfig::default().num_frames(mix.mixture.len());
    assert_eq!(target.len(), frames);
    assert!(target.iter().chain(&noise).all(|row| row.len() == 257));
    for (a, b) in target.iter().zip(&noise) {
        assert!(a.iter().zip(b).all(|(x, y)| x * y == 0), "masks overlap");
    }
    let expected = 0.25 * frames as f64;
    for f in 0..257 {
        for mask in [&target, &noise] {
            let count = mask.iter().filter(|row| row[f] == 1).count() as f64;
            assert!((count - expected).abs() <= 1.0, "bin {f}: {count} of {frames}");
        }
    }
    for name in ["target_mask.pgm", "noise_mask.pgm"] {
        assert!(std::fs::read(out.join(name)).unwrap().starts_with(b"P5\n"));
    }
}
