use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::CommandFactory;
use demoinfer_cli::{run, Cli, EXIT_IO, EXIT_OK, EXIT_VALIDATION};
use demoinfer_core::fixtures::{write_movielens, SynthConfig};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["demoinfer"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn data_dir(seed: u64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_movielens(dir.path(), &SynthConfig::small(seed).generate()).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_flags(dir: &Path) -> Vec<String> {
    ["ratings", "users", "movies"]
        .iter()
        .flat_map(|n| [format!("--{n}"), dir.join(format!("{n}.dat")).display().to_string()])
        .collect()
}

fn with(base: &[String], extra: &[&str]) -> Outcome {
    let mut v: Vec<&str> = base.iter().map(String::as_str).collect();
    v.extend_from_slice(extra);
    cli(&v)
}

#[test]
fn help_lists_every_flag() {
    let root = Cli::command();
    let mut checked = 0;
    let mut stack = vec![(root.clone(), Vec::<String>::new())];
    while let Some((cmd, path)) = stack.pop() {
        let mut argv: Vec<&str> = path.iter().map(String::as_str).collect();
        argv.push("--help");
        let out = cli(&argv);
        assert_eq!(out.code, EXIT_OK, "{path:?}");
        for arg in cmd.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(out.stdout.contains(&format!("--{long}")), "`{path:?} --help` lacks --{long}");
                checked += 1;
            }
        }
        for sub in cmd.get_subcommands() {
            if sub.get_name() == "help" {
                continue;
            }
            let mut p = path.clone();
            p.push(sub.get_name().to_owned());
            stack.push((sub.clone(), p));
        }
    }
    assert!(checked > 30);
    let flags: Vec<String> = root
        .get_subcommands()
        .chain([&root])
        .flat_map(|c| c.get_arguments().filter_map(|a| a.get_long().map(String::from)).collect::<Vec<_>>())
        .collect();
    for want in [
        "ratings", "users", "movies", "enrichment", "alpha", "popularity-metric", "strategy", "classifier", "target",
        "split-ratio", "seed", "json", "out", "threads",
    ] {
        assert!(flags.iter().any(|f| f == want), "no --{want}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let out = cli(&["ingest", "--bogus"]);
    assert_eq!(out.code, EXIT_VALIDATION);
    assert!(out.stderr.contains("--bogus"));
    assert_eq!(cli(&["nope"]).code, EXIT_VALIDATION);
    assert_eq!(cli(&["train", "--classifier", "svm"]).code, EXIT_VALIDATION);
}

#[test]
fn alpha_out_of_range_is_a_validation_error() {
    let dir = data_dir(1);
    let mut args = vec!["features".to_string()];
    args.extend(data_flags(dir.path()));
    let out = with(&args, &["--strategy", "popular", "--alpha", "1.5", "--out", s(&dir.path().join("f"))]);
    assert_eq!(out.code, EXIT_VALIDATION);
    assert!(out.stderr.contains("alpha must be in (0, 1]"), "{}", out.stderr);
}

#[test]
fn missing_input_is_an_io_error() {
    let out = cli(&["ingest", "--ratings", "missing.dat", "--users", "u.dat", "--movies", "m.dat"]);
    assert_eq!(out.code, EXIT_IO);
    let out = cli(&["--json", "ingest", "--ratings", "missing.dat", "--users", "u.dat", "--movies", "m.dat"]);
    assert_eq!(out.code, EXIT_IO);
    let v: serde_json::Value = serde_json::from_str(out.stderr.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "io");
    assert_eq!(v["error"]["exit_code"], 2);
    assert!(v["error"]["message"].as_str().unwrap().contains(".dat"));
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_file() {
            files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
        }
    }
    files.sort();
    files
}

/// ingest → enrich → popularity → features → train → evaluate, with every
/// primary output captured.
fn pipeline(data: &Path, out: &Path) -> Vec<String> {
    let mut stdout = Vec::new();
    let flags = data_flags(data);
    let mut step = |name: &str, extra: &[&str], use_data: bool| {
        let mut args = vec![name.to_string()];
        if use_data {
            args.extend(flags.iter().cloned());
        }
        let o = with(&args, extra);
        assert_eq!(o.code, EXIT_OK, "{name}: {}", o.stderr);
        stdout.push(o.stdout);
    };
    step("ingest", &["--out", s(&out.join("canonical"))], true);
    step("enrich", &["--movies", s(&data.join("movies.dat")), "--seed", "3", "--out", s(out)], false);
    let enrichment = out.join("enrichment.csv");
    step("popularity", &["--alpha", "0.05", "--out", s(out)], true);
    step(
        "features",
        &["--strategy", "popular", "--enrichment", s(&enrichment), "--out", s(out)],
        true,
    );
    let feats = out.join("features_popular.csv");
    step(
        "train",
        &["--features", s(&feats), "--target", "gender", "--classifier", "rf", "--seed", "5", "--out", s(out)],
        false,
    );
    step(
        "evaluate",
        &[
            "--features",
            s(&feats),
            "--target",
            "gender",
            "--seed",
            "5",
            "--model",
            s(&out.join("model.json")),
            "--out",
            s(out),
        ],
        false,
    );
    stdout
}

#[test]
fn pipeline_runs_and_repeats_byte_for_byte() {
    let data = data_dir(2);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = pipeline(data.path(), a.path());
    let out_b = pipeline(data.path(), b.path());
    let strip = |v: Vec<String>, dir: &Path| -> Vec<String> {
        v.into_iter().map(|s| s.replace(&dir.display().to_string(), "OUT")).collect()
    };
    assert_eq!(strip(out_a, a.path()), strip(out_b, b.path()));
    let ta = read_tree(a.path());
    assert_eq!(ta, read_tree(b.path()));
    let names: Vec<String> = ta.iter().map(|(p, _)| p.display().to_string()).collect();
    for f in [
        "enrichment.csv",
        "fig1_histogram.csv",
        "fig2_portion.csv",
        "popular.csv",
        "features_popular.csv",
        "model.json",
        "report.json",
    ] {
        assert!(names.iter().any(|n| n == f), "{f} missing from {names:?}");
    }
    let report = demoinfer_core::evaluation::report_from_json(
        &fs::read_to_string(a.path().join("report.json")).unwrap(),
    )
    .unwrap();
    assert!(report.accuracy > 0.5);
}

#[test]
fn json_output_is_machine_readable() {
    let data = data_dir(3);
    let mut args = vec!["--json".to_string(), "popularity".to_string()];
    args.extend(data_flags(data.path()));
    let o = with(&args, &["--popularity-metric", "mean_score"]);
    assert_eq!(o.code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["metric"], "mean_score");
    assert!(v["popular_movies"].as_u64().unwrap() >= 1);
}

fn write_config(data: &Path, out: &Path) -> PathBuf {
    let cfg = format!(
        "ratings = {:?}\nusers = {:?}\nmovies = {:?}\nseeds = [1, 2]\ntargets = [\"gender\", \"age3\"]\noutput_dir = {:?}\n\n[hyperparams.rf]\nn_trees = 10\n\n[hyperparams.mlp]\nepochs = 10\n\n[hyperparams.xgb]\nrounds = 10\n",
        data.join("ratings.dat"),
        data.join("users.dat"),
        data.join("movies.dat"),
        out,
    );
    let path = data.join("grid.toml");
    fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn grid_binary_writes_tables_and_reports() {
    let data = data_dir(4);
    let out = data.path().join("results");
    let cfg = write_config(data.path(), &out);
    let status = Process::new(env!("CARGO_BIN_EXE_demoinfer"))
        .args(["grid", "--config", s(&cfg), "--threads", "2"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = String::from_utf8(status.stdout).unwrap();
    assert!(text.contains("KNN") && text.contains("Popular items"));
    for f in ["grid.json", "table_accuracy_gender.csv", "table_weighted_precision_age3.csv", "fig1_histogram.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let r = cli(&["report", "--grid", s(&out.join("grid.json")), "--metric", "weighted_f1", "--target", "age3", "--csv"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(r.stdout, fs::read_to_string(out.join("table_weighted_f1_age3.csv")).unwrap());
}
