use std::path::Path;
use std::process::Command;

fn run(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_reprogram-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("REPROGRAM_LAB_SEED")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn without_runtime(json: &str) -> String {
    json.lines().filter(|l| !l.contains("\"runtime_seconds\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn verdict_files_replay_and_ignore_workers() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--n_datasets", "6", "--max_steps", "200000", "--seed", "17"];
    let mut texts = Vec::new();
    for (out, workers) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let mut args = vec!["verify-theorem2", "--output_dir", out, "--workers", workers];
        args.extend(common);
        let (code, err) = run(dir.path(), &args);
        assert_eq!(code, 0, "{err}");
        texts.push(std::fs::read_to_string(dir.path().join(out).join("verdict.json")).unwrap());
    }
    let strip_workers = |s: &str| {
        without_runtime(s)
            .lines()
            .filter(|l| !l.contains("\"workers\"") && !l.contains("\"output_dir\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip_workers(&texts[0]), strip_workers(&texts[1]));
    assert_eq!(strip_workers(&texts[0]), strip_workers(&texts[2]));
    // same output directory: the whole file replays apart from the runtime
    let (code, _) = run(dir.path(), &["verify-theorem2", "--output_dir", "a", "--workers", "1", "--n_datasets", "6", "--max_steps", "200000", "--seed", "17"]);
    assert_eq!(code, 0);
    let again = std::fs::read_to_string(dir.path().join("a/verdict.json")).unwrap();
    assert_eq!(without_runtime(&again), without_runtime(&texts[0]));
    assert!(texts[0].contains("\"seed\": \"17\""));
}

#[test]
fn config_file_with_overrides_and_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# reduced\nn_datasets = 2\nmax_steps = 5\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_reprogram-lab"))
        .args(["verify-theorem2", "--config", "run.cfg", "--max_steps", "200000", "--output_dir", "o"])
        .current_dir(dir.path())
        .env("REPROGRAM_LAB_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json = std::fs::read_to_string(dir.path().join("o/verdict.json")).unwrap();
    assert!(json.contains("\"max_steps\": \"200000\""));
    assert!(json.contains("\"n_datasets\": \"2\""));
    assert!(json.contains("\"seed\": \"99\""));
}

#[test]
fn failing_suite_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // five steps cannot reach the crossing
    let (code, _) = run(dir.path(), &["verify-theorem2", "--n_datasets", "2", "--max_steps", "5", "--output_dir", "o"]);
    assert_eq!(code, 1);
    assert!(dir.path().join("o/verdict.json").exists());
}

#[test]
fn configuration_errors_exit_two_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(dir.path(), &["no-such-command"]);
    assert_eq!(code, 2);
    assert!(err.contains("verify-appendix-a"));
    let (code, err) = run(dir.path(), &["verify-theorem1", "--gama", "0.1"]);
    assert_eq!(code, 2);
    assert!(err.contains("gama"));
    let (code, err) = run(dir.path(), &["verify-theorem1", "--d", "64", "--k", "128", "--output_dir", "o"]);
    assert_eq!(code, 2, "{err}");
    let (code, _) = run(dir.path(), &["combine-image", "--output", "../x.ppm", "--output_dir", "o"]);
    assert_eq!(code, 2);
    assert!(!dir.path().join("x.ppm").exists());
}

#[test]
fn every_output_starts_with_the_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["construct-program", "--d", "64", "--k", "8", "--rho", "4", "--tau", "0.4", "--trials", "100", "--output_dir", "o"],
        &["optimize-program", "--d", "32", "--k", "4", "--rho", "4", "--tau", "0.4", "--steps", "20", "--trials", "100", "--output_dir", "o"],
        &["train-flow", "--max_steps", "500", "--record_every", "100", "--output_dir", "o"],
        &["combine-image", "--scheme", "2", "--output_dir", "o"],
    ];
    for args in runs {
        let out = dir.path().join("o");
        let _ = std::fs::remove_dir_all(&out);
        let (code, err) = run(dir.path(), args);
        assert_eq!(code, 0, "{args:?}: {err}");
        for entry in std::fs::read_dir(&out).unwrap() {
            let path = entry.unwrap().path();
            let bytes = std::fs::read(&path).unwrap();
            let head = String::from_utf8_lossy(&bytes[..bytes.len().min(200)]).into_owned();
            let ok = head.starts_with("# command = ")
                || head.starts_with("{\n  \"config\"")
                || head.starts_with("P6\n# command = ");
            assert!(ok, "{}: {head}", path.display());
        }
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("o")]);
    }
}

#[test]
fn combined_image_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(dir.path(), &["combine-image", "--output", "c.txt", "--output_dir", "o"]);
    assert_eq!(code, 0);
    let img = reprogram_lab::reprogram::ProgramImage::from_text(
        &std::fs::read_to_string(dir.path().join("o/c.txt")).unwrap(),
    )
    .unwrap();
    assert_eq!((img.height(), img.width(), img.channels()), (224, 224, 3));
    let (code, _) = run(dir.path(), &["combine-image", "--input", "o/c.txt", "--input_size", "1", "--output_dir", "p"]);
    assert_eq!(code, 0);
}
