use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_hmm-sp");

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("study.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "\
study = vs_h
example = example1
gamma = 1
epsilon = 2^-3
delta = 2^-2
h = 2^-4, 2^-5
bc = essential
H = 1
";

#[test]
fn run_writes_csv_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}.csv"));
        let status = Command::new(BIN)
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read_to_string(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let lines: Vec<&str> = outputs[0].lines().collect();
    assert_eq!(lines[0], "study,example,bc,weighting,gamma,epsilon,delta,h,H,error,rate,wall_ms");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("vs_h,example1,essential,none,1.0,0.125,0.25,0.0625,1.0,"));
}

#[test]
fn markdown_and_env_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out.md");
    let status = Command::new(BIN)
        .env("HMM_SP_THREADS", "2")
        .args(["run", "--format", "markdown", "--timings", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let md = std::fs::read_to_string(&out).unwrap();
    assert!(md.contains("| h | error | rate |"), "{md}");
    assert!(md.contains("(gamma=1)"));
    assert!(md.contains("threads 2"));
    assert!(md.contains("total wall time"));

    // The flag wins over the environment.
    let status = Command::new(BIN)
        .env("HMM_SP_THREADS", "3")
        .args(["run", "--format", "md", "--threads", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(std::fs::read_to_string(&out).unwrap().contains("threads 1"));

    let status = Command::new(BIN)
        .env("HMM_SP_THREADS", "many")
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(!status.success());
}

#[test]
fn bad_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "study = vs_nothing\n");
    let out = dir.path().join("out.csv");
    let o = Command::new(BIN).args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown study kind"));
}

#[test]
fn failing_study_flushes_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "quadrature = 2\nepsilon = 2^-3\ndelta = 2^-2\nh = 2^-4\nH = 1\n");
    let out = dir.path().join("out.csv");
    let o = Command::new(BIN).args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("study failed at"));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1);
}

#[test]
fn verify_passes() {
    let o = Command::new(BIN).arg("verify").output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert!(!text.contains("FAIL"));
    assert!(text.lines().count() >= 8);
}

#[test]
fn shipped_configs_parse_and_smoke_runs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        hmm_sp::experiment::ExperimentConfig::from_file(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 5);
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c.csv");
    let status = Command::new(BIN)
        .args(["run", "--config"])
        .arg(dir.join("constant_single.cfg"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = hmm_sp::experiment::read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.error <= 1e-10 && r.rate.is_none()));
}
