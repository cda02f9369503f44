use hmm_sp::experiment::{run_study, write_csv, ExperimentConfig};

const CONFIG: &str = "\
study = vs_H
example = example2
gamma = 1
epsilon = 2^-3
delta = 2^-2
h = 2^-4
bc = free
H = 1/2, 1/4
";

fn csv_bytes(cfg: &ExperimentConfig) -> (Vec<u8>, Vec<f64>) {
    let rep = run_study(cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&rep.rows, &mut buf).unwrap();
    (buf, rep.rows.iter().map(|r| r.error).collect())
}

#[test]
fn same_config_same_bytes_and_worker_invariance() {
    let mut cfg: ExperimentConfig = CONFIG.parse().unwrap();
    let (a, ea) = csv_bytes(&cfg);
    let (b, _) = csv_bytes(&cfg);
    assert_eq!(a, b);
    cfg.threads = 3;
    let (_, ec) = csv_bytes(&cfg);
    for (x, y) in ea.iter().zip(&ec) {
        assert!((x - y).abs() <= 1e-13);
    }
    assert!(ea[1] < ea[0]);
}
