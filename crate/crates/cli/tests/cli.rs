use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rcur(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcur"))
        .args(args)
        .current_dir(dir)
        .env_remove("RCUR_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) {
    let out = rcur(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

/// Drops the `wall_ms` column from a CSV report.
fn without_timing(csv: &str) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let col = rdr.headers().unwrap().iter().position(|h| h == "wall_ms").unwrap();
    rdr.records()
        .map(|r| {
            r.unwrap()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != col)
                .map(|(_, v)| v.to_string())
                .collect()
        })
        .collect()
}

#[test]
fn gsvd_writes_factors_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "pair", "--m", "60", "--n", "12", "--eps", "0.1", "--seed", "3", "--out-prefix", "s"], d);
    ok(&["gsvd", "--a", "s_AE.mtx", "--b", "s_B.mtx", "--out-prefix", "f"], d);
    for name in ["f_U.mtx", "f_V.mtx", "f_Y.mtx"] {
        assert!(read(d, name).starts_with("%%MatrixMarket matrix array real general"));
    }
    let vals = read(d, "f_vals.csv");
    let mut lines = vals.lines();
    assert_eq!(lines.next(), Some("gamma,beta,ratio"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|t| t.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 12);
    for r in &rows {
        assert!((r[0] * r[0] + r[1] * r[1] - 1.0).abs() < 1e-10);
    }
    assert!(rows.windows(2).all(|w| w[0][2] >= w[1][2]));

    ok(&["gsvd", "--a", "s_AE.mtx", "--b", "s_B.mtx", "--out-prefix", "r", "--randomized", "-k", "4", "-p", "3"], d);
    assert_eq!(read(d, "r_vals.csv").lines().count(), 13);
}

#[test]
fn gcur_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "pair", "--m", "80", "--n", "30", "--eps", "0.2", "--seed", "1", "--out-prefix", "s"], d);
    let args = |report: &'static str| {
        vec![
            "gcur", "--a", "s_AE.mtx", "--b", "s_B.mtx", "-k", "8", "--method", "ldeim", "--khat", "4",
            "-p", "5", "--seed", "7", "--randomized", "--report", report,
        ]
    };
    ok(&args("r1.csv"), d);
    ok(&args("r2.csv"), d);
    let r1 = read(d, "r1.csv");
    assert_eq!(
        r1.lines().next().unwrap(),
        "method,k,khat,p,seed,err_a,err_b,wall_ms,p_indices,s_indices,s_b_indices"
    );
    assert_eq!(without_timing(&r1), without_timing(&read(d, "r2.csv")));
    let row = &without_timing(&r1)[0];
    assert_eq!(row[0], "R-LDEIM-GCUR");
    assert_eq!(row[7].split(' ').count(), 8);

    ok(&["gcur", "--a", "s_AE.mtx", "--b", "s_B.mtx", "-k", "8", "--report", "det.csv"], d);
    assert_eq!(without_timing(&read(d, "det.csv"))[0][0], "DEIM-GCUR");
}

#[test]
fn cur_rsvd_and_rsvd_cur_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "triplet", "--l", "50", "--d", "40", "--m", "30", "--n", "20", "--eps", "0.1", "--out-prefix", "t"], d);
    ok(&["cur", "--a", "t_AE.mtx", "-k", "6", "--report", "c.csv"], d);
    assert_eq!(without_timing(&read(d, "c.csv"))[0][0], "DEIM-CUR");

    ok(&["rsvd", "--a", "t_AE.mtx", "--b", "t_B.mtx", "--g", "t_G.mtx", "--out-prefix", "f"], d);
    assert_eq!(read(d, "f_vals.csv").lines().count(), 21);
    assert!(read(d, "f_Z.mtx").lines().nth(1) == Some("30 30"));

    ok(&[
        "rsvd-cur", "--a", "t_AE.mtx", "--b", "t_B.mtx", "--g", "t_G.mtx", "-k", "6", "--method", "ldeim",
        "--randomized", "-p", "5", "--report", "rc.csv",
    ], d);
    let rc = read(d, "rc.csv");
    assert!(rc.starts_with("method,k,khat,p,seed,err_a,err_b,err_g,wall_ms,"));
    assert_eq!(without_timing(&rc)[0][0], "R-LDEIM-RSVD-CUR");
}

#[test]
fn subgroup_synth_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "subgroup", "--m", "5", "--d", "2", "--out-prefix", "g"], d);
    assert_eq!(read(d, "g_A.mtx").lines().nth(1), Some("20 6"));
    assert_eq!(read(d, "g_B.mtx").lines().nth(1), Some("5 6"));
}

#[test]
fn bench_exp1_rows_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        vec!["bench", "exp1", "--m", "120", "--n", "40", "--eps", "0.2", "--kmin", "2", "--kmax", "6", "--kstep", "2", "--seeds", "2", "--out", out]
    };
    ok(&args("a.csv"), d);
    ok(&args("b.csv"), d);
    let a = without_timing(&read(d, "a.csv"));
    assert_eq!(a.len(), 3 * 4 * 2);
    assert_eq!(a, without_timing(&read(d, "b.csv")));

    ok(&["bench", "exp4", "--l", "60", "--d", "50", "--m", "40", "--n", "30", "-k", "6", "--eps", "0.1", "-p", "10", "--out", "e4.csv"], d);
    assert_eq!(without_timing(&read(d, "e4.csv")).len(), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(rcur(&["frobnicate"], d).status.code(), Some(2));
    assert_eq!(rcur(&["gsvd", "--a", "x.mtx"], d).status.code(), Some(2));

    ok(&["synth", "pair", "--m", "30", "--n", "10", "--eps", "0.1", "--out-prefix", "s"], d);
    ok(&["synth", "pair", "--m", "30", "--n", "8", "--eps", "0.1", "--out-prefix", "w"], d);
    let mismatch = rcur(&["gsvd", "--a", "s_AE.mtx", "--b", "w_B.mtx", "--out-prefix", "f"], d);
    assert_eq!(mismatch.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("dimension mismatch"));
    assert_eq!(rcur(&["gsvd", "--a", "missing.mtx", "--b", "s_B.mtx", "--out-prefix", "f"], d).status.code(), Some(1));
    assert_eq!(rcur(&["cur", "--a", "s_AE.mtx", "-k", "40", "--report", "r.csv"], d).status.code(), Some(2));

    let threads = Command::new(env!("CARGO_BIN_EXE_rcur"))
        .args(["synth", "subgroup", "--m", "2", "--d", "1", "--out-prefix", "g"])
        .current_dir(d)
        .env("RCUR_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
    let threads = Command::new(env!("CARGO_BIN_EXE_rcur"))
        .args(["synth", "subgroup", "--m", "2", "--d", "1", "--out-prefix", "g"])
        .current_dir(d)
        .env("RCUR_THREADS", "2")
        .output()
        .unwrap();
    assert!(threads.status.success());
}
