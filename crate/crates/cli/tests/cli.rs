use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_secure-slp"))
}

#[test]
fn point_prints_metrics_csv() {
    let out = bin()
        .args(["point", "--schemes", "zf,traditional_ci", "--trials", "30", "--gamma-e-db", "-30"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert!(lines[0].starts_with("scheme,M,N,K,rho"));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("zf,4,6,3,"));
}

#[test]
fn config_errors_exit_with_one() {
    let out = bin().args(["point", "--schemes", "zf", "--antennas", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["point", "--schemes", "qam"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["point", "--config", "/nonexistent/exp.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    let out = bin()
        .args(["point", "--schemes", "zf", "--trials", "5", "--out", "/nonexistent/dir/m.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn phase_pdf_and_trial_dump() {
    let dir = std::env::temp_dir().join(format!("secure-slp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let pdf = dir.join("pdf.csv");
    let status = bin()
        .args(["phase-pdf", "--schemes", "traditional_ci", "--trials", "40", "--bins", "8", "--out"])
        .arg(&pdf)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&pdf).unwrap();
    assert!(text.starts_with("symbol_index,bin_center_radians,density\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 8);

    let dump = dir.join("trials.csv");
    let status = bin()
        .args(["point", "--schemes", "zf", "--trials", "10", "--dump-trials"])
        .arg(&dump)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(&dump).unwrap().lines().count(), 31);
    std::fs::remove_dir_all(&dir).unwrap();
}
