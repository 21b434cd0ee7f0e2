use std::path::Path;
use std::process::{Command, Output};

use thdaq::storage::read_csv;

fn thdaq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thdaq"))
        .args(args)
        .current_dir(dir)
        .env_remove("THDAQ_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = thdaq(dir.path(), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn simulate_replay_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = thdaq(d, &["simulate", "--scenario", "const:25,50", "--count", "100", "--out", "cap.bin", "--truth", "truth.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::metadata(d.join("cap.bin")).unwrap().len(), 1700);

    let o = thdaq(d, &["replay", "cap.bin", "--csv", "log.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let log = read_csv(&d.join("log.csv")).unwrap();
    assert_eq!(log.records.len(), 100);
    assert_eq!(log.records[0].raw.raw(), [512, 617, 0, 0]);

    let o = thdaq(d, &["compare", "truth.csv", "log.csv", "--column", "temp_c", "--tolerance", "0.05"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("within_tolerance true"));
    let o = thdaq(d, &["compare", "truth.csv", "log.csv", "--column", "temp_c", "--tolerance", "0.01"]);
    assert_eq!(code(&o), 1);

    let o = thdaq(d, &["plot", "log.csv", "--out", "wave.svg", "--text", "wave.txt"]);
    assert_eq!(code(&o), 0);
    let svg = std::fs::read_to_string(d.join("wave.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(std::fs::read_to_string(d.join("wave.txt")).unwrap().contains("# temp_c"));
}

#[test]
fn replay_append_does_not_repeat_header() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&thdaq(d, &["simulate", "--count", "5", "--out", "cap.bin"])), 0);
    assert_eq!(code(&thdaq(d, &["replay", "cap.bin", "--csv", "log.csv"])), 0);
    assert_eq!(code(&thdaq(d, &["replay", "cap.bin", "--csv", "log.csv", "--append", "--time-base", "2024-01-02T00:00:00Z"])), 0);
    let text = std::fs::read_to_string(d.join("log.csv")).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text.matches("timestamp,").count(), 1);
}

#[test]
fn loopback_acquire_with_live_readout() {
    let dir = tempfile::tempdir().unwrap();
    let o = thdaq(dir.path(), &[
        "acquire", "--loopback", "--scenario", "const:20,40", "--count", "10",
        "--csv", "lb.csv", "--live", "--channels", "0,1", "--time-base", "2024-01-01T00:00:00Z",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 10);
    assert!(stdout.contains("ch1 40.0 %RH") || stdout.contains("ch1 39.9 %RH") || stdout.contains("ch1 40.1 %RH"), "{stdout}");
    assert!(!stdout.contains("ch2"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("frames ok        10"));
}

#[test]
fn usage_errors_create_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: &[&[&str]] = &[
        &["simulate", "--rate", "5000", "--count", "3", "--out", "a.bin"],
        &["simulate", "--scenario", "const:25", "--out", "b.bin"],
        &["simulate", "--scenario", "const:60,50", "--count", "3", "--out", "c.bin"],
        &["acquire", "--serial", "/dev/ttyS0", "--baud", "12345", "--csv", "d.csv"],
        &["acquire", "--file", "x.bin", "--channels", "7", "--csv", "e.csv"],
        &["replay", "x.bin", "--time-base", "yesterday", "--csv", "f.csv"],
        &["compare", "a.csv", "b.csv", "--column", "pressure"],
    ];
    for args in cases {
        let o = thdaq(d, args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read_dir(d).unwrap().count(), 0);
}

#[test]
fn missing_serial_port_is_a_domain_error_naming_the_device() {
    let dir = tempfile::tempdir().unwrap();
    let o = thdaq(dir.path(), &["acquire", "--serial", "/dev/does-not-exist-thdaq"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/dev/does-not-exist-thdaq"));
}

#[test]
fn config_file_overrides_profiles_and_channels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("daq.toml"),
        "[session]\nchannels = \"0\"\n\n[ch0]\nlabel = \"air\"\nkind = \"linear\"\nunit = \"degC\"\ngain = 20.0\noffset = 0.0\n",
    )
    .unwrap();
    assert_eq!(code(&thdaq(d, &["simulate", "--scenario", "const:25,50", "--count", "2", "--out", "cap.bin"])), 0);
    let o = thdaq(d, &["--config", "daq.toml", "replay", "cap.bin", "--live"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("ch0 50.05 °C"), "{stdout}");
    assert!(!stdout.contains("ch1"));

    std::fs::write(d.join("bad.toml"), "[ch0]\nkind = \"cubic\"\n").unwrap();
    assert_eq!(code(&thdaq(d, &["--config", "bad.toml", "replay", "cap.bin"])), 2);
}

#[test]
fn fit_subcommand_recovers_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("pts.csv"), "x,y\n0,1\n1,3\n2,5\n3,7\n").unwrap();
    let o = thdaq(d, &["fit", "pts.csv", "--degree", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("coefficients = [2.0000000000e0, 1.0000000000e0]"), "{out}");
    assert_eq!(code(&thdaq(d, &["fit", "pts.csv", "--degree", "5"])), 1);
}
