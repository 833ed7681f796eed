use std::process::Command;

use psprune::exec::Execution;
use psprune::experiment::{
    mean_stdev, parse_algos, run_ratio_study, run_sweep, write_sweep_csv, ExperimentConfig, SWEEP_HEADER,
};

fn psprune() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psprune"))
}

fn small_sweep() -> ExperimentConfig {
    ExperimentConfig {
        actions: 4,
        epsilons: vec![2.4, 1.2],
        algorithms: parse_algos("ps-we,ps-reg+:2eps,ps-reg-m").unwrap(),
        runs: 3,
        seed: 12,
        verify: true,
        ..Default::default()
    }
}

fn without_wall_time(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn sweep_is_reproducible_across_execution_modes() {
    let cfg = small_sweep();
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_sweep_csv(&run_sweep(&cfg, Execution::Sequential).unwrap(), &mut a).unwrap();
    write_sweep_csv(&run_sweep(&cfg, Execution::Parallel).unwrap(), &mut b).unwrap();
    let (a, b) = (String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap());
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
    assert_eq!(a.lines().next().unwrap(), SWEEP_HEADER.join(","));
}

#[test]
fn aggregate_rows_match_recomputation() {
    let rows = run_sweep(&small_sweep(), Execution::Parallel).unwrap();
    let mut out = Vec::new();
    write_sweep_csv(&rows, &mut out).unwrap();
    let mut reader = csv::Reader::from_reader(out.as_slice());
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let mut checked = 0;
    for (i, rec) in records.iter().enumerate() {
        if &rec[3] != "mean" {
            continue;
        }
        let runs: Vec<&csv::StringRecord> = records[..i]
            .iter()
            .rev()
            .take_while(|r| r[0] == rec[0] && r[1] == rec[1] && r[2] == rec[2] && &r[3] != "stdev")
            .collect();
        let stdev = &records[i + 1];
        for col in [5usize, 6, 7, 8] {
            let xs: Vec<f64> = runs.iter().map(|r| r[col].parse().unwrap()).collect();
            let (m, s) = mean_stdev(&xs);
            assert!((rec[col].parse::<f64>().unwrap() - m).abs() <= 1e-9 * m.abs().max(1.0));
            assert!((stdev[col].parse::<f64>().unwrap() - s).abs() <= 1e-9 * s.abs().max(1.0));
        }
        checked += 1;
    }
    assert_eq!(checked, 6);
    assert!(rows.iter().all(|r| r.containment_ok.is_some()));
}

#[test]
fn ratio_of_reference_is_one() {
    let cfg = ExperimentConfig { actions: 4, runs: 2, ..small_sweep() };
    let rows = run_ratio_study(&cfg, Execution::Parallel).unwrap();
    assert!(rows.iter().filter(|r| r.algo.family() == "ps-we").all(|r| r.ratio == 1.0));
    assert_eq!(rows.len(), 2 * 2 * 3);
}

#[test]
fn binary_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let game = dir.path().join("game.json");
    let status = psprune()
        .args(["--actions", "3", "--range", "-2:2", "--eps", "c/10", "--algos", "ps-we,ps-reg-m", "--runs", "2"])
        .args(["--verify", "--seed", "4", "--out"])
        .arg(&out)
        .arg("--dump-game")
        .arg(&game)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * (2 + 2));
    let sidecar = std::fs::read_to_string(dir.path().join("sweep.csv.verdicts.jsonl")).unwrap();
    assert_eq!(sidecar.lines().count(), 4);

    // Sweeping the dumped game reproduces the rows.
    let again = dir.path().join("again.csv");
    let status = psprune()
        .args(["--eps", "c/10", "--algos", "ps-we,ps-reg-m", "--runs", "2", "--seed", "4", "--out"])
        .arg(&again)
        .arg("--game")
        .arg(&game)
        .status()
        .unwrap();
    assert!(status.success());
    let strip = |s: &str| -> Vec<String> {
        // Drop the containment and wall-time columns, which depend on --verify and the clock.
        s.lines().map(|l| l.split(',').take(10).collect::<Vec<_>>().join(",")).collect()
    };
    assert_eq!(strip(&text), strip(&std::fs::read_to_string(&again).unwrap()));
}

#[test]
fn binary_rejects_bad_config() {
    for args in [
        vec!["--delta", "1.5"],
        vec!["--eps", "c/0"],
        vec!["--algos", "ps-nope"],
        vec!["--runs", "0"],
        vec!["--range", "2:-2"],
        vec!["--beta", "1"],
    ] {
        let out = psprune().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
    let dir = tempfile::tempdir().unwrap();
    let status = psprune()
        .args(["--actions", "2", "--runs", "1", "--eps", "c/5", "--algos", "ps-we", "--out"])
        .arg(dir.path().join("missing/dir/out.csv"))
        .status()
        .unwrap();
    assert!(!status.success());
}
