use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ietrial_cli::config::RunConfigFile;
use ietrial_core::simulator::run_study;
use serde_json::Value;

fn ietrial(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ietrial"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SCENARIO: &str = r#"{"total_n": 100000, "control_fraction": 0.5, "p0": 0.02, "rr": 0.9,
                           "p_m": 0.05, "rr_neg": 1.0, "rr_pos": 0.8666666666666667}"#;

fn loss_config(reps: u64, seed: u64) -> String {
    format!(
        r#"{{
  "scenario": {SCENARIO},
  "mechanisms": [
    {{"sampling": {{"f_event": 0.95, "f_nonevent": 0.5}},
      "degradation": {{"loss_event": 0.1, "loss_nonevent": 0.2}}}},
    {{"sampling": {{"f_event": 0.95, "f_nonevent": 0.5}},
      "degradation": {{"loss_event": 0.1, "loss_nonevent": 0.2, "retest_correction": true}},
      "noncompliance": {{"screen_event": 0.3, "screen_nonevent": 0.1,
                         "control_event": 0.3, "control_nonevent": 0.1, "correction": true}}}}
  ],
  "sim": {{"reps": {reps}, "seed": {seed}}}
}}"#
    )
}

fn json_rows(text: &str) -> Vec<Value> {
    match serde_json::from_str::<Value>(text).unwrap() {
        Value::Array(rows) => rows,
        other => panic!("{other}"),
    }
}

fn find<'a>(rows: &'a [Value], key: &str, value: &str) -> &'a Value {
    rows.iter().find(|r| r[key] == value).unwrap_or_else(|| panic!("{key}={value}"))
}

#[test]
fn power_defaults_to_worked_example() {
    let o = ietrial(&["power", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json_rows(&String::from_utf8(o.stdout).unwrap());
    let r = &rows[0];
    assert!((r["power_pos"].as_f64().unwrap() - 0.883).abs() < 1e-3);
    assert!((r["power_standard"].as_f64().unwrap() - 0.639).abs() < 1e-3);
    assert!((r["z_ratio"].as_f64().unwrap() - 1.3598).abs() < 1e-3);
    assert!((r["p0_given_pos"].as_f64().unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn power_sample_sizes() {
    let o = ietrial(&["power", "--target-power", "0.9"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut reader = csv::Reader::from_reader(o.stdout.as_slice());
    let header = reader.headers().unwrap().clone();
    let row = reader.records().next().unwrap().unwrap();
    let get = |k: &str| row[header.iter().position(|h| h == k).unwrap()].parse::<f64>().unwrap();
    assert!((get("total_n_pos") / 2.0 - 53_000.0).abs() <= 2_000.0);
    assert!((get("total_n_standard") / 2.0 - 98_000.0).abs() <= 2_000.0);
}

#[test]
fn null_effect_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "null.json",
        &format!(r#"{{"scenario": {}}}"#, SCENARIO.replace("\"rr\": 0.9", "\"rr\": 1.0")),
    );
    let o = ietrial(&["power", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("risk difference is zero"));
}

#[test]
fn infeasible_scenario_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // Solves to P0(D+|M+) = 2.2.
    let text = SCENARIO.replace("\"p_m\": 0.05", "\"p_m\": 0.001").replace("0.8666666666666667", "0.1");
    let cfg = write(dir.path(), "bad.json", &format!(r#"{{"scenario": {text}}}"#));
    let o = ietrial(&["simulate", "--config", cfg.to_str().unwrap(), "--reps", "10"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "typo.json", &loss_config(10, 1).replace("\"sim\"", "\"simulation\""));
    let o = ietrial(&["simulate", "--config", typo.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("simulation"), "{}", stderr(&o));

    let range = write(dir.path(), "range.json", &loss_config(10, 1).replace("0.95", "1.95"));
    assert_eq!(code(&ietrial(&["simulate", "--config", range.to_str().unwrap()])), 1);

    let good = write(dir.path(), "good.json", &loss_config(10, 1));
    assert_eq!(code(&ietrial(&["simulate", "--config", good.to_str().unwrap(), "--alpha", "2"])), 1);
    assert_eq!(code(&ietrial(&["simulate", "--config", good.to_str().unwrap(), "--format", "xml"])), 1);
    assert_eq!(code(&ietrial(&["reproduce", "table9"])), 1);
    assert_eq!(code(&ietrial(&["frobnicate"])), 1);
}

#[test]
fn io_errors_exit_three() {
    let o = ietrial(&["simulate", "--config", "/nonexistent/config.json"]);
    assert_eq!(code(&o), 3);
    let o = ietrial(&["power", "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(code(&o), 3);
    let o = ietrial(&["analyze", "/nonexistent/tables.csv"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&ietrial(&["--help"])), 0);
    assert_eq!(code(&ietrial(&["reproduce", "--help"])), 0);
}

#[test]
fn simulate_json_round_trips_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write(dir.path(), "loss.json", &loss_config(300, 11));
    let out = dir.path().join("out.json");
    let o = ietrial(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json_rows(&std::fs::read_to_string(&out).unwrap());

    let cfg = RunConfigFile::load(&cfg_path).unwrap();
    let cells = cfg.sim_configs();
    assert_eq!(rows.len(), cells.len());
    for (row, (_, sim)) in rows.iter().zip(cells) {
        let want = run_study(&sim).unwrap();
        let bits = |k: &str| row[k].as_f64().map(f64::to_bits);
        let same = |k: &str, v: f64| assert_eq!(bits(k), Some(v.to_bits()), "{k}");
        let same_opt = |k: &str, v: Option<f64>| assert_eq!(bits(k), v.map(f64::to_bits), "{k}");
        same("mean_rr_pos", want.mean_rr_pos);
        same("mean_rr_neg", want.mean_rr_neg);
        same_opt("mean_corrected_rr_pos", want.mean_corrected_rr_pos);
        same_opt("mean_corrected_rr_neg", want.mean_corrected_rr_neg);
        same("power_standard", want.power_standard);
        same("power_rr_pos", want.power_rr_pos);
        same_opt("power_corrected_rr_pos", want.power_corrected_rr_pos);
        same("alpha_rr_neg", want.alpha_rr_neg);
        same_opt("alpha_corrected_rr_neg", want.alpha_corrected_rr_neg);
        same("rr_pos", sim.scenario.rr_pos);
        assert_eq!(row["degenerate_reps"].as_u64(), Some(want.degenerate_reps));
        assert_eq!(row["seed"].as_u64(), Some(11));
    }
    assert_eq!(rows[0]["retest_correction"], false);
    assert_eq!(rows[1]["compliance_correction"], true);
    assert!(rows[0]["nc_screen_event"].is_null());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "loss.json", &loss_config(200, 5));
    for format in ["csv", "json"] {
        let run = |name: &str| {
            let out = dir.path().join(name);
            let o = ietrial(&[
                "simulate",
                "--config",
                cfg.to_str().unwrap(),
                "--format",
                format,
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
            std::fs::read(out).unwrap()
        };
        assert_eq!(run("a"), run("b"), "{format}");
    }
    let single = |seed: &str| ietrial(&["simulate", "--config", cfg.to_str().unwrap(), "--reps", "1", "--seed", seed]).stdout;
    assert_eq!(single("3"), single("3"));
    assert_ne!(single("3"), single("4"));
}

#[test]
fn simulate_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "loss.json", &loss_config(2_000, 8));
    let o = ietrial(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), ietrial_cli::SIMULATE_COLUMNS.join(","));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "100000");
    assert_eq!(first[1], "0.500000");
    assert_eq!(first[6], "0.866667");
    // Uncorrected differential loss (0.1, 0.2): mean RR_pos near 0.80.
    let mean_rr_pos: f64 = first[17].parse().unwrap();
    assert!((mean_rr_pos - 0.80).abs() < 0.01, "{mean_rr_pos}");
    assert_eq!(first[19], "");
    assert_eq!(first.last().unwrap(), &"8");
}

const FIG1_TABLES: &str = "table,events_screen,nonevents_screen,events_control,nonevents_control\n\
                           ever,650,1850,750,1750\n\
                           never,250,47250,250,47250\n";

#[test]
fn analyze_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "fig1.csv", FIG1_TABLES);
    let o = ietrial(&["analyze", input.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json_rows(&String::from_utf8(o.stdout).unwrap());
    let est = |e: &str| find(&rows, "estimand", e)["estimate"].as_f64().unwrap();
    assert!((est("RR") - 0.90).abs() < 5e-3);
    assert!((est("RR_pos") - 0.867).abs() < 5e-4);
    assert!((est("RR_neg") - 1.00).abs() < 1e-12);
    assert!((est("RD_pos") - 0.04).abs() < 1e-12);
    let p = find(&rows, "estimand", "RR_pos")["p_two_sided"].as_f64().unwrap();
    assert!((p - 0.0016).abs() < 1e-4);
    assert_eq!(rows.len(), 6);
}

#[test]
fn analyze_corrects_noncompliance() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "s3.csv",
        "table,events_screen,nonevents_screen,events_control,nonevents_control\n\
         ever,390,370,150,1050\n\
         never,150,9450,50,28350\n\
         unknown,360,39280,800,19600\n",
    );
    let o = ietrial(&["analyze", input.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json_rows(&String::from_utf8(o.stdout).unwrap());
    let r = find(&rows, "estimand", "RR_pos");
    assert!((r["estimate"].as_f64().unwrap() - 0.912).abs() < 5e-4);
    assert_eq!(r["corrections"], "compliance");
}

#[test]
fn analyze_applies_retest_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "loss.csv",
        "table,events_screen,nonevents_screen,events_control,nonevents_control\n\
         ever,650,1850,675,1400\n\
         never,250,47250,325,47600\n",
    );
    let path = input.to_str().unwrap();
    let o = ietrial(&["analyze", path, "--retest-event", "0.9", "--retest-nonevent", "0.8", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json_rows(&String::from_utf8(o.stdout).unwrap());
    let r = find(&rows, "estimand", "RR_pos");
    assert!((r["estimate"].as_f64().unwrap() - 13.0 / 15.0).abs() < 1e-9);
    assert_eq!(code(&ietrial(&["analyze", path, "--retest-event", "0.9"])), 1);
    assert_eq!(code(&ietrial(&["analyze", path, "--retest-event", "0", "--retest-nonevent", "0.8"])), 1);
}

#[test]
fn analyze_malformed_input_names_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.csv", &FIG1_TABLES.replace("1750", "lots"));
    let o = ietrial(&["analyze", input.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("line 2, column nonevents_control"), "{err}");
}

#[test]
fn reproduce_fig1_is_exact() {
    let o = ietrial(&["reproduce", "fig1", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json_rows(&String::from_utf8(o.stdout).unwrap());
    for (table, quantity, want) in [
        ("ever", "events_screen", 650.0),
        ("ever", "nonevents_screen", 1850.0),
        ("ever", "events_control", 750.0),
        ("ever", "nonevents_control", 1750.0),
        ("never", "events_screen", 250.0),
        ("never", "nonevents_control", 47250.0),
    ] {
        let r = rows
            .iter()
            .find(|r| r["setting"] == table && r["quantity"] == quantity)
            .unwrap();
        assert!((r["reproduced"].as_f64().unwrap() - want).abs() < 1e-9);
        assert_eq!(r["pass"], "PASS");
    }
}

#[test]
fn reproduce_fig_s2_corrected_events() {
    let o = ietrial(&["reproduce", "figS2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("target,setting,quantity,reproduced,published,tolerance,pass\n"));
    assert!(text.contains("figS2,corrected,ever_events_control,600,600,"), "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn reproduce_is_deterministic() {
    let run = || ietrial(&["reproduce", "table2b", "--reps", "500", "--seed", "3"]).stdout;
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
}

#[test]
fn every_target_finishes_within_a_minute() {
    let targets = [
        "fig1", "fig2", "figS1", "figS2", "figS3", "table1a", "table1b", "table2a", "table2b", "table2c", "table3",
    ];
    for t in targets {
        let start = std::time::Instant::now();
        let o = ietrial(&["reproduce", t, "--reps", "10000"]);
        let elapsed = start.elapsed();
        assert_eq!(code(&o), 0, "{t}: {}", stderr(&o));
        assert!(elapsed.as_secs() < 60, "{t}: {elapsed:?}");
        let text = String::from_utf8(o.stdout).unwrap();
        assert!(text.lines().count() > 1, "{t}");
    }
}
