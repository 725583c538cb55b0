use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pricing-lab");
const HEADER: &str = "alg,gamma,r,kappa,g_policy,v,T,oracle,tie_break,sreg,bound_rhs,within_bound";

fn pricing_lab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn pricing_lab_env(args: &[&str], threads: &str) -> Output {
    Command::new(BIN)
        .args(args)
        .env("PRICING_LAB_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

/// Column `name` of every data row.
fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
}

#[test]
fn constant_zero_machine_pays_full_valuation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"algorithm":"constant:0","discount":{"kind":"geometric","gamma":0.75},"v_grid":[0.5],"t_grid":[10]}"#,
    );
    let out = pricing_lab(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    assert_eq!(csv.lines().next().unwrap(), HEADER);
    let sreg: f64 = column(&csv, "sreg")[0].parse().unwrap();
    assert_eq!(sreg, 5.0);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let body = |out: &str| {
        format!(
            r#"{{"algorithm":"preprrfes","exploit":"preprrfes:auto","kappa":1.6,"bound":true,
                "discount":{{"kind":"geometric","gamma":0.8}},
                "v_grid":{{"linspace":{{"start":0.1,"stop":0.9,"count":5}}}},
                "t_grid":{{"pow2":{{"from":3,"to":7}}}},"tie_break":"prefer-accept",
                "output":"{out}"}}"#
        )
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let cfg_a = write_config(dir.path(), "a.json", &body(a.to_str().unwrap()));
    let cfg_b = write_config(dir.path(), "b.json", &body(b.to_str().unwrap()));
    assert_eq!(pricing_lab_env(&["simulate", "--config", &cfg_a], "1").status.code(), Some(0));
    assert_eq!(pricing_lab_env(&["simulate", "--config", &cfg_b], "4").status.code(), Some(0));
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn flags_override_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"algorithm":"prrfes","r":3,"discount":{"kind":"geometric","gamma":0.75},"v_grid":[0.5],"t_grid":[10]}"#,
    );
    let out = pricing_lab(&["simulate", "--config", &cfg, "--r", "5", "--T", "6,7"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    assert_eq!(column(&csv, "r"), ["5", "5"]);
    assert_eq!(column(&csv, "T"), ["6", "7"]);
}

#[test]
fn cell_errors_exit_two() {
    let out = pricing_lab(&[
        "simulate", "--alg", "binary-search", "--gamma", "0.5", "--v", "0.3", "--T", "4,40", "--memo-cap", "8",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let sreg = column(&stdout(&out), "sreg");
    assert!(sreg[0].parse::<f64>().is_ok());
    assert_eq!(sreg[1], "error:memory-budget-exceeded");
}

#[test]
fn config_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let cases: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--config".into(), missing.to_str().unwrap().into()],
        vec!["simulate".into(), "--config".into(), write_config(dir.path(), "bad.json", "{not json")],
        // brute force beyond its cap
        "simulate --alg binary-search --gamma 0.5 --v 0.3 --T 64 --oracle bruteforce"
            .split(' ')
            .map(String::from)
            .collect(),
        // bound requested for ineligible parameters
        "simulate --alg prrfes --r 2 --kappa 1 --bound --gamma 0.8 --v 0.3 --T 8"
            .split(' ')
            .map(String::from)
            .collect(),
        vec!["verify".into(), "everything".into()],
        vec!["simulate".into(), "--no-such-flag".into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(pricing_lab(&args).status.code(), Some(3), "{args:?}");
    }
}

#[test]
fn prrfes_grid_stays_within_bound() {
    let out = pricing_lab(&[
        "simulate", "--alg", "prrfes", "--kappa", "1", "--bound", "--gamma", "0.8",
        "--v-linspace", "0.1:0.9:9", "--T-pow2", "6:12",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = stdout(&out);
    assert_eq!(column(&csv, "r")[0], "11");
    let within = column(&csv, "within_bound");
    assert_eq!(within.len(), 63);
    assert!(within.iter().all(|w| w == "true"), "{csv}");
}

#[test]
fn plot_data_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.dat");
    let out = pricing_lab(&[
        "simulate", "--alg", "constant:0.25", "--gamma", "0.5", "--v", "0.5,1", "--T", "2",
        "--plot-data", plot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(plot).unwrap(), "# v=0.5\n2 0.5\n\n\n# v=1\n2 1.5\n");
}

#[test]
fn verify_reports_checks() {
    let out = pricing_lab(&["verify", "constants"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().all(|l| l.starts_with("CHECK ") && l.contains(" PASS")));
}

#[test]
fn text_subcommands() {
    let out = pricing_lab(&["bounds", "--gamma", "0.95", "--kappa", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["min_penalization_rounds", "59"]));
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["r_for_kappa", "72"]));

    let out = pricing_lab(&["optimize-kappa", "--gamma", "0.99"]);
    assert!(stdout(&out).contains("3.7057"));

    let out = pricing_lab(&["consistency", "--alg", "prrfes", "--r", "3", "--depth", "8"]);
    let text = stdout(&out);
    let wc = text.lines().find(|l| l.starts_with("WC ")).unwrap();
    let witness = wc.split_whitespace().nth(2).unwrap();
    assert!(witness.chars().all(|c| c == '0' || c == '1'));

    let out = pricing_lab(&[
        "trace", "--alg", "preprrfes", "--r", "2", "--buyer", "truthful", "--v", "0.6", "--gamma", "0.8", "--T", "40",
    ]);
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 41);
    assert!(text.contains("# regret "));
}
