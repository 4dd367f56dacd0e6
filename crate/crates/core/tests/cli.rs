use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn specshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specshare")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const CERTIFIED: &str = "scheme.kind = dynamic
utility.family = cobb_douglas
traffic.op1.p_high = 0.25
scheme.trade_mhz = auto
scheme.balance_cap_mhz = 50
scheme.punishment_T = auto
sim.horizon = 300
sim.replications = 8
";

#[test]
fn simulate_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "s.txt", CERTIFIED);
    let out = dir.path().join("out");
    let o = specshare(&["simulate", &file, "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("slot,operator,traffic,width_mhz,utility,balance_mhz,phase"));
    assert_eq!(trace.lines().count(), 1 + 300 * 2);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some("operator,scheme,mean_revenue,std_err"));
    assert!(summary.lines().nth(1).unwrap().starts_with("1,dynamic,"));

    // same inputs, same bytes
    let again = dir.path().join("again");
    specshare(&["simulate", &file, "--out", again.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(fs::read(out.join("trace.csv")).unwrap(), fs::read(again.join("trace.csv")).unwrap());
    assert_eq!(fs::read(out.join("summary.csv")).unwrap(), fs::read(again.join("summary.csv")).unwrap());
}

#[test]
fn zero_replications_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "s.txt", "scheme.kind = full\n");
    let o = specshare(&["simulate", &file, "--out", dir.path().to_str().unwrap(), "--replications", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.txt", CERTIFIED);
    let o = specshare(&["verify", &good]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("state,deviation,gain,loss,profitable"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",false")));

    let myopic = write(
        dir.path(),
        "myopic.txt",
        "scheme.kind = dynamic\nscenario.delta = 0\nutility.family = cobb_douglas\ntraffic.op1.p_high = 0.25\n\
         scheme.trade_mhz = 10\nscheme.balance_cap_mhz = 50\nscheme.punishment_T = 5\n",
    );
    let o = specshare(&["verify", &myopic, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let findings = fs::read_to_string(dir.path().join("findings.csv")).unwrap();
    assert!(findings.lines().any(|l| l.ends_with(",true")));

    let short = write(dir.path(), "short.txt", "scheme.kind = static\nscheme.punishment_T = 2\n");
    let o = specshare(&["verify", &short]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("op1;coop;lambda=1,detectable,"));

    let bad = write(dir.path(), "bad.txt", "scheme.kind = full\nscenario.size = 3\n");
    let o = specshare(&["verify", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("line 2"));
}

#[test]
fn figure_commands() {
    let o = specshare(&["fig2", "--grid", "40,100,400"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "cost,n_star\n40,2\n100,1\n400,0\n");

    let o = specshare(&["fig3", "--grid", "30"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p_db,revenue_full,revenue_static,revenue_dynamic"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[3] > row[2] && row[2] > row[1]);

    let dir = tempfile::tempdir().unwrap();
    let o = specshare(&["fig4", "--grid", "40:120:3", "--trade", "37", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("fig4.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("balance_cap_mhz,dynamic_over_full_percent"));
    assert_eq!(text.lines().count(), 4);

    assert_eq!(specshare(&["fig2", "--grid", "1:2"]).status.code(), Some(2));
}
