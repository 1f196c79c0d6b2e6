use std::fs;
use std::process::{Command, Output};

fn meshcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn summary_goes_to_stdout_in_trial_order() {
    let o = meshcast(&["--gen", "path(12)", "--protocol", "faultless", "--trials", "4"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,protocol,n,D,p,x,k,completion_round,success");
    assert_eq!(lines.len(), 5);
    for (i, l) in lines[1..].iter().enumerate() {
        assert!(l.starts_with(&format!("{i},faultless,12,11,0,")), "{l}");
        assert!(l.ends_with(",true"));
    }
    assert!(!text.contains('\r'));
}

#[test]
fn same_seed_same_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = meshcast(&[
            "--gen", "rand(64,0.12)", "--protocol", "robust", "--p", "0.1", "--trials", "6", "--seed", "11",
            "--trace", "events", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let events = dir.path().join(name.replace(".csv", ".events.csv"));
        (fs::read_to_string(&out).unwrap(), fs::read_to_string(events).unwrap())
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    assert!(a.1.starts_with("trial,round,node,event,detail\n"));
}

#[test]
fn schedule_export_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("slots.json");
    let o = meshcast(&[
        "--gen", "grid(4,4)", "--protocol", "faultless", "--export-schedule", path.to_str().unwrap(), "--export-only",
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(path).unwrap();
    assert!(text.contains("\"protocol\": \"faultless\""));
    assert!(text.contains("\"slots\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&meshcast(&["--gen", "path(8)", "--protocol", "gossip"])), 2);
    assert_eq!(code(&meshcast(&["--gen", "path(8)", "--protocol", "decay", "--k", "3"])), 2);
    assert_eq!(code(&meshcast(&["--gen", "nonsense(1)"])), 2);
    assert_eq!(code(&meshcast(&["--protocol", "decay"])), 2);
    assert_eq!(code(&meshcast(&["--gen", "path(8)", "--trace", "events"])), 2);

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "3 1\n0 7\n").unwrap();
    assert_eq!(code(&meshcast(&["--graph", bad.to_str().unwrap()])), 2);

    assert_eq!(code(&meshcast(&["--gen", "rand(40,0.0001)", "--protocol", "faultless"])), 3);

    let missing = dir.path().join("no/such/dir/out.csv");
    assert_eq!(code(&meshcast(&["--gen", "path(8)", "--out", missing.to_str().unwrap()])), 4);
    let nofile = dir.path().join("absent.txt");
    assert_eq!(code(&meshcast(&["--graph", nofile.to_str().unwrap()])), 4);
}

#[test]
fn graph_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("ring.txt");
    fs::write(&g, "5 5\n0 1\n0 4\n1 2\n2 3\n3 4\n").unwrap();
    let o = meshcast(&["--graph", g.to_str().unwrap(), "--protocol", "decay", "--trials", "2"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("0,decay,5,2,"));
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = meshcast(&[
        "sweep", "--gen", "path(10)", "--gen", "star(10)", "--protocol", "decay", "--protocol", "multi", "--p", "0",
        "--p", "0.2", "--k", "1", "--k", "3", "--trials", "3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out).unwrap();
    // 2 graphs x 2 p x (decay + 2 multi cells)
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    assert!(text.starts_with("graph,protocol,n,D,p,x,k,trials,successes,failure_rate,"));
}

#[test]
fn lists_protocols() {
    let o = meshcast(&["protocols"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "decay\nfaultless\nmulti\nrobust\n");
}
