use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

static COUNTER: AtomicUsize = AtomicUsize::new(0);

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "detbundle-cli-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detbundle")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scalar(kind: &str, re: f64) -> String {
    format!(r#"{{"kind":"{kind}","n":1,"entries":[[[{re},0]]]}}"#)
}

#[test]
fn fdet_identity() {
    let id = scratch("id.json", r#"{"kind":"block_operator","n":2,"entries":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#);
    let o = run(&["fdet", id.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "det=1,0\n");
}

#[test]
fn cocycle_from_files() {
    let t = scratch("t.json", &scalar("block_operator", 0.0));
    let a = scratch("a.json", &scalar("trace_class", 1.0));
    let b = scratch("b.json", &scalar("trace_class", 2.0));
    let c = scratch("c.json", &scalar("trace_class", -0.5));
    let o = run(&["cocycle", t.to_str().unwrap(), a.to_str().unwrap(), b.to_str().unwrap(), c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    let x: f64 = line.trim().strip_prefix("defect=").unwrap().parse().unwrap();
    assert!(x < 1e-10);
}

#[test]
fn fiber_of_rank_one_kernel() {
    let t = scratch("t.json", &scalar("block_operator", 0.0));
    let germ = scratch(
        "g.json",
        r#"{"kind":"section_germ","anchor":{"kind":"trace_class","n":1,"entries":[[[2,0]]]},"value":[0.5,0]}"#,
    );
    let o = run(&["fiber", t.to_str().unwrap(), germ.to_str().unwrap()]);
    assert_eq!(stdout(&o), "dim=1 coefficient=1,0 canonical=1,0\n");
}

#[test]
fn souriau_and_maslov_on_lines() {
    let x = scratch("x.json", r#"{"kind":"lagrangian_frame","n":1,"columns":[[1,0]]}"#);
    let y = scratch("y.json", r#"{"kind":"lagrangian_frame","n":1,"columns":[[0,1]]}"#);
    let o = run(&["souriau", x.to_str().unwrap(), y.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("dim_ker_q=0 dim_ker_p=0 dim_intersection=0 dim_cointersection=0"));
    let o = run(&["souriau", x.to_str().unwrap(), x.to_str().unwrap()]);
    assert!(stdout(&o).contains("dim_ker_q=1 dim_ker_p=1 dim_intersection=1"));

    let frames: Vec<String> = (0..=16)
        .map(|i| {
            let a = std::f64::consts::PI * i as f64 / 16.0;
            format!(r#"{{"kind":"lagrangian_frame","n":1,"columns":[[{},{}]]}}"#, a.cos(), a.sin())
        })
        .collect();
    let path = scratch("p.json", &format!(r#"{{"kind":"lagrangian_path","closed":true,"frames":[{}]}}"#, frames.join(",")));
    let o = run(&["maslov", x.to_str().unwrap(), path.to_str().unwrap()]);
    assert_eq!(stdout(&o), "index=1\n");
}

#[test]
fn prop5_worked_instance() {
    let x = scratch("x.json", r#"{"kind":"lagrangian_frame","n":1,"columns":[[1,0]]}"#);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let d = scratch("d.json", &format!(r#"{{"kind":"lagrangian_frame","n":1,"columns":[[{s},{s}]]}}"#));
    let y = scratch("y.json", r#"{"kind":"lagrangian_frame","n":1,"columns":[[0,1]]}"#);
    let o = run(&["prop5", x.to_str().unwrap(), d.to_str().unwrap(), y.to_str().unwrap(), "--mode", "real"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    let terms: Vec<f64> = line.split_whitespace().next().unwrap()["terms=".len()..]
        .split(',')
        .map(|t| t.parse().unwrap())
        .collect();
    assert!(terms.iter().all(|t| (t - 2.0).abs() < 1e-12), "{line}");
}

#[test]
fn chern_and_holonomy_builtins() {
    let o = run(&["chern", "--family", "sf_suspension", "--grid", "32", "48", "--m", "12"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    assert!(line.starts_with("c1=1 ") || line.starts_with("c1=-1 "), "{line}");

    let spec = scratch("f.json", r#"{"kind":"family","name":"hopf_selfadjoint","grid":[24,40]}"#);
    let o = run(&["chern", spec.to_str().unwrap(), "--selector", "quillen"]);
    assert!(stdout(&o).starts_with("c1=0 "));

    let o = run(&["holonomy", "--family", "sf_suspension"]);
    assert_eq!(stdout(&o), "holonomy=-1,0 spectral_flow=1 patches=2\n");
    let o = run(&["holonomy", "--family", "hopf_selfadjoint"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn csv_only_on_success() {
    let dir = std::env::temp_dir().join(format!("detbundle-csv-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let good = dir.join("good.csv");
    let o = run(&["chern", "--family", "sf_suspension", "--emit-csv", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&good).unwrap();
    assert!(text.starts_with("patch_i,patch_j,param_index,phase\n"));
    assert!(text.lines().count() > 1);

    let bad = dir.join("bad.csv");
    let o = run(&["chern", "--family", "sf_suspension", "--grid", "20", "32", "--m", "8", "--emit-csv", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!bad.exists());
}

#[test]
fn alpha_endpoints() {
    let a = scratch("a.json", r#"{"kind":"block_operator","n":2,"entries":[[[0.5,0],[0,1]],[[0,-1],[-2,0]]]}"#);
    let a = a.to_str().unwrap();
    assert!(stdout(&run(&["alpha", a, "--t", "0"])).contains("endpoint=identity"));
    assert!(stdout(&run(&["alpha", a, "--t", "1"])).contains("endpoint=minus_identity"));
    assert!(stdout(&run(&["alpha", a, "--t", "0.3", "--convention", "unitary"])).contains("endpoint=interior"));
    assert_eq!(run(&["alpha", a, "--t", "1.5"]).status.code(), Some(1));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let bad = scratch("bad.json", "{\n  \"kind\": \"block_operator\",\n  \"n\": 2,\n  \"entries\": [[[1,0]]]\n}\n");
    let o = run(&["fdet", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn sweep_output_is_deterministic() {
    let a = run(&["cocycle", "--seed", "11", "--trials", "50"]);
    let b = run(&["cocycle", "--seed", "11", "--trials", "50"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("trials=50 max_rel_defect="));
}
