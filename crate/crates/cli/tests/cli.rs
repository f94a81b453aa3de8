use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdp_product::format::{emit_graph, emit_program, emit_sign_matrix, parse_program};
use sdp_product::library::{Graph, SignMatrix};
use sdp_product::linalg::{SparseMatrix, SymMatrix};
use sdp_product::SdpProgram;

fn sdpprod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdpprod"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn put(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn trivial_program() -> SdpProgram {
    let mut p = SdpProgram::new(SymMatrix::identity(1));
    p.add_eq(SparseMatrix::identity(1), 1.0);
    p
}

fn primal_of(out: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix("primal "))
        .expect("primal line")
        .parse()
        .unwrap()
}

#[test]
fn solve_counterexample_prints_zero() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("ce.sdp");
    let o = sdpprod(&["generate", "counterexample", "-o", s(&file)]);
    assert!(o.status.success());
    let o = sdpprod(&["solve", s(&file)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("status optimal"));
    assert!(primal_of(&out).abs() <= 1e-6, "{out}");
}

#[test]
fn solve_trivial_program() {
    let dir = tempfile::tempdir().unwrap();
    let file = put(dir.path(), "t.sdp", &emit_program(&trivial_program()));
    let o = sdpprod(&["solve", s(&file), "--gap-tol", "1e-8"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((primal_of(&stdout(&o)) - 1.0).abs() <= 1e-6);
}

#[test]
fn malformed_file_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let file = put(dir.path(), "bad.sdp", "DIM 2\nOBJECTIVE\n0 1 oops\nEND\n");
    let o = sdpprod(&["solve", s(&file)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn non_optimal_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let g = put(dir.path(), "c5.txt", &emit_graph(&Graph::cycle(5)));
    let file = dir.path().join("c5.sdp");
    sdpprod(&["generate", "theta", s(&g), "-o", s(&file)]);
    let o = sdpprod(&["solve", s(&file), "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn check_reports_theorems() {
    let dir = tempfile::tempdir().unwrap();
    let m = put(
        dir.path(),
        "m.txt",
        &emit_sign_matrix(&SignMatrix::hadamard2()),
    );
    let g = put(dir.path(), "c5.txt", &emit_graph(&Graph::cycle(5)));
    let game = put(
        dir.path(),
        "xor.txt",
        &sdp_product::format::emit_game(&sdp_product::library::Game::xor()),
    );
    let cases = [
        ("gamma2inf", Some(&m), "Main applies; u = all-ones"),
        ("theta", Some(&g), "MS-1 applies (J PSD)"),
        ("fl-sigma", Some(&game), "None"),
        (
            "counterexample",
            None,
            "None (bipartite, but J is not in the non-negative span of B)",
        ),
    ];
    for (kind, input, headline) in cases {
        let prog = dir.path().join(format!("{kind}.sdp"));
        let mut args = vec!["generate", kind];
        if let Some(i) = input {
            args.push(s(i));
        }
        args.extend(["-o", s(&prog)]);
        assert!(sdpprod(&args).status.success(), "{kind}");
        let o = sdpprod(&["check", s(&prog)]);
        assert!(o.status.success());
        let first = stdout(&o).lines().next().unwrap().to_string();
        assert!(first.starts_with(headline), "{kind}: {first}");
    }
}

#[test]
fn product_of_counterexamples_has_anti_diagonal_objective() {
    let dir = tempfile::tempdir().unwrap();
    let ce = dir.path().join("ce.sdp");
    let out = dir.path().join("ce2.sdp");
    sdpprod(&["generate", "counterexample", "-o", s(&ce)]);
    let o = sdpprod(&["product", s(&ce), s(&ce), "-o", s(&out)]);
    assert!(o.status.success());
    let p = parse_program(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(p.dim, 4);
    for i in 0..4 {
        for j in 0..4 {
            let expect = if i + j == 3 { 1.0 } else { 0.0 };
            assert_eq!(p.objective.get(i, j), expect);
        }
    }
}

#[test]
fn product_of_trivial_programs_is_one_dimensional() {
    let dir = tempfile::tempdir().unwrap();
    let t = put(dir.path(), "t.sdp", &emit_program(&trivial_program()));
    let out = dir.path().join("tt.sdp");
    assert!(sdpprod(&["product", s(&t), s(&t), "-o", s(&out)])
        .status
        .success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text, emit_program(&trivial_program()));
}

#[test]
fn generate_censuses() {
    let dir = tempfile::tempdir().unwrap();
    let g = put(dir.path(), "c5.txt", "5\n0 1\n1 2\n2 3\n3 4\n4 0\n");
    let o = sdpprod(&["generate", "theta", s(&g)]);
    let p = parse_program(&stdout(&o)).unwrap();
    assert_eq!((p.dim, p.num_eq(), p.nonneg.len()), (5, 6, 0));

    let m = put(dir.path(), "one.txt", "1 1\n1\n");
    let o = sdpprod(&["generate", "gamma2inf", s(&m)]);
    let p = parse_program(&stdout(&o)).unwrap();
    assert_eq!((p.dim, p.num_eq()), (2, 1));
    // Two ordered cross-block masks, identical after symmetrization.
    assert_eq!(p.nonneg.len(), 2);
    assert_eq!(p.nonneg[0], p.nonneg[1]);
}

#[test]
fn generate_counterexample_verbatim() {
    let o = sdpprod(&["generate", "counterexample"]);
    let expected = "DIM 2\nOBJECTIVE\n0 1 -1.0000000000000000e0\nEND\nEQ 1.0000000000000000e0\n0 0 1.0000000000000000e0\n1 1 1.0000000000000000e0\nEND\nNONNEG\n0 1 5.0000000000000000e-1\nEND\nNONNEG\n0 1 5.0000000000000000e-1\nEND\n";
    assert_eq!(stdout(&o), expected);
}

#[test]
fn generate_requires_input_and_known_kind() {
    assert_eq!(sdpprod(&["generate", "theta"]).status.code(), Some(2));
    assert!(!sdpprod(&["generate", "nonsense"]).status.success());
}

#[test]
fn loose_suite_fails_and_exits_nonzero() {
    let o = sdpprod(&["suite", "--gap-tol", "1e-1", "--feas-tol", "1e-1"]);
    let out = stdout(&o);
    assert!(out.contains("FAIL"), "{out}");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn suite_passes_and_is_byte_identical() {
    let a = sdpprod(&["suite"]);
    let b = sdpprod(&["suite"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    let rows = stdout(&a).lines().filter(|l| l.ends_with("PASS")).count();
    assert!(rows >= 9);
}
