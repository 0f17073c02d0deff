use std::io::Write;
use std::process::{Command, Stdio};

use smtbv::Session;

fn run(session: &mut Session, script: &str) -> Vec<String> {
    session.interpret(script)
}

fn check(script: &str) -> String {
    let mut s = Session::default();
    let out = run(&mut s, script);
    assert!(!out.is_empty(), "no output for script:\n{script}");
    out.last().unwrap().clone()
}

#[test]
fn trivial_sat_unsat() {
    assert_eq!(check("(assert true) (check-sat)"), "sat");
    assert_eq!(check("(assert false) (check-sat)"), "unsat");
    assert_eq!(
        check("(assert (= #x05 (bvadd #x02 #x03))) (check-sat)"),
        "sat"
    );
    assert_eq!(check("(assert (= #x00 #x01)) (check-sat)"), "unsat");
}

#[test]
fn wide_addition_wraps() {
    // x + 1 = 0 forces x to be the all-ones 256-bit value.
    let mut s = Session::default();
    let out = run(
        &mut s,
        "(set-logic QF_ABV)\n\
         (declare-fun x () (_ BitVec 256))\n\
         (assert (= (bvadd x (_ bv1 256)) (_ bv0 256)))\n\
         (check-sat)\n\
         (get-value (x))",
    );
    assert_eq!(out[0], "sat");
    assert_eq!(out[1], format!("((x #x{}))", "f".repeat(64)));
}

#[test]
fn arithmetic_identities() {
    // Exhaustive-ish checks over 8-bit operands at a few interesting points.
    let cases: &[(u8, u8)] = &[
        (0, 0),
        (0, 1),
        (1, 0),
        (255, 1),
        (128, 2),
        (7, 3),
        (200, 100),
        (13, 13),
        (255, 255),
        (37, 0),
    ];
    for &(a, b) in cases {
        let script = format!(
            "(assert (= (bvadd #x{a:02x} #x{b:02x}) #x{add:02x}))\n\
             (assert (= (bvsub #x{a:02x} #x{b:02x}) #x{sub:02x}))\n\
             (assert (= (bvmul #x{a:02x} #x{b:02x}) #x{mul:02x}))\n\
             (assert (= (bvudiv #x{a:02x} #x{b:02x}) #x{div:02x}))\n\
             (assert (= (bvurem #x{a:02x} #x{b:02x}) #x{rem:02x}))\n\
             (check-sat)",
            add = a.wrapping_add(b),
            sub = a.wrapping_sub(b),
            mul = a.wrapping_mul(b),
            div = if b == 0 { 0xff } else { a / b },
            rem = if b == 0 { a } else { a % b },
        );
        assert_eq!(check(&script), "sat", "failed for a={a} b={b}");
    }
}

#[test]
fn comparisons_and_shifts() {
    for &(a, b) in &[(0u8, 0u8), (1, 2), (2, 1), (255, 0), (0x80, 0x7f), (5, 5)] {
        let sa = a as i8;
        let sb = b as i8;
        let assert_bool = |name: &str, expected: bool| {
            let t = format!("({name} #x{a:02x} #x{b:02x})");
            if expected {
                t
            } else {
                format!("(not {t})")
            }
        };
        let script = format!(
            "(assert {})\n(assert {})\n(assert {})\n(assert {})\n\
             (assert (= (bvshl #x{a:02x} #x{b:02x}) #x{shl:02x}))\n\
             (assert (= (bvlshr #x{a:02x} #x{b:02x}) #x{shr:02x}))\n\
             (assert (= (bvashr #x{a:02x} #x{b:02x}) #x{sar:02x}))\n\
             (check-sat)",
            assert_bool("bvult", a < b),
            assert_bool("bvule", a <= b),
            assert_bool("bvslt", sa < sb),
            assert_bool("bvsge", sa >= sb),
            shl = if b >= 8 { 0 } else { a << b },
            shr = if b >= 8 { 0 } else { a >> b },
            sar = if b >= 8 {
                if sa < 0 {
                    0xff
                } else {
                    0
                }
            } else {
                (sa >> b) as u8
            },
        );
        assert_eq!(check(&script), "sat", "failed for a={a} b={b}");
    }
}

#[test]
fn concat_extract_extend() {
    assert_eq!(
        check("(assert (= (concat #xab #xcd) #xabcd)) (check-sat)"),
        "sat"
    );
    assert_eq!(
        check("(assert (= ((_ extract 11 4) #xabcd) #xbc)) (check-sat)"),
        "sat"
    );
    assert_eq!(
        check("(assert (= ((_ zero_extend 8) #x9f) #x009f)) (check-sat)"),
        "sat"
    );
    assert_eq!(
        check("(assert (= ((_ sign_extend 8) #x9f) #xff9f)) (check-sat)"),
        "sat"
    );
}

#[test]
fn ite_and_let() {
    assert_eq!(
        check(
            "(declare-fun b () Bool)\n\
             (declare-fun x () (_ BitVec 8))\n\
             (assert (= x (ite b #x10 #x20)))\n\
             (assert (bvult x #x18))\n\
             (check-sat)"
        ),
        "sat"
    );
    assert_eq!(
        check(
            "(declare-fun x () (_ BitVec 8))\n\
             (assert (let ((y (bvadd x #x01))) (and (= y #x05) (= x #x04))))\n\
             (check-sat)"
        ),
        "sat"
    );
}

#[test]
fn uninterpreted_function_consistency() {
    // f(x) != f(y) with x = y must be unsat.
    assert_eq!(
        check(
            "(declare-fun f ((_ BitVec 8)) (_ BitVec 8))\n\
             (declare-fun x () (_ BitVec 8))\n\
             (declare-fun y () (_ BitVec 8))\n\
             (assert (= x y))\n\
             (assert (distinct (f x) (f y)))\n\
             (check-sat)"
        ),
        "unsat"
    );
    // Hash collisions are permitted: f(x) = f(y) with x != y is sat.
    assert_eq!(
        check(
            "(declare-fun f ((_ BitVec 8)) (_ BitVec 8))\n\
             (declare-fun x () (_ BitVec 8))\n\
             (declare-fun y () (_ BitVec 8))\n\
             (assert (distinct x y))\n\
             (assert (= (f x) (f y)))\n\
             (check-sat)"
        ),
        "sat"
    );
}

#[test]
fn get_value_on_applications() {
    let mut s = Session::default();
    let out = run(
        &mut s,
        "(declare-fun f ((_ BitVec 8)) (_ BitVec 8))\n\
         (declare-fun x () (_ BitVec 8))\n\
         (assert (= (f x) #x2a))\n\
         (assert (= x #x07))\n\
         (check-sat)\n\
         (get-value ((f x) x (bvadd x #x01)))",
    );
    assert_eq!(out[0], "sat");
    let values = out[1..].join("\n");
    assert!(values.contains("((f x) #x2a)"), "got: {values}");
    assert!(values.contains("(x #x07)"), "got: {values}");
    assert!(values.contains("((bvadd x #x01) #x08)"), "got: {values}");
}

#[test]
fn get_model_lists_all_declared() {
    let mut s = Session::default();
    let out = run(
        &mut s,
        "(declare-fun x () (_ BitVec 16))\n\
         (declare-fun unused () (_ BitVec 8))\n\
         (assert (= x #xbeef))\n\
         (check-sat)\n\
         (get-model)",
    );
    assert_eq!(out[0], "sat");
    let model = &out[1];
    assert!(model.contains("(define-fun x () (_ BitVec 16) #xbeef)"));
    assert!(model.contains("(define-fun unused () (_ BitVec 8) #x00)"));
}

#[test]
fn push_pop_scoping() {
    let mut s = Session::default();
    let out = run(
        &mut s,
        "(declare-fun x () (_ BitVec 8))\n\
         (assert (bvult x #x10))\n\
         (push 1)\n\
         (assert (bvugt x #x20))\n\
         (check-sat)\n\
         (pop 1)\n\
         (check-sat)",
    );
    assert_eq!(out, vec!["unsat", "sat"]);
}

#[test]
fn define_fun_macros() {
    assert_eq!(
        check(
            "(declare-fun x () (_ BitVec 8))\n\
             (define-fun t0 () (_ BitVec 8) (bvadd x #x01))\n\
             (define-fun t1 () (_ BitVec 8) (bvmul t0 #x02))\n\
             (assert (= t1 #x08))\n\
             (assert (= x #x03))\n\
             (check-sat)"
        ),
        "sat"
    );
}

#[test]
fn division_by_zero_follows_smtlib() {
    assert_eq!(
        check(
            "(declare-fun x () (_ BitVec 8))\n\
             (assert (= (bvudiv x #x00) #xff))\n\
             (assert (= (bvurem x #x00) x))\n\
             (check-sat)"
        ),
        "sat"
    );
}

#[test]
fn gate_limit_reports_unknown() {
    let mut s = Session::new(50);
    let out = run(
        &mut s,
        "(declare-fun x () (_ BitVec 64))\n\
         (declare-fun y () (_ BitVec 64))\n\
         (assert (= (bvmul x y) #x0000000000000009))\n\
         (check-sat)",
    );
    assert_eq!(out, vec!["unknown"]);
}

#[test]
fn errors_are_in_band() {
    let mut s = Session::default();
    let out = run(&mut s, "(assert (= missing #x01)) (check-sat)");
    assert!(out[0].starts_with("(error"), "got: {:?}", out);
    // The failed assert leaves no constraint behind.
    assert_eq!(out[1], "sat");
}

#[test]
fn subprocess_protocol() {
    let exe = env!("CARGO_BIN_EXE_smtbv");
    let mut child = Command::new(exe)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .expect("spawn solver");
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(
            b"(set-logic QF_ABV)\n\
              (declare-fun x () (_ BitVec 256))\n\
              (assert (= (bvadd x (_ bv1 256))\n\
                         (_ bv0 256)))\n\
              (check-sat)\n\
              (get-value (x))\n\
              (exit)\n",
        )
        .unwrap();
    let output = child.wait_with_output().expect("solver output");
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("sat"), "got: {text}");
    assert!(text.contains(&"f".repeat(64)), "got: {text}");
}
