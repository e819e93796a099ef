//! Every builtin's default analysis reproduces its recorded value, and
//! reports are byte-for-byte reproducible.

use compdec::runner::{exit_code, run, RunOptions, EXIT_OK};
use compdec::scalar::frac;
use compdec::scenario::{load_scenario, safe_closed_form, Command, BUILTINS};

fn default_report(source: &str) -> compdec::report::Report {
    let s = load_scenario(source).unwrap();
    run(s.default_command, &s, &RunOptions::default()).unwrap()
}

#[test]
fn builtins_reproduce_their_recorded_values() {
    // The full-size safe instance is exercised by the acceptance suite.
    for name in BUILTINS.iter().filter(|n| **n != "safe") {
        let s = load_scenario(name).unwrap();
        let result = run(s.default_command, &s, &RunOptions::default());
        assert_eq!(exit_code(&result), EXIT_OK, "{name}");
        let report = result.unwrap();
        if let Some(expected) = &s.expected {
            assert_eq!(report.value.as_ref(), Some(expected), "{name}");
        }
    }
}

#[test]
fn recorded_values_match_hand_derivations() {
    let expect = [
        ("stock-bond", frac(4, 3)),
        ("primality", frac(10, 1)),
        ("guess-number", frac(99, 1)),
        ("first-impressions", frac(459, 512)),
        ("status-quo", frac(1, 2)),
    ];
    for (name, v) in expect {
        assert_eq!(load_scenario(name).unwrap().expected, Some(v), "{name}");
    }
}

#[test]
fn a_smaller_safe_matches_its_closed_form() {
    let form = safe_closed_form(12, 6, &frac(1000, 1)).unwrap();
    let r = default_report("safe:B=12,K=6");
    assert_eq!(r.value, Some(form.voci_post));
    let s = load_scenario("safe:B=12,K=6").unwrap();
    let opts = RunOptions {
        machine: Some("search-0".into()),
        ..RunOptions::default()
    };
    assert_eq!(
        run(Command::Eval, &s, &opts).unwrap().value,
        Some(form.eval)
    );
    let opts = RunOptions {
        p: Some("2x".parse().unwrap()),
        ..RunOptions::default()
    };
    assert_eq!(
        run(Command::Speedup, &s, &opts).unwrap().value,
        Some(form.speedup_2x)
    );
}

#[test]
fn reports_are_deterministic() {
    for name in [
        "stock-bond",
        "guess-number",
        "polarization",
        "zk-toy:count=3",
    ] {
        let a = default_report(name);
        let b = default_report(name);
        assert_eq!(a.render(), b.render(), "{name}");
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn sampled_conversations_repeat_under_a_seed() {
    let s = load_scenario("guess-number:N=16,rounds=4").unwrap();
    let opts = RunOptions {
        samples: Some(4),
        seed: Some(7),
        ..RunOptions::default()
    };
    let a = run(Command::Eval, &s, &opts).unwrap().render();
    let b = run(Command::Eval, &s, &opts).unwrap().render();
    assert_eq!(a, b);
    assert!(a.contains("input seed: 7"), "{a}");
    let unseeded = RunOptions {
        seed: Some(7),
        ..RunOptions::default()
    };
    assert!(run(Command::Eval, &s, &unseeded).is_err());
}

#[test]
fn commands_without_their_inputs_are_rejected() {
    let s = load_scenario("stock-bond").unwrap();
    for c in [Command::Voc, Command::Bias, Command::ZkCheck] {
        let r = run(c, &s, &RunOptions::default());
        assert_eq!(exit_code(&r), 1, "{c}");
    }
}
