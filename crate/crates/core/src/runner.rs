//! Command dispatch: runs one analysis on a loaded scenario and builds its
//! report.

use rayon::prelude::*;

use crate::bias::{
    first_impressions_analysis, polarization_run, status_quo_analysis, AgentRun, Conclusion,
};
use crate::conversation::{
    conversation_expected_utility, conversation_outcomes, enumerate_conversations,
    sampled_expected_utility, transcript_lines, value_of_conversation, ConversationOutcome,
};
use crate::decision::{
    best_action, expected_utility_action, ActionIx, Evaluator, MachineIx, OutcomeDistribution,
};
use crate::error::{Error, Result};
use crate::info::{value_of_information, voci_postchoice, voci_precommit, Partition};
use crate::report::Report;
use crate::scalar::Scalar;
use crate::scenario::{BiasSetup, Command, Scenario, VociMode};
use crate::speedup::{value_of_p_speedup, value_of_p_speedup_dists, SpeedupFunction, SpeedupValue};
use crate::zk::{toy_family, VocBoundReport};
use crate::Exact;

/// Exit status of a successful run.
pub const EXIT_OK: i32 = 0;
/// Load or validation error.
pub const EXIT_INVALID: i32 = 1;
/// A check failed (zk-check).
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub mode: Option<VociMode>,
    pub p: Option<SpeedupFunction>,
    /// Restricts `eval` to one machine and makes its value the headline.
    pub machine: Option<String>,
    /// Sampled evaluation of conversations: tape pairs per support point.
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

pub fn exit_code(result: &Result<Report>) -> i32 {
    match result {
        Err(_) => EXIT_INVALID,
        Ok(r) if r.check == Some(false) => EXIT_CHECK_FAILED,
        Ok(_) => EXIT_OK,
    }
}

fn missing(scenario: &Scenario, what: &str, command: Command) -> Error {
    Error::Scenario(format!(
        "`{command}` needs {what}, which scenario `{}` does not declare",
        scenario.name
    ))
}

pub fn run(command: Command, scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    if opts.seed.is_some() && opts.samples.is_none() {
        return Err(Error::Invalid(
            "--seed only applies to sampled evaluation (--samples)".into(),
        ));
    }
    let mut report = Report::new(command, scenario.name.clone());
    for (k, v) in &scenario.params {
        report.input(k.clone(), v.clone());
    }
    match command {
        Command::Eval => eval(scenario, opts, &mut report, false)?,
        Command::Best => eval(scenario, opts, &mut report, true)?,
        Command::Voi => voi(scenario, &mut report)?,
        Command::Voci => voci(scenario, opts, &mut report)?,
        Command::Voc => voc(scenario, &mut report)?,
        Command::Speedup => speedup(scenario, opts, &mut report)?,
        Command::Bias => bias(scenario, &mut report)?,
        Command::ZkCheck => zk_check(scenario, &mut report)?,
    }
    Ok(report)
}

/// Expected utility of every candidate, named.
fn candidates(
    scenario: &Scenario,
    opts: &RunOptions,
    report: &mut Report,
    command: Command,
) -> Result<Vec<(String, Exact)>> {
    if let (Some(conv), Some(problem)) = (&scenario.conversation, &scenario.problem) {
        if let Some(n) = opts.samples {
            let seed = opts.seed.unwrap_or(0);
            report
                .input("samples", n.to_string())
                .input("seed", seed.to_string());
            return conv
                .machines
                .iter()
                .map(|m| {
                    let v = sampled_expected_utility(
                        problem,
                        conv.informant.as_ref(),
                        m.machine.as_ref(),
                        conv.config,
                        n,
                        seed,
                    )?;
                    Ok((m.id.clone(), v))
                })
                .collect();
        }
        return conv
            .machines
            .par_iter()
            .map(|m| {
                let v = conversation_expected_utility(
                    problem,
                    conv.informant.as_ref(),
                    m.machine.as_ref(),
                    conv.config,
                )?;
                Ok((m.id.clone(), v))
            })
            .collect();
    }
    if opts.samples.is_some() {
        return Err(missing(scenario, "a conversation", command));
    }
    if let (Some(rm), Some(problem)) = (&scenario.randomized, &scenario.problem) {
        return rm
            .ids
            .iter()
            .zip(&rm.dists)
            .map(|(id, d)| Ok((id.clone(), d.expected_utility(problem)?)))
            .collect();
    }
    if let Some(problem) = scenario.problem.as_ref().filter(|p| !p.machines.is_empty()) {
        let all = problem.machines.all();
        let sums = Evaluator::plain(problem).cell_sums_many(&all)?;
        return Ok(all
            .iter()
            .zip(sums)
            .map(|(&ix, s)| {
                let id = problem.machine(ix).expect("listed").id.clone();
                (id, s.into_iter().fold(Exact::from_i64(0), |a, b| a + b))
            })
            .collect());
    }
    if let Some(standard) = &scenario.standard {
        return (0..standard.actions.len())
            .map(|a| {
                let v = expected_utility_action(standard, ActionIx(a))?;
                Ok((standard.actions.name(a), v))
            })
            .collect();
    }
    Err(missing(scenario, "machines or actions", command))
}

fn eval(scenario: &Scenario, opts: &RunOptions, report: &mut Report, best: bool) -> Result<()> {
    let command = if best { Command::Best } else { Command::Eval };
    let values = candidates(scenario, opts, report, command)?;
    if values.is_empty() {
        return Err(Error::EmptyMachineSet);
    }
    if let Some(id) = &opts.machine {
        let (_, v) = values
            .iter()
            .find(|(m, _)| m == id)
            .ok_or_else(|| Error::UnknownMachine(id.clone()))?;
        report.input("machine", id.clone());
        report.value = Some(v.clone());
        report.row(format!("eu {id}"), v.clone());
        return Ok(());
    }
    if best {
        let mut top = 0;
        for (i, (_, v)) in values.iter().enumerate() {
            if *v > values[top].1 {
                top = i;
            }
        }
        report.value = Some(values[top].1.clone());
        report.row("best", values[top].0.clone());
        if scenario.conversation.is_none()
            && scenario.randomized.is_none()
            && scenario
                .problem
                .as_ref()
                .is_none_or(|p| p.machines.is_empty())
        {
            // Standard problems: cross-check against the action solver.
            let standard = scenario
                .standard
                .as_ref()
                .expect("candidates came from actions");
            let (_, v) = best_action(standard)?;
            debug_assert_eq!(v, values[top].1);
        }
        return Ok(());
    }
    for (id, v) in values {
        report.row(format!("eu {id}"), v);
    }
    Ok(())
}

fn render_partition(scenario: &Scenario, partition: &Partition) -> String {
    let labels = match (&scenario.problem, &scenario.standard) {
        (Some(p), _) => &p.states,
        (None, Some(s)) => &s.states,
        (None, None) => return format!("{} cells", partition.len()),
    };
    if partition.len() > 16 || labels.len() > 64 {
        return format!("{} cells over {} states", partition.len(), labels.len());
    }
    partition
        .cells()
        .iter()
        .map(|c| {
            let names: Vec<String> = c.iter().map(|s| labels.name(s.0)).collect();
            format!("{{{}}}", names.join(", "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn voi(scenario: &Scenario, report: &mut Report) -> Result<()> {
    let standard = scenario
        .standard
        .as_ref()
        .ok_or_else(|| missing(scenario, "a standard problem", Command::Voi))?;
    let partition = scenario
        .partition
        .as_ref()
        .ok_or_else(|| missing(scenario, "a partition", Command::Voi))?;
    report.input("partition", render_partition(scenario, partition));
    report.value = Some(value_of_information(standard, partition)?);
    Ok(())
}

fn voci(scenario: &Scenario, opts: &RunOptions, report: &mut Report) -> Result<()> {
    let problem = scenario
        .problem
        .as_ref()
        .ok_or_else(|| missing(scenario, "a computational problem", Command::Voci))?;
    let partition = scenario
        .partition
        .as_ref()
        .ok_or_else(|| missing(scenario, "a partition", Command::Voci))?;
    let mode = opts.mode.unwrap_or(scenario.voci_mode);
    report.input("partition", render_partition(scenario, partition));
    report.input(
        "mode",
        match mode {
            VociMode::Post => "post",
            VociMode::Pre => "pre",
            VociMode::Both => "both",
        },
    );
    let all = problem.machines.all();
    let id = |ix: MachineIx| problem.machine(ix).expect("listed").id.clone();
    let mut post_value = None;
    if matches!(mode, VociMode::Post | VociMode::Both) {
        let (v, choice) = voci_postchoice(problem, &all, partition)?;
        report.row("post", v.clone());
        report.row("uninformed best", id(choice.uninformed.0));
        report.row("uninformed eu", choice.uninformed.1);
        for (c, (m, eu)) in choice.per_cell.into_iter().enumerate() {
            report.row(format!("cell {c} best"), id(m));
            report.row(format!("cell {c} eu"), eu);
        }
        post_value = Some(v);
    }
    if matches!(mode, VociMode::Pre | VociMode::Both) {
        let aware: Vec<MachineIx> = all
            .iter()
            .copied()
            .filter(|&ix| problem.machine(ix).expect("listed").machine.is_cell_aware())
            .collect();
        if aware.is_empty() {
            return Err(Error::Scenario(format!(
                "pre-commit voci needs cell-aware machines; scenario `{}` has none",
                scenario.name
            )));
        }
        let v = voci_precommit(problem, &aware, partition)?;
        report.row("pre", v.clone());
        report.value = Some(v);
    }
    if let Some(v) = post_value {
        report.value = Some(v);
    }
    Ok(())
}

fn transcript(outcome: &ConversationOutcome, action: &str) -> Vec<String> {
    transcript_lines(outcome, action)
        .into_iter()
        .map(|r| format!("  | {}", r.join(" | ")))
        .collect()
}

fn voc(scenario: &Scenario, report: &mut Report) -> Result<()> {
    let (Some(conv), Some(problem)) = (&scenario.conversation, &scenario.problem) else {
        return Err(missing(scenario, "a conversation", Command::Voc));
    };
    report.input("tape", conv.config.tape_len.to_string());
    report.input("rounds", conv.config.round_bound.to_string());
    let v = value_of_conversation(
        problem,
        conv.informant.as_ref(),
        &conv.machines,
        conv.config,
    )?;
    let bi = &conv.machines[v.best_with_informant];
    let bs = &conv.machines[v.best_with_silence];
    report.value = Some(v.value.clone());
    report.row("best with informant", bi.id.clone());
    report.row(
        "eu with informant",
        v.with_informant[v.best_with_informant].clone(),
    );
    report.row("best with silence", bs.id.clone());
    report.row(
        "eu with silence",
        v.with_silence[v.best_with_silence].clone(),
    );
    // One conversation of the winner, at the first support point.
    if let Some((s, t, _)) = problem.prior.iter().next() {
        let branches = enumerate_conversations(
            conv.informant.as_ref(),
            bi.machine.as_ref(),
            &problem.state_bits[s.0],
            &problem.type_bits[t.0],
            conv.config,
        )?;
        if let Some(b) = branches.first() {
            report.notes.push(format!(
                "transcript of {} at state {}, type {}:",
                bi.id,
                problem.states.name(s.0),
                problem.types.name(t.0)
            ));
            let action = problem.actions.name(b.value.action.0);
            report.notes.extend(transcript(&b.value, &action));
        }
    }
    Ok(())
}

fn speedup(scenario: &Scenario, opts: &RunOptions, report: &mut Report) -> Result<()> {
    let p = opts
        .p
        .clone()
        .or_else(|| scenario.speedup.clone())
        .ok_or_else(|| missing(scenario, "a speedup function (--p)", Command::Speedup))?;
    p.validate()?;
    report.input("p", p.to_string());
    let problem = scenario
        .problem
        .as_ref()
        .ok_or_else(|| missing(scenario, "a computational problem", Command::Speedup))?;
    let (ids, value): (Vec<String>, SpeedupValue<Exact>) =
        if let Some(conv) = &scenario.conversation {
            let dists: Vec<OutcomeDistribution> = conv
                .machines
                .par_iter()
                .map(|m| {
                    conversation_outcomes(
                        problem,
                        conv.informant.as_ref(),
                        m.machine.as_ref(),
                        conv.config,
                    )
                })
                .collect::<Result<_>>()?;
            let ids = conv.machines.iter().map(|m| m.id.clone()).collect();
            (ids, value_of_p_speedup_dists(problem, &dists, &p)?)
        } else if let Some(rm) = &scenario.randomized {
            (
                rm.ids.clone(),
                value_of_p_speedup_dists(problem, &rm.dists, &p)?,
            )
        } else {
            let all = problem.machines.all();
            let ids = problem.machines.iter().map(|(_, e)| e.id.clone()).collect();
            (ids, value_of_p_speedup(problem, &all, &p)?)
        };
    report.value = Some(value.value.clone());
    report.row("original", value.original);
    report.row("best original", ids[value.best_original.0].clone());
    report.row("sped up", value.sped_up);
    report.row("best sped up", ids[value.best_sped_up.0].clone());
    Ok(())
}

fn conclusion(c: &Conclusion<Exact>) -> String {
    match c {
        Conclusion::One => "X=1".into(),
        Conclusion::Zero => "X=0".into(),
        Conclusion::Undecided(_) => "undecided".into(),
    }
}

fn agent_rows(report: &mut Report, name: &str, prior: &Exact, run: &AgentRun<Exact>) {
    report.row(format!("{name} prior"), prior.clone());
    report.row(format!("{name} conclusion"), conclusion(&run.conclusion));
    report.row(
        format!("{name} stop round"),
        run.stop_round
            .map_or_else(|| "none".to_string(), |r| r.to_string()),
    );
    for (i, p) in run.trail.iter().enumerate().skip(1) {
        report.row(format!("{name} posterior {i}"), p.clone());
    }
    report.row(format!("{name} cost"), run.cost.clone());
}

fn bias(scenario: &Scenario, report: &mut Report) -> Result<()> {
    let setup = scenario
        .bias
        .as_ref()
        .ok_or_else(|| missing(scenario, "a bias model", Command::Bias))?;
    match setup {
        BiasSetup::FirstImpressions(model) => {
            let r = first_impressions_analysis(model)?;
            for (m, v) in r.eu.iter().enumerate() {
                report.row(format!("eu({m})"), v.clone());
            }
            report.row("m*", r.m_star.to_string());
            report.value = Some(r.eu_star);
        }
        BiasSetup::Polarization { agents, evidence } => {
            let names: Vec<&str> = evidence.iter().map(|e| e.name.as_str()).collect();
            report.input("evidence", names.join(" "));
            let (ra, rb) = polarization_run(&agents[0], &agents[1], evidence)?;
            agent_rows(report, "a", &agents[0].prior, &ra);
            agent_rows(report, "b", &agents[1].prior, &rb);
            let opposite = matches!(
                (&ra.conclusion, &rb.conclusion),
                (Conclusion::One, Conclusion::Zero) | (Conclusion::Zero, Conclusion::One)
            );
            report.row("opposite conclusions", if opposite { "yes" } else { "no" });
            report.value = ra.trail.last().cloned();
        }
        BiasSetup::StatusQuo(inst) => {
            let r = status_quo_analysis(inst)?;
            for (j, v) in r.values.iter().enumerate() {
                report.row(format!("value(analyze {j})"), v.clone());
            }
            report.row("analyze count", r.analyze_count.to_string());
            report.row("expected value", r.expected_value);
            report.value = Some(r.keeps_status_quo);
        }
    }
    Ok(())
}

fn zk_check(scenario: &Scenario, report: &mut Report) -> Result<()> {
    let zk = scenario
        .zk
        .as_ref()
        .ok_or_else(|| missing(scenario, "zero-knowledge families", Command::ZkCheck))?;
    let seeds: Vec<u64> = (zk.seed..zk.seed.saturating_add(zk.count)).collect();
    let results: Vec<(u64, VocBoundReport<Exact>)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut toy = toy_family(seed)?;
            toy.config.rule = zk.rule;
            if let Some(m) = zk.inject {
                toy = toy.with_precision_violation(m)?;
            }
            Ok((seed, toy.check()?))
        })
        .collect::<Result<_>>()?;
    let mut passed = 0u64;
    for (seed, r) in &results {
        let key = |k: &str| format!("family {seed} {k}");
        if r.passed() {
            passed += 1;
        }
        for s in r.simulators.iter().filter(|s| !s.passed()) {
            let mut what = Vec::new();
            if !s.condition1_holds() {
                what.push("views differ".to_string());
            }
            if let Some(c) = s.condition2.iter().find(|c| !c.pass) {
                what.push(format!(
                    "composite cost {} exceeds p bound {} at tape {}",
                    c.composite,
                    c.bound
                        .map_or_else(|| "none".to_string(), |b| b.to_string()),
                    crate::decision::render_bits(&c.tape)
                ));
            }
            report.row(key(&format!("simulator {}", s.machine)), what.join("; "));
        }
        if let (Some(voc), Some(sp), Some(holds)) = (&r.voc, &r.speedup, r.inequality_holds) {
            report.row(key("voc"), voc.value.clone());
            report.row(key("speedup"), sp.value.clone());
            report.row(key("voc <= speedup"), if holds { "yes" } else { "no" });
        }
    }
    report.value = Some(Exact::from_u64(passed));
    report.row("families", results.len().to_string());
    report.row("passed", passed.to_string());
    report.check = Some(passed == results.len() as u64);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::frac;
    use crate::scenario::load_scenario;

    fn go(cmd: Command, name: &str, opts: RunOptions) -> Report {
        run(cmd, &load_scenario(name).unwrap(), &opts).unwrap()
    }

    #[test]
    fn stock_bond_values() {
        let r = go(Command::Voi, "stock-bond", RunOptions::default());
        assert_eq!(r.value, Some(frac(4, 3)));
        let r = go(Command::Eval, "stock-bond", RunOptions::default());
        assert_eq!(r.number("eu stock"), Some(&frac(2, 3)));
        assert_eq!(r.number("eu bond"), Some(&frac(1, 1)));
        let r = go(Command::Best, "stock-bond", RunOptions::default());
        assert_eq!(r.text("best"), Some("bond"));
    }

    #[test]
    fn missing_parts_are_validation_errors() {
        let s = load_scenario("stock-bond").unwrap();
        let r = run(Command::Voc, &s, &RunOptions::default());
        assert_eq!(exit_code(&r), EXIT_INVALID);
        let r = run(
            Command::Voci,
            &s,
            &RunOptions {
                mode: Some(VociMode::Pre),
                ..Default::default()
            },
        );
        assert_eq!(exit_code(&r), EXIT_INVALID);
        let seeded = RunOptions {
            seed: Some(3),
            ..Default::default()
        };
        assert_eq!(exit_code(&run(Command::Eval, &s, &seeded)), EXIT_INVALID);
    }

    #[test]
    fn guess_number_conversation() {
        let r = go(Command::Voc, "guess-number", RunOptions::default());
        assert_eq!(r.value, Some(frac(99, 1)));
        assert_eq!(r.text("best with informant"), Some("binary-search"));
        assert_eq!(r.number("eu with silence"), Some(&frac(1, 1)));
        let text = r.render();
        assert!(text.contains("| 1 | M | x>50?"), "{text}");
    }

    #[test]
    fn polarization_report_shows_both_agents() {
        let r = go(Command::Bias, "polarization", RunOptions::default());
        assert_eq!(r.text("a conclusion"), Some("X=0"));
        assert_eq!(r.text("b conclusion"), Some("X=1"));
        assert_eq!(r.text("opposite conclusions"), Some("yes"));
        assert_eq!(r.value, Some(frac(81, 956)));
    }

    #[test]
    fn speedup_needs_a_valid_function() {
        let s = load_scenario("stock-bond").unwrap();
        let bad = RunOptions {
            p: Some(SpeedupFunction::Linear { a: 0, b: 0 }),
            ..Default::default()
        };
        assert_eq!(exit_code(&run(Command::Speedup, &s, &bad)), EXIT_INVALID);
    }

    #[test]
    fn zk_check_flags_injected_violations() {
        let r = go(Command::ZkCheck, "zk-toy:seed=3", RunOptions::default());
        assert_eq!(r.check, Some(true));
        let s = load_scenario("zk-toy:seed=3,inject=0").unwrap();
        let r = run(Command::ZkCheck, &s, &RunOptions::default());
        assert_eq!(exit_code(&r), EXIT_CHECK_FAILED);
    }
}
