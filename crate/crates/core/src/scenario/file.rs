//! TOML scenario files. Numbers are integers or fraction strings such as
//! `"2/3"`; decimals are rejected. Every identifier is resolved and every
//! machine checked here, so a loaded scenario cannot fail validation later.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;
use toml::Spanned;

use crate::conversation::{
    ConversationConfig, Informant, InteractiveEntry, InteractiveMachine, Msg, Silent,
    TableInformant,
};
use crate::decision::{
    bits_of, parse_bits, ActionIx, Bits, ComplexityUtility, ComputationalProblem, JointPrior,
    Labels, Machine, MachineSet, Outcome, StandardProblem, StateIx, TypeIx, UtilityTable,
};
use crate::error::{Error, Result};
use crate::info::Partition;
use crate::machine::{
    machine_from_program, BeliefTable, CellBlind, CellSwitch, MeteredProgram, ProgramAgent,
    ProgramInformant, StrategyTree, TreeNode,
};
use crate::scalar::{parse_fraction, Scalar};
use crate::scenario::{builtins, Command, ConversationSetup, Scenario, VociMode};
use crate::speedup::SpeedupFunction;
use crate::Exact;

/// An exact numeric literal: a TOML integer or a fraction string.
#[derive(Debug, Clone)]
struct Lit(String);

impl<'de> Deserialize<'de> for Lit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Lit;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer or a fraction string such as \"2/3\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Lit, E> {
                Ok(Lit(v.to_string()))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Lit, E> {
                Ok(Lit(v.to_string()))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Lit, E> {
                Err(E::custom(format!(
                    "decimal literal {v} is not allowed; write it as a fraction string \"p/q\""
                )))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Lit, E> {
                parse_fraction(v).map_err(E::custom)?;
                Ok(Lit(v.to_string()))
            }
        }
        d.deserialize_any(V)
    }
}

impl Lit {
    fn value(&self) -> Exact {
        parse_fraction(&self.0).expect("checked while parsing")
    }
}

/// Builtin parameters: integers, fractions or words.
#[derive(Debug, Clone)]
struct ParamLit(String);

impl<'de> Deserialize<'de> for ParamLit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ParamLit;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer or a string")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ParamLit, E> {
                Ok(ParamLit(v.to_string()))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ParamLit, E> {
                Ok(ParamLit(v.to_string()))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ParamLit, E> {
                Err(E::custom(format!(
                    "decimal literal {v} is not allowed; write it as a fraction string \"p/q\""
                )))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ParamLit, E> {
                Ok(ParamLit(v.to_string()))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpec {
    name: Option<String>,
    builtin: Option<Spanned<String>>,
    #[serde(default)]
    params: BTreeMap<String, ParamLit>,
    problem: Option<ProblemSpec>,
    #[serde(default)]
    machines: Vec<Spanned<MachineSpec>>,
    conversation: Option<ConversationSpec>,
    analysis: Option<Spanned<AnalysisSpec>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSpec {
    states: Vec<String>,
    types: Option<Vec<String>>,
    actions: Vec<String>,
    state_bits: Option<Vec<String>>,
    type_bits: Option<Vec<String>>,
    prior: Spanned<Vec<Spanned<PriorEntry>>>,
    utility: Spanned<Vec<Spanned<UtilityEntry>>>,
    /// u′ = u − charge·complexity.
    charge: Option<Lit>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorEntry {
    state: String,
    #[serde(rename = "type")]
    ty: Option<String>,
    mass: Lit,
}

/// Omitted keys range over the whole carrier; later entries win.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtilityEntry {
    state: Option<String>,
    #[serde(rename = "type")]
    ty: Option<String>,
    action: Option<String>,
    value: Lit,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeSpec {
    action: String,
    #[serde(default)]
    complexity: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntrySpec {
    state: Option<String>,
    #[serde(rename = "type")]
    ty: Option<String>,
    action: String,
    #[serde(default)]
    complexity: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineSpec {
    id: String,
    /// Constant machine.
    action: Option<String>,
    complexity: Option<u64>,
    /// Belief table.
    default: Option<OutcomeSpec>,
    entries: Option<Vec<Spanned<EntrySpec>>>,
    /// Metered program, from a file or inline.
    program: Option<String>,
    source: Option<String>,
    fuel: Option<u64>,
    deadline: Option<u64>,
    penalty: Option<u64>,
    /// Cell switch over earlier machines.
    cells: Option<Vec<String>>,
    null: Option<String>,
    read_cost: Option<u64>,
    /// `"blind"`: accepts the partition cell and ignores it.
    cell: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConversationSpec {
    informant: Spanned<InformantSpec>,
    tape: Option<usize>,
    rounds: Option<usize>,
    machines: Vec<Spanned<InteractiveSpec>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InformantSpec {
    kind: String,
    #[serde(default)]
    alphabet: Vec<String>,
    #[serde(default)]
    replies: Vec<Spanned<ReplySpec>>,
    program: Option<String>,
    source: Option<String>,
    fuel: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplySpec {
    state: String,
    message: String,
    reply: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InteractiveSpec {
    id: String,
    tree: Option<NodeSpec>,
    program: Option<String>,
    source: Option<String>,
    fuel: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeSpec {
    #[serde(default)]
    cost: u64,
    act: Option<String>,
    send: Option<String>,
    replies: Option<BTreeMap<String, NodeSpec>>,
    silent: Option<Box<NodeSpec>>,
    coin: Option<usize>,
    branches: Option<Vec<NodeSpec>>,
    read: Option<usize>,
    zero: Option<Box<NodeSpec>>,
    one: Option<Box<NodeSpec>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisSpec {
    command: Option<String>,
    partition: Option<Vec<Vec<String>>>,
    p: Option<String>,
    mode: Option<String>,
    expected: Option<Lit>,
}

pub(crate) fn load_file(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse(&text, &base).map_err(|e| match e {
        Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Attaches the line of a span to validation errors.
struct Ctx<'a> {
    text: &'a str,
    base: PathBuf,
}

impl Ctx<'_> {
    fn line(&self, span: &std::ops::Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].matches('\n').count() + 1
    }

    fn err(&self, span: &std::ops::Range<usize>, msg: impl fmt::Display) -> Error {
        Error::Scenario(format!("line {}: {msg}", self.line(span)))
    }

    fn at<T>(&self, span: &std::ops::Range<usize>, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::Scenario(_) => e,
            other => self.err(span, other),
        })
    }

    fn program_source(
        &self,
        span: &std::ops::Range<usize>,
        file: &Option<String>,
        inline: &Option<String>,
    ) -> Result<String> {
        match (file, inline) {
            (Some(f), None) => std::fs::read_to_string(self.base.join(f))
                .map_err(|e| self.err(span, format!("program file `{f}`: {e}"))),
            (None, Some(s)) => Ok(s.clone()),
            _ => Err(self.err(span, "give exactly one of `program` and `source`")),
        }
    }
}

fn find(labels: &Labels, kind: &str, name: &str) -> std::result::Result<usize, String> {
    labels
        .find(name)
        .ok_or_else(|| format!("unknown {kind} `{name}`"))
}

/// All indices of `labels`, or the one named.
fn select(
    labels: &Labels,
    kind: &str,
    name: &Option<String>,
) -> std::result::Result<Vec<usize>, String> {
    match name {
        None => Ok((0..labels.len()).collect()),
        Some(n) => Ok(vec![find(labels, kind, n)?]),
    }
}

fn encodings(given: &Option<Vec<String>>, n: usize, kind: &str) -> Result<Vec<Bits>> {
    match given {
        Some(list) => {
            if list.len() != n {
                return Err(Error::Scenario(format!(
                    "{kind}_bits lists {} encodings for {n} {kind}s",
                    list.len()
                )));
            }
            list.iter().map(|b| parse_bits(b)).collect()
        }
        None => {
            let width = (usize::BITS - n.saturating_sub(1).leading_zeros()) as usize;
            Ok((0..n).map(|i| bits_of(i as u64, width)).collect())
        }
    }
}

pub(crate) fn parse(text: &str, base: &Path) -> Result<Scenario> {
    let spec: FileSpec =
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string().trim_end().to_string()))?;
    let ctx = Ctx {
        text,
        base: base.to_path_buf(),
    };
    let mut scenario = match (&spec.builtin, &spec.problem) {
        (Some(_), Some(_)) => {
            return Err(Error::Scenario(
                "a scenario names a builtin or declares a problem, not both".into(),
            ))
        }
        (Some(name), None) => {
            if !spec.machines.is_empty() || spec.conversation.is_some() {
                return Err(ctx.err(&name.span(), "builtins bring their own machines"));
            }
            let params: Vec<(String, String)> = spec
                .params
                .iter()
                .map(|(k, v)| (k.clone(), v.0.clone()))
                .collect();
            ctx.at(&name.span(), builtins::builtin(name.get_ref(), &params))?
        }
        (None, Some(problem)) => {
            if !spec.params.is_empty() {
                return Err(Error::Scenario("[params] only applies to builtins".into()));
            }
            declared(&ctx, problem, &spec.machines, spec.conversation.as_ref())?
        }
        (None, None) => {
            return Err(Error::Scenario(
                "a scenario needs `builtin = \"...\"` or a [problem] table".into(),
            ))
        }
    };
    if let Some(name) = spec.name {
        scenario.name = name;
    }
    if let Some(analysis) = &spec.analysis {
        apply_analysis(&ctx, analysis, &mut scenario)?;
    }
    Ok(scenario)
}

fn apply_analysis(
    ctx: &Ctx,
    analysis: &Spanned<AnalysisSpec>,
    scenario: &mut Scenario,
) -> Result<()> {
    let span = analysis.span();
    let a = analysis.get_ref();
    if let Some(c) = &a.command {
        scenario.default_command = ctx.at(&span, c.parse())?;
    }
    if let Some(p) = &a.p {
        scenario.speedup = Some(ctx.at(&span, p.parse::<SpeedupFunction>())?);
    }
    if let Some(m) = &a.mode {
        scenario.voci_mode = ctx.at(&span, m.parse::<VociMode>())?;
    }
    if let Some(e) = &a.expected {
        scenario.expected = Some(e.value());
    }
    if let Some(cells) = &a.partition {
        let states = match (&scenario.problem, &scenario.standard) {
            (Some(p), _) => p.states.clone(),
            (None, Some(s)) => s.states.clone(),
            (None, None) => return Err(ctx.err(&span, "a partition needs a problem")),
        };
        let cells = cells
            .iter()
            .map(|cell| {
                cell.iter()
                    .map(|n| find(&states, "state", n).map(StateIx))
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| ctx.err(&span, e))?;
        let partition = ctx.at(&span, Partition::new(states.len(), cells))?;
        if let Some(p) = &scenario.problem {
            ctx.at(&span, partition.validate(&p.prior))?;
        }
        scenario.partition = Some(partition);
    }
    Ok(())
}

fn declared(
    ctx: &Ctx,
    spec: &ProblemSpec,
    machine_specs: &[Spanned<MachineSpec>],
    conversation: Option<&ConversationSpec>,
) -> Result<Scenario> {
    let states = Labels::named(spec.states.iter().cloned())
        .map_err(|e| Error::Scenario(format!("states: {e}")))?;
    let types = Labels::named(spec.types.clone().unwrap_or_else(|| vec!["t".into()]))
        .map_err(|e| Error::Scenario(format!("types: {e}")))?;
    let actions = Labels::named(spec.actions.iter().cloned())
        .map_err(|e| Error::Scenario(format!("actions: {e}")))?;
    if actions.is_empty() {
        return Err(Error::Scenario("empty action set".into()));
    }
    let (ns, nt, na) = (states.len(), types.len(), actions.len());
    let single_type = |ty: &Option<String>| -> std::result::Result<usize, String> {
        match ty {
            Some(n) => find(&types, "type", n),
            None if nt == 1 => Ok(0),
            None => Err("`type` is required when there are several types".into()),
        }
    };

    let mut entries = Vec::new();
    for e in spec.prior.get_ref() {
        let span = e.span();
        let p = e.get_ref();
        let s = find(&states, "state", &p.state).map_err(|m| ctx.err(&span, m))?;
        let t = single_type(&p.ty).map_err(|m| ctx.err(&span, m))?;
        entries.push((StateIx(s), TypeIx(t), p.mass.value()));
    }
    let prior = ctx.at(
        &spec.prior.span(),
        JointPrior::from_entries(ns, nt, entries),
    )?;

    let mut cells: Vec<Option<Exact>> = vec![None; ns * nt * na];
    for e in spec.utility.get_ref() {
        let span = e.span();
        let u = e.get_ref();
        let pick = |labels: &Labels, kind: &str, name: &Option<String>| {
            select(labels, kind, name).map_err(|m| ctx.err(&span, m))
        };
        let value = u.value.value();
        for s in pick(&states, "state", &u.state)? {
            for t in pick(&types, "type", &u.ty)? {
                for a in pick(&actions, "action", &u.action)? {
                    cells[(s * nt + t) * na + a] = Some(value.clone());
                }
            }
        }
    }
    if let Some(i) = cells.iter().position(Option::is_none) {
        let (s, t, a) = (i / (nt * na), (i / na) % nt, i % na);
        return Err(ctx.err(
            &spec.utility.span(),
            format!(
                "utility undefined for state `{}`, type `{}`, action `{}`",
                states.name(s),
                types.name(t),
                actions.name(a)
            ),
        ));
    }
    let table = UtilityTable::from_partial(ns, nt, na, cells)?;
    let charge = spec
        .charge
        .as_ref()
        .map_or_else(|| Exact::from_i64(0), Lit::value);
    let standard = StandardProblem::new(
        states.clone(),
        types.clone(),
        actions.clone(),
        prior.clone(),
        table.clone(),
    )?;
    let type_bits = encodings(&spec.type_bits, nt, "type")?;
    let state_bits = encodings(&spec.state_bits, ns, "state")?;

    let mut machines = MachineSet::new();
    for m in machine_specs {
        let span = m.span();
        let machine = build_machine(
            ctx,
            &span,
            m.get_ref(),
            &machines,
            &type_bits,
            &states,
            &types,
            &actions,
        )?;
        check_total(ctx, &span, machine.as_ref(), &prior, na)?;
        ctx.at(
            &span,
            machines.push(m.get_ref().id.clone(), machine).map(|_| ()),
        )?;
    }

    let problem = ComputationalProblem::new(
        states.clone(),
        types,
        actions.clone(),
        prior,
        ComplexityUtility::linear_charge(table, charge),
        machines,
    )?
    .with_type_bits(type_bits)?
    .with_state_bits(state_bits.clone())?;

    let mut scenario = Scenario::empty("scenario", Command::Eval);
    if let Some(conv) = conversation {
        scenario.conversation = Some(conversation_setup(
            ctx,
            conv,
            &states,
            &state_bits,
            &actions,
        )?);
    }
    scenario.standard = Some(standard);
    scenario.problem = Some(problem);
    Ok(scenario)
}

/// Every support point must have an outcome with a valid action.
fn check_total(
    ctx: &Ctx,
    span: &std::ops::Range<usize>,
    machine: &dyn Machine,
    prior: &JointPrior<Exact>,
    n_actions: usize,
) -> Result<()> {
    for (s, t, _) in prior.iter() {
        let o = machine.outcome(s, t).map_err(|e| ctx.err(span, e))?;
        if o.action.0 >= n_actions {
            return Err(ctx.err(
                span,
                Error::InvalidAction {
                    value: o.action.0 as i64,
                    actions: n_actions,
                },
            ));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_machine(
    ctx: &Ctx,
    span: &std::ops::Range<usize>,
    m: &MachineSpec,
    earlier: &MachineSet,
    type_bits: &[Bits],
    states: &Labels,
    types: &Labels,
    actions: &Labels,
) -> Result<Arc<dyn Machine>> {
    let act = |name: &str| find(actions, "action", name).map_err(|e| ctx.err(span, e));
    let is_program = m.program.is_some() || m.source.is_some();
    let is_table = m.default.is_some() || m.entries.is_some();
    let is_switch = m.cells.is_some();
    let kinds = [m.action.is_some(), is_table, is_program, is_switch];
    if kinds.iter().filter(|&&k| k).count() != 1 {
        return Err(ctx.err(
            span,
            format!(
                "machine `{}` must be exactly one of: constant (`action`), table (`default`/`entries`), program, cell switch (`cells`)",
                m.id
            ),
        ));
    }
    let machine: Arc<dyn Machine> = if let Some(a) = &m.action {
        let o = Outcome::new(ActionIx(act(a)?), m.complexity.unwrap_or(0));
        Arc::new(BeliefTable::constant(o))
    } else if is_table {
        let mut table = BeliefTable::new();
        if let Some(d) = &m.default {
            table = table.with_default(Outcome::new(ActionIx(act(&d.action)?), d.complexity));
        }
        for e in m.entries.iter().flatten() {
            let espan = e.span();
            let e = e.get_ref();
            let a = find(actions, "action", &e.action).map_err(|m| ctx.err(&espan, m))?;
            let ss = select(states, "state", &e.state).map_err(|m| ctx.err(&espan, m))?;
            let ts = select(types, "type", &e.ty).map_err(|m| ctx.err(&espan, m))?;
            for &s in &ss {
                for &t in &ts {
                    table.insert(
                        StateIx(s),
                        TypeIx(t),
                        Outcome::new(ActionIx(a), e.complexity),
                    );
                }
            }
        }
        Arc::new(table)
    } else if is_program {
        let source = ctx.program_source(span, &m.program, &m.source)?;
        let fuel = m
            .fuel
            .ok_or_else(|| ctx.err(span, "program machines need `fuel`"))?;
        let program = ctx.at(span, MeteredProgram::parse(&source, fuel))?;
        let default = match &m.default {
            Some(d) => act(&d.action)?,
            None => 0,
        };
        Arc::new(ctx.at(
            span,
            machine_from_program(
                program,
                m.deadline.unwrap_or(fuel),
                ActionIx(default),
                m.penalty.unwrap_or(0),
                type_bits.to_vec(),
            ),
        )?)
    } else {
        let lookup = |id: &str| -> Result<Arc<dyn Machine>> {
            let ix = earlier.find(id).map_err(|_| {
                ctx.err(
                    span,
                    format!("cell switch refers to undeclared machine `{id}`"),
                )
            })?;
            Ok(earlier.get(ix).expect("found").machine.clone())
        };
        let per_cell = m
            .cells
            .iter()
            .flatten()
            .map(|id| lookup(id))
            .collect::<Result<Vec<_>>>()?;
        let on_null = match &m.null {
            Some(id) => lookup(id)?,
            None => return Err(ctx.err(span, "cell switch needs a `null` machine")),
        };
        Arc::new(CellSwitch {
            per_cell,
            on_null,
            read_cost: m.read_cost.unwrap_or(0),
        })
    };
    match m.cell.as_deref() {
        None => Ok(machine),
        Some("blind") if !is_switch => Ok(Arc::new(CellBlind(machine))),
        Some(other) => Err(ctx.err(span, format!("unsupported cell mode `{other}`"))),
    }
}

fn conversation_setup(
    ctx: &Ctx,
    spec: &ConversationSpec,
    states: &Labels,
    state_bits: &[Bits],
    actions: &Labels,
) -> Result<ConversationSetup> {
    let ispan = spec.informant.span();
    let inf = spec.informant.get_ref();
    let informant: Arc<dyn Informant> = match inf.kind.as_str() {
        "silent" => Arc::new(Silent),
        "table" => {
            let mut replies = BTreeMap::new();
            for r in &inf.replies {
                let rspan = r.span();
                let r = r.get_ref();
                let s = find(states, "state", &r.state).map_err(|m| ctx.err(&rspan, m))?;
                if !inf.alphabet.contains(&r.reply) {
                    return Err(ctx.err(&rspan, Error::Alphabet(r.reply.clone())));
                }
                replies.insert((state_bits[s].clone(), r.message.clone()), r.reply.clone());
            }
            Arc::new(TableInformant {
                alphabet: inf.alphabet.clone(),
                replies,
            })
        }
        "program" => {
            let source = ctx.program_source(&ispan, &inf.program, &inf.source)?;
            let fuel = inf
                .fuel
                .ok_or_else(|| ctx.err(&ispan, "program informants need `fuel`"))?;
            Arc::new(ProgramInformant {
                program: ctx.at(&ispan, MeteredProgram::parse(&source, fuel))?,
                alphabet: inf.alphabet.clone(),
            })
        }
        other => {
            return Err(ctx.err(
                &ispan,
                format!("unknown informant kind `{other}`; expected silent, table or program"),
            ))
        }
    };
    let mut machines: Vec<InteractiveEntry> = Vec::new();
    for m in &spec.machines {
        let span = m.span();
        let m = m.get_ref();
        if machines.iter().any(|e| e.id == m.id) {
            return Err(ctx.err(&span, Error::DuplicateId(m.id.clone())));
        }
        let machine: Arc<dyn InteractiveMachine> = match (&m.tree, &m.program, &m.source) {
            (Some(tree), None, None) => {
                let root = node(ctx, &span, tree, actions)?;
                let tree = ctx.at(&span, StrategyTree::new(root))?;
                if !informant.is_silent() {
                    ctx.at(&span, tree.validate_alphabet(informant.alphabet()))?;
                }
                Arc::new(tree)
            }
            (None, _, _) => {
                let source = ctx.program_source(&span, &m.program, &m.source)?;
                let fuel = m
                    .fuel
                    .ok_or_else(|| ctx.err(&span, "program machines need `fuel`"))?;
                Arc::new(ProgramAgent {
                    program: ctx.at(&span, MeteredProgram::parse(&source, fuel))?,
                })
            }
            _ => return Err(ctx.err(&span, "give either a `tree` or a program")),
        };
        machines.push(InteractiveEntry::new(m.id.clone(), machine));
    }
    if machines.is_empty() {
        return Err(ctx.err(&ispan, Error::EmptyMachineSet));
    }
    let defaults = ConversationConfig::default();
    Ok(ConversationSetup {
        informant,
        machines,
        config: ConversationConfig {
            tape_len: spec.tape.unwrap_or(defaults.tape_len),
            round_bound: spec.rounds.unwrap_or(defaults.round_bound),
        },
    })
}

fn node(
    ctx: &Ctx,
    span: &std::ops::Range<usize>,
    n: &NodeSpec,
    actions: &Labels,
) -> Result<TreeNode> {
    let go = |c: &NodeSpec| node(ctx, span, c, actions);
    let boxed = |c: &Option<Box<NodeSpec>>, what: &str| -> Result<Box<TreeNode>> {
        match c {
            Some(c) => Ok(Box::new(go(c)?)),
            None => Err(ctx.err(span, format!("tree node is missing `{what}`"))),
        }
    };
    let forms = [
        n.act.is_some(),
        n.send.is_some(),
        n.coin.is_some(),
        n.read.is_some(),
    ];
    if forms.iter().filter(|&&f| f).count() != 1 {
        return Err(ctx.err(
            span,
            "each tree node is exactly one of `act`, `send`, `coin`, `read`",
        ));
    }
    if let Some(a) = &n.act {
        let a = find(actions, "action", a).map_err(|m| ctx.err(span, m))?;
        return Ok(TreeNode::act(a, n.cost));
    }
    if let Some(message) = &n.send {
        let mut replies: BTreeMap<Msg, TreeNode> = BTreeMap::new();
        for (k, c) in n.replies.iter().flatten() {
            replies.insert(k.clone(), go(c)?);
        }
        let silent = match &n.silent {
            Some(c) => Some(Box::new(go(c)?)),
            None => None,
        };
        return Ok(TreeNode::Send {
            message: message.clone(),
            cost: n.cost,
            replies,
            silent,
        });
    }
    if let Some(bits) = n.coin {
        let branches = n
            .branches
            .iter()
            .flatten()
            .map(go)
            .collect::<Result<Vec<_>>>()?;
        return Ok(TreeNode::Coin {
            bits,
            cost: n.cost,
            branches,
        });
    }
    let index = n.read.expect("one form is present");
    Ok(TreeNode::ReadType {
        index,
        cost: n.cost,
        zero: boxed(&n.zero, "zero")?,
        one: boxed(&n.one, "one")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::frac;

    const STOCK: &str = r#"
name = "stocks"

[problem]
states = ["s1", "s2"]
actions = ["stock", "bond"]
prior = [
  { state = "s1", mass = "2/3" },
  { state = "s2", mass = "1/3" },
]
utility = [
  { action = "bond", value = 1 },
  { state = "s1", action = "stock", value = 3 },
  { state = "s2", action = "stock", value = -4 },
]

[[machines]]
id = "stock"
action = "stock"

[[machines]]
id = "bond"
action = "bond"

[analysis]
command = "voi"
partition = [["s1"], ["s2"]]
expected = "4/3"
"#;

    fn load(text: &str) -> Result<Scenario> {
        parse(text, Path::new("."))
    }

    #[test]
    fn a_declared_scenario_loads() {
        let s = load(STOCK).unwrap();
        assert_eq!(s.name, "stocks");
        assert_eq!(s.default_command, Command::Voi);
        assert_eq!(s.expected, Some(frac(4, 3)));
        let p = s.problem.unwrap();
        assert_eq!(p.machines.len(), 2);
        assert_eq!(p.prior.mass(StateIx(0), TypeIx(0)), frac(2, 3));
        assert_eq!(s.partition.unwrap().len(), 2);
    }

    #[test]
    fn prior_mass_errors_carry_the_total_and_a_line() {
        let text = STOCK.replace("\"1/3\"", "\"7/30\"");
        let err = load(&text).unwrap_err().to_string();
        assert!(err.contains("prior mass 9/10 ≠ 1"), "{err}");
        assert!(err.contains("line 7"), "{err}");
    }

    #[test]
    fn decimals_are_rejected() {
        let err = load(&STOCK.replace("\"2/3\"", "0.6667"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("decimal"), "{err}");
        let err = load(&STOCK.replace("\"2/3\"", "\"0.6667\""))
            .unwrap_err()
            .to_string();
        assert!(err.contains("decimal"), "{err}");
    }

    #[test]
    fn unknown_identifiers_are_reported_with_their_line() {
        let err = load(&STOCK.replace("state = \"s2\", action", "state = \"s3\", action"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("unknown state `s3`"), "{err}");
        assert!(err.contains("line 14"), "{err}");
        let err = load(&STOCK.replace(
            "action = \"bond\"\n\n[analysis]",
            "action = \"gold\"\n\n[analysis]",
        ))
        .unwrap_err()
        .to_string();
        assert!(err.contains("unknown action `gold`"), "{err}");
    }

    #[test]
    fn incomplete_utility_is_rejected() {
        let text = STOCK.replace("  { action = \"bond\", value = 1 },\n", "");
        let err = load(&text).unwrap_err().to_string();
        assert!(err.contains("utility undefined for state `s1`"), "{err}");
    }

    #[test]
    fn partial_tables_fail_at_load_time() {
        let text = STOCK.replace(
            "id = \"bond\"\naction = \"bond\"",
            "id = \"bond\"\nentries = [{ state = \"s1\", action = \"bond\" }]",
        );
        let err = load(&text).unwrap_err().to_string();
        assert!(err.contains("missing table entry"), "{err}");
    }

    #[test]
    fn builtins_can_be_referenced_with_parameters() {
        let s = load("builtin = \"safe\"\n[params]\nB = 8\nK = 4\n[analysis]\np = \"identity\"\n")
            .unwrap();
        assert_eq!(s.name, "safe");
        assert!(s.speedup.unwrap().is_identity());
        assert_eq!(s.problem.unwrap().states.len(), 256);
        let err = load("builtin = \"nope\"\n").unwrap_err().to_string();
        assert!(err.contains("stock-bond"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = load(&STOCK.replace("name =", "nmae ="))
            .unwrap_err()
            .to_string();
        assert!(err.contains("nmae"), "{err}");
    }

    #[test]
    fn conversations_with_trees_load() {
        let text = r#"
[problem]
states = ["lo", "hi"]
actions = ["small", "big"]
prior = [{ state = "lo", mass = "1/2" }, { state = "hi", mass = "1/2" }]
utility = [
  { value = 0 },
  { state = "lo", action = "small", value = 1 },
  { state = "hi", action = "big", value = 1 },
]

[conversation]
informant = { kind = "table", alphabet = ["yes", "no"], replies = [
  { state = "lo", message = "big?", reply = "no" },
  { state = "hi", message = "big?", reply = "yes" },
] }
rounds = 2

[[conversation.machines]]
id = "ask"
tree = { send = "big?", cost = 1, replies = { yes = { act = "big" }, no = { act = "small" } }, silent = { act = "small" } }

[[conversation.machines]]
id = "small"
tree = { act = "small" }
"#;
        let s = load(text).unwrap();
        let conv = s.conversation.unwrap();
        assert_eq!(conv.machines.len(), 2);
        assert_eq!(conv.config.round_bound, 2);
        let missing = text.replace(", no = { act = \"small\" }", "");
        let err = load(&missing).unwrap_err().to_string();
        assert!(err.contains("no branch for reply `no`"), "{err}");
    }
}
