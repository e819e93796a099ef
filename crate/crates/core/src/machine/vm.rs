//! Fuel-metered integer stack machine.
//!
//! One executed instruction is one step. Programs are verified at load
//! time (jump targets, register numbers, and a consistent stack height at
//! every address), so a loaded program can only stop by halting, running
//! out of fuel, or waiting on I/O.
//!
//! Assembly format: one instruction per line, `#` starts a comment,
//! `name:` defines a label. Binary operators pop `b` then `a` and push
//! `a op b`.
//!
//! | mnemonic      | stack effect           |
//! |---------------|------------------------|
//! | `PUSH n`      | → n                    |
//! | `READ`        | i → bit i of the input |
//! | `READ i`      | → bit i of the input   |
//! | `INLEN`       | → input length         |
//! | `ADD SUB MUL` | a b → a∘b (wrapping)   |
//! | `MOD`         | a b → a mod b (0 if b=0) |
//! | `EQ LT`       | a b → 1 or 0           |
//! | `JZ l` `JNZ l`| c →                    |
//! | `JMP l`       |                        |
//! | `DUP SWAP OVER POP` | the usual        |
//! | `LOAD r` `STORE r` | registers 0–15    |
//! | `SEND`        | m → (message out)      |
//! | `RECV`        | → message in (−1 when none) |
//! | `RAND`        | → next coin            |
//! | `HALT`        | v → (halts with v)     |

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tape::{CoinSource, Interrupt, NoCoins, PrefixCoins};

pub const STACK_LIMIT: usize = 256;
pub const REGISTERS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instr {
    Push(i64),
    Read(Option<usize>),
    InLen,
    Add,
    Sub,
    Mul,
    Mod,
    Eq,
    Lt,
    Jz(usize),
    Jnz(usize),
    Jmp(usize),
    Dup,
    Swap,
    Over,
    Pop,
    Load(usize),
    Store(usize),
    Send,
    Recv,
    Rand,
    Halt,
}

impl Instr {
    fn stack_effect(self) -> (usize, usize) {
        use Instr::*;
        match self {
            Push(_) | Read(Some(_)) | InLen | Load(_) | Recv | Rand => (0, 1),
            Read(None) => (1, 1),
            Add | Sub | Mul | Mod | Eq | Lt => (2, 1),
            Jz(_) | Jnz(_) | Pop | Store(_) | Send | Halt => (1, 0),
            Jmp(_) => (0, 0),
            Dup => (1, 2),
            Swap => (2, 2),
            Over => (2, 3),
        }
    }
}

/// A verified instruction sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    instrs: Vec<Instr>,
    lines: Vec<usize>,
}

impl Program {
    /// Verifies `instrs`; `lines` maps each instruction to its source line
    /// for error messages (defaults to the instruction number).
    pub fn new(instrs: Vec<Instr>) -> Result<Self> {
        let lines = (1..=instrs.len()).collect();
        Self::with_lines(instrs, lines)
    }

    fn with_lines(instrs: Vec<Instr>, lines: Vec<usize>) -> Result<Self> {
        let program = Program { instrs, lines };
        program.verify()?;
        Ok(program)
    }

    pub fn parse(source: &str) -> Result<Self> {
        Assembler::default().assemble(source)
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    fn err(&self, pc: usize, msg: impl Into<String>) -> Error {
        Error::Program {
            line: self.lines.get(pc).copied().unwrap_or(pc + 1),
            msg: msg.into(),
        }
    }

    fn verify(&self) -> Result<()> {
        if self.instrs.is_empty() {
            return Err(Error::Program {
                line: 0,
                msg: "empty program".into(),
            });
        }
        let n = self.instrs.len();
        for (pc, ins) in self.instrs.iter().enumerate() {
            match *ins {
                Instr::Jz(t) | Instr::Jnz(t) | Instr::Jmp(t) if t >= n => {
                    return Err(self.err(pc, format!("jump target {t} out of range")));
                }
                Instr::Load(r) | Instr::Store(r) if r >= REGISTERS => {
                    return Err(self.err(pc, format!("register {r} out of range")));
                }
                _ => {}
            }
        }
        // Stack heights must agree on every path into an address.
        let mut height: Vec<Option<usize>> = vec![None; n];
        height[0] = Some(0);
        let mut work = vec![0usize];
        while let Some(pc) = work.pop() {
            let h = height[pc].expect("queued addresses have heights");
            let ins = self.instrs[pc];
            let (pops, pushes) = ins.stack_effect();
            if h < pops {
                return Err(self.err(pc, "stack underflow"));
            }
            let next_h = h - pops + pushes;
            if next_h > STACK_LIMIT {
                return Err(self.err(pc, "stack overflow"));
            }
            let succs: Vec<usize> = match ins {
                Instr::Halt => vec![],
                Instr::Jmp(t) => vec![t],
                Instr::Jz(t) | Instr::Jnz(t) => vec![pc + 1, t],
                _ => vec![pc + 1],
            };
            for succ in succs {
                if succ >= n {
                    return Err(self.err(pc, "execution can run past the last instruction"));
                }
                match height[succ] {
                    None => {
                        height[succ] = Some(next_h);
                        work.push(succ);
                    }
                    Some(existing) if existing != next_h => {
                        return Err(self.err(
                            succ,
                            format!("inconsistent stack height ({existing} vs {next_h})"),
                        ));
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct Assembler {
    labels: HashMap<String, usize>,
}

impl Assembler {
    fn assemble(mut self, source: &str) -> Result<Program> {
        // First pass: labels and raw instruction text.
        let mut raw: Vec<(usize, String, Option<String>)> = Vec::new();
        for (lineno, line) in source.lines().enumerate() {
            let lineno = lineno + 1;
            let mut text = line.split('#').next().unwrap_or("").trim();
            while let Some((label, rest)) = text.split_once(':') {
                let label = label.trim();
                if label.is_empty()
                    || !label
                        .chars()
                        .all(|c| c.is_alphanumeric() || c == '_' || c == '-')
                {
                    return Err(Error::Program {
                        line: lineno,
                        msg: format!("bad label `{label}`"),
                    });
                }
                if self.labels.insert(label.to_string(), raw.len()).is_some() {
                    return Err(Error::Program {
                        line: lineno,
                        msg: format!("duplicate label `{label}`"),
                    });
                }
                text = rest.trim();
            }
            if text.is_empty() {
                continue;
            }
            let mut parts = text.split_whitespace();
            let op = parts.next().unwrap().to_ascii_uppercase();
            let arg = parts.next().map(str::to_string);
            if parts.next().is_some() {
                return Err(Error::Program {
                    line: lineno,
                    msg: "too many operands".into(),
                });
            }
            raw.push((lineno, op, arg));
        }
        let mut instrs = Vec::with_capacity(raw.len());
        let mut lines = Vec::with_capacity(raw.len());
        for (lineno, op, arg) in raw {
            instrs.push(self.instr(lineno, &op, arg.as_deref())?);
            lines.push(lineno);
        }
        if instrs.is_empty() {
            return Err(Error::Program {
                line: 0,
                msg: "empty program".into(),
            });
        }
        Program::with_lines(instrs, lines)
    }

    fn instr(&self, line: usize, op: &str, arg: Option<&str>) -> Result<Instr> {
        let err = |msg: String| Error::Program { line, msg };
        let int = |a: Option<&str>| -> Result<i64> {
            let a = a.ok_or_else(|| err(format!("`{op}` needs an operand")))?;
            a.parse::<i64>()
                .map_err(|_| err(format!("`{a}` is not an integer")))
        };
        let index = |a: Option<&str>| -> Result<usize> {
            let v = int(a)?;
            usize::try_from(v).map_err(|_| err(format!("negative operand {v}")))
        };
        let target = |a: Option<&str>| -> Result<usize> {
            let a = a.ok_or_else(|| err(format!("`{op}` needs a target")))?;
            if let Some(&t) = self.labels.get(a) {
                return Ok(t);
            }
            a.parse::<usize>()
                .map_err(|_| err(format!("unknown label `{a}`")))
        };
        let none = |i: Instr| -> Result<Instr> {
            match arg {
                None => Ok(i),
                Some(a) => Err(err(format!("`{op}` takes no operand, got `{a}`"))),
            }
        };
        Ok(match op {
            "PUSH" => Instr::Push(int(arg)?),
            "READ" => match arg {
                None => Instr::Read(None),
                Some(_) => Instr::Read(Some(index(arg)?)),
            },
            "INLEN" => none(Instr::InLen)?,
            "ADD" => none(Instr::Add)?,
            "SUB" => none(Instr::Sub)?,
            "MUL" => none(Instr::Mul)?,
            "MOD" => none(Instr::Mod)?,
            "EQ" => none(Instr::Eq)?,
            "LT" => none(Instr::Lt)?,
            "JZ" => Instr::Jz(target(arg)?),
            "JNZ" => Instr::Jnz(target(arg)?),
            "JMP" => Instr::Jmp(target(arg)?),
            "DUP" => none(Instr::Dup)?,
            "SWAP" => none(Instr::Swap)?,
            "OVER" => none(Instr::Over)?,
            "POP" => none(Instr::Pop)?,
            "LOAD" => Instr::Load(index(arg)?),
            "STORE" => Instr::Store(index(arg)?),
            "SEND" => none(Instr::Send)?,
            "RECV" => none(Instr::Recv)?,
            "RAND" => none(Instr::Rand)?,
            "HALT" => none(Instr::Halt)?,
            other => return Err(err(format!("unknown mnemonic `{other}`"))),
        })
    }
}

/// A program together with its step budget.
#[derive(Debug, Clone)]
pub struct MeteredProgram {
    pub program: Arc<Program>,
    pub fuel: u64,
}

impl MeteredProgram {
    pub fn new(program: Program, fuel: u64) -> Self {
        MeteredProgram {
            program: Arc::new(program),
            fuel,
        }
    }

    pub fn parse(source: &str, fuel: u64) -> Result<Self> {
        Ok(Self::new(Program::parse(source)?, fuel))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmOutcome {
    Halted(i64),
    FuelExhausted,
    /// Stopped on I/O that the caller asked to pause on.
    Suspended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionResult {
    pub outcome: VmOutcome,
    /// Instructions executed.
    pub steps: u64,
    /// I/O events performed: input reads, sends, receives and coin reads.
    pub trace_len: u64,
    /// Length of the input prefix read (one past the largest index read,
    /// or the whole input once `INLEN` runs).
    pub input_read: usize,
}

/// Message and coin channel for a running program.
pub trait VmIo {
    /// Returns `false` to suspend after the send.
    fn send(&mut self, value: i64) -> Result<bool, Interrupt>;
    /// `None` suspends before the receive completes.
    fn recv(&mut self) -> Result<Option<i64>, Interrupt>;
    fn coin(&mut self) -> Result<bool, Interrupt>;
}

/// No partner: sends vanish, receives see silence (−1), coins come from an
/// optional tape.
pub struct Isolated<C> {
    coins: C,
    next_coin: usize,
}

impl<C: CoinSource> VmIo for Isolated<C> {
    fn send(&mut self, _value: i64) -> Result<bool, Interrupt> {
        Ok(true)
    }

    fn recv(&mut self) -> Result<Option<i64>, Interrupt> {
        Ok(Some(-1))
    }

    fn coin(&mut self) -> Result<bool, Interrupt> {
        let b = self.coins.coin(self.next_coin)?;
        self.next_coin += 1;
        Ok(b)
    }
}

/// Deterministic small-step execution until halt, fuel exhaustion or a
/// suspending I/O call.
pub fn run(
    program: &Program,
    input: &[bool],
    fuel: u64,
    io: &mut dyn VmIo,
) -> Result<ExecutionResult, Interrupt> {
    let mut stack: Vec<i64> = Vec::with_capacity(16);
    let mut regs = [0i64; REGISTERS];
    let mut pc = 0usize;
    let mut steps = 0u64;
    let mut trace = 0u64;
    let mut read = 0usize;
    let done = |outcome, steps, trace, read| ExecutionResult {
        outcome,
        steps,
        trace_len: trace,
        input_read: read,
    };
    macro_rules! pop {
        () => {
            stack
                .pop()
                .expect("stack heights are verified at load time")
        };
    }
    loop {
        if steps >= fuel {
            return Ok(done(VmOutcome::FuelExhausted, steps, trace, read));
        }
        let ins = program.instrs[pc];
        steps += 1;
        pc += 1;
        match ins {
            Instr::Push(v) => stack.push(v),
            Instr::Read(imm) => {
                let i = match imm {
                    Some(i) => i as i64,
                    None => pop!(),
                };
                trace += 1;
                let bit = usize::try_from(i).ok().and_then(|i| {
                    read = read.max((i + 1).min(input.len()));
                    input.get(i).copied()
                });
                stack.push(bit.map_or(0, i64::from));
            }
            Instr::InLen => {
                read = input.len();
                stack.push(input.len() as i64);
            }
            Instr::Add | Instr::Sub | Instr::Mul | Instr::Mod | Instr::Eq | Instr::Lt => {
                let b = pop!();
                let a = pop!();
                stack.push(match ins {
                    Instr::Add => a.wrapping_add(b),
                    Instr::Sub => a.wrapping_sub(b),
                    Instr::Mul => a.wrapping_mul(b),
                    Instr::Mod => {
                        if b == 0 {
                            0
                        } else {
                            a.wrapping_rem_euclid(b)
                        }
                    }
                    Instr::Eq => i64::from(a == b),
                    _ => i64::from(a < b),
                });
            }
            Instr::Jz(t) => {
                if pop!() == 0 {
                    pc = t;
                }
            }
            Instr::Jnz(t) => {
                if pop!() != 0 {
                    pc = t;
                }
            }
            Instr::Jmp(t) => pc = t,
            Instr::Dup => {
                let a = *stack.last().expect("verified");
                stack.push(a);
            }
            Instr::Swap => {
                let n = stack.len();
                stack.swap(n - 1, n - 2);
            }
            Instr::Over => {
                let a = stack[stack.len() - 2];
                stack.push(a);
            }
            Instr::Pop => {
                pop!();
            }
            Instr::Load(r) => stack.push(regs[r]),
            Instr::Store(r) => regs[r] = pop!(),
            Instr::Send => {
                let v = pop!();
                trace += 1;
                if !io.send(v)? {
                    return Ok(done(VmOutcome::Suspended, steps, trace, read));
                }
            }
            Instr::Recv => match io.recv()? {
                Some(v) => {
                    trace += 1;
                    stack.push(v);
                }
                None => {
                    // The receive did not happen; it is not counted.
                    return Ok(done(VmOutcome::Suspended, steps - 1, trace, read));
                }
            },
            Instr::Rand => {
                trace += 1;
                let b = io.coin()?;
                stack.push(i64::from(b));
            }
            Instr::Halt => {
                let v = pop!();
                return Ok(done(VmOutcome::Halted(v), steps, trace, read));
            }
        }
    }
}

/// Runs a program with no conversation partner and no random tape.
pub fn vm_execute(program: &MeteredProgram, input: &[bool]) -> Result<ExecutionResult> {
    let mut io = Isolated {
        coins: NoCoins,
        next_coin: 0,
    };
    run(&program.program, input, program.fuel, &mut io).map_err(Interrupt::into_error)
}

/// Runs a program in isolation, drawing coins from `tape`.
pub fn vm_execute_with_tape(
    program: &MeteredProgram,
    input: &[bool],
    tape: &[bool],
) -> Result<ExecutionResult> {
    let mut io = Isolated {
        coins: PrefixCoins::new(tape, 0),
        next_coin: 0,
    };
    run(&program.program, input, program.fuel, &mut io).map_err(Interrupt::into_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::parse_bits;
    use proptest::prelude::*;

    const PARITY: &str = "
        READ 0
        READ 1
        ADD
        READ 2
        ADD
        READ 3
        ADD
        PUSH 2
        MOD          # 1 = odd
        HALT
    ";

    #[test]
    fn parity_of_1011_by_hand_trace() {
        // Stack trace: 1 | 1 0 | 1 | 1 1 | 2 | 2 1 | 3 | 3 2 | 1 -> halt(1).
        let p = MeteredProgram::parse(PARITY, 100).unwrap();
        let r = vm_execute(&p, &parse_bits("1011").unwrap()).unwrap();
        assert_eq!(r.outcome, VmOutcome::Halted(1));
        assert_eq!(r.steps, 10);
        assert!(r.steps <= 20);
        assert_eq!(r.input_read, 4);
        assert_eq!(r.trace_len, 4);
    }

    #[test]
    fn infinite_loop_exhausts_fuel() {
        let p = MeteredProgram::parse("top: JMP top", 100).unwrap();
        let r = vm_execute(&p, &[]).unwrap();
        assert_eq!(r.outcome, VmOutcome::FuelExhausted);
        assert_eq!(r.steps, 100);
    }

    #[test]
    fn zero_fuel_runs_nothing() {
        let p = MeteredProgram::parse(PARITY, 0).unwrap();
        let r = vm_execute(&p, &parse_bits("1011").unwrap()).unwrap();
        assert_eq!(r.outcome, VmOutcome::FuelExhausted);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn load_time_errors_carry_line_numbers() {
        let e = Program::parse("PUSH 1\n\nJMP nowhere").unwrap_err();
        assert_eq!(
            e,
            Error::Program {
                line: 3,
                msg: "unknown label `nowhere`".into()
            }
        );
        let e = Program::parse("PUSH 1\nJMP 9").unwrap_err();
        assert!(matches!(e, Error::Program { line: 2, .. }), "{e}");
        let e = Program::parse("ADD\nHALT").unwrap_err();
        assert!(e.to_string().contains("underflow"), "{e}");
        let e = Program::parse("PUSH 1").unwrap_err();
        assert!(e.to_string().contains("past the last"), "{e}");
        let e = Program::parse("top: PUSH 1\nJMP top").unwrap_err();
        assert!(e.to_string().contains("inconsistent"), "{e}");
        let e = Program::parse("FROB").unwrap_err();
        assert!(e.to_string().contains("unknown mnemonic"), "{e}");
        assert!(Program::parse("# nothing\n").is_err());
    }

    #[test]
    fn mod_by_zero_and_out_of_range_reads_are_total() {
        let p = MeteredProgram::parse("PUSH 7\nPUSH 0\nMOD\nREAD 99\nADD\nHALT", 10).unwrap();
        assert_eq!(
            vm_execute(&p, &[true]).unwrap().outcome,
            VmOutcome::Halted(0)
        );
    }

    #[test]
    fn coins_need_a_tape() {
        let p = MeteredProgram::parse("RAND\nHALT", 10).unwrap();
        assert_eq!(
            vm_execute(&p, &[]).unwrap_err(),
            Error::InsufficientRandomPrefix
        );
        let r = vm_execute_with_tape(&p, &[], &[true]).unwrap();
        assert_eq!(r.outcome, VmOutcome::Halted(1));
    }

    fn arb_program() -> impl Strategy<Value = Program> {
        // Straight-line arithmetic followed by a counted loop.
        (prop::collection::vec((0u8..6, -5i64..6), 1..12), 0i64..6).prop_filter_map(
            "verifiable",
            |(ops, loops)| {
                let mut src = String::from("PUSH 0\n");
                for (op, v) in ops {
                    let line = match op {
                        0 => format!("PUSH {v}\nADD"),
                        1 => format!("PUSH {v}\nMUL"),
                        2 => format!("READ {}\nADD", v.unsigned_abs()),
                        3 => format!("PUSH {v}\nSUB"),
                        4 => "DUP\nADD".to_string(),
                        _ => format!("PUSH {v}\nMOD"),
                    };
                    src.push_str(&line);
                    src.push('\n');
                }
                src.push_str(&format!(
                    "PUSH {loops}\nSTORE 1\nloop: LOAD 1\nJZ end\nLOAD 1\nPUSH 1\nSUB\nSTORE 1\nPUSH 3\nADD\nJMP loop\nend: HALT\n"
                ));
                Program::parse(&src).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn execution_is_pure_and_fuel_monotone(p in arb_program(), input in prop::collection::vec(any::<bool>(), 0..6), extra in 0u64..50) {
            let m = MeteredProgram { program: Arc::new(p), fuel: 500 };
            let a = vm_execute(&m, &input).unwrap();
            let b = vm_execute(&m, &input).unwrap();
            prop_assert_eq!(a, b);
            if let VmOutcome::Halted(_) = a.outcome {
                for fuel in [a.steps, a.steps + extra] {
                    let again = vm_execute(&MeteredProgram { fuel, ..m.clone() }, &input).unwrap();
                    prop_assert_eq!(again, a);
                }
                if a.steps > 0 {
                    let short = vm_execute(&MeteredProgram { fuel: a.steps - 1, ..m.clone() }, &input).unwrap();
                    prop_assert_eq!(short.outcome, VmOutcome::FuelExhausted);
                }
            }
        }
    }
}
