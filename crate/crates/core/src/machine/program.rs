use std::sync::{Arc, OnceLock};

use crate::conversation::{Exchange, Informant, InteractiveMachine, Move, Msg, Response};
use crate::decision::{ActionIx, Bits, Machine, Outcome, StateIx, TypeIx};
use crate::error::{Error, Result};
use crate::machine::vm::{run, vm_execute, MeteredProgram, VmIo, VmOutcome};
use crate::tape::{CoinSource, Interrupt};

/// A program judged against a hard deadline: complexity is 0 when it halts
/// within `deadline` steps (inclusive) and `penalty` otherwise; when it
/// does not halt within its fuel it answers `default_action`.
///
/// The program reads the bit encoding of the type; states do not affect
/// it.
#[derive(Debug, Clone)]
pub struct ProgramMachine {
    program: MeteredProgram,
    deadline: u64,
    default_action: ActionIx,
    penalty: u64,
    inputs: Arc<Vec<Bits>>,
    cache: Arc<Vec<OnceLock<Result<Outcome>>>>,
}

pub fn machine_from_program(
    program: MeteredProgram,
    deadline: u64,
    default_action: ActionIx,
    penalty: u64,
    inputs: Vec<Bits>,
) -> Result<ProgramMachine> {
    if deadline > program.fuel {
        return Err(Error::Invalid(format!(
            "deadline {deadline} exceeds fuel {}",
            program.fuel
        )));
    }
    let cache = Arc::new((0..inputs.len()).map(|_| OnceLock::new()).collect());
    Ok(ProgramMachine {
        program,
        deadline,
        default_action,
        penalty,
        inputs: Arc::new(inputs),
        cache,
    })
}

impl ProgramMachine {
    pub fn program(&self) -> &MeteredProgram {
        &self.program
    }

    fn compute(&self, t: TypeIx) -> Result<Outcome> {
        let input = self
            .inputs
            .get(t.0)
            .ok_or_else(|| Error::UnknownType(t.0.to_string()))?;
        let r = vm_execute(&self.program, input)?;
        Ok(match r.outcome {
            VmOutcome::Halted(v) => {
                let action = usize::try_from(v).map_err(|_| Error::InvalidAction {
                    value: v,
                    actions: 0,
                })?;
                let c = if r.steps <= self.deadline {
                    0
                } else {
                    self.penalty
                };
                Outcome::new(ActionIx(action), c)
            }
            _ => Outcome::new(self.default_action, self.penalty),
        })
    }
}

impl Machine for ProgramMachine {
    fn outcome(&self, _s: StateIx, t: TypeIx) -> Result<Outcome> {
        match self.cache.get(t.0) {
            Some(slot) => slot.get_or_init(|| self.compute(t)).clone(),
            None => Err(Error::UnknownType(t.0.to_string())),
        }
    }
}

fn parse_message(m: &str) -> i64 {
    m.trim().parse().unwrap_or(-1)
}

struct AgentIo<'a> {
    history: &'a [Exchange],
    sends: usize,
    recvs: usize,
    pending: Option<i64>,
    coins: &'a mut dyn CoinSource,
    next_coin: usize,
}

impl VmIo for AgentIo<'_> {
    fn send(&mut self, value: i64) -> Result<bool, Interrupt> {
        match self.history.get(self.sends) {
            Some(ex) => {
                if ex.sent != value.to_string() {
                    return Err(Error::OffTree.into());
                }
                self.sends += 1;
                Ok(true)
            }
            None => {
                self.pending = Some(value);
                Ok(false)
            }
        }
    }

    fn recv(&mut self) -> Result<Option<i64>, Interrupt> {
        if self.recvs >= self.sends {
            return Ok(Some(-1));
        }
        let reply = &self.history[self.recvs].reply;
        self.recvs += 1;
        Ok(Some(reply.as_deref().map_or(-1, parse_message)))
    }

    fn coin(&mut self) -> Result<bool, Interrupt> {
        let b = self.coins.coin(self.next_coin)?;
        self.next_coin += 1;
        Ok(b)
    }
}

/// A program as the DM's interactive machine. `SEND` emits the decimal
/// rendering of a value; `RECV` reads the answer to the oldest unread
/// message (−1 for silence, non-numeric replies, or when nothing is
/// outstanding); `HALT v` acts with action `v`. Complexity is the number
/// of steps executed.
#[derive(Debug, Clone)]
pub struct ProgramAgent {
    pub program: MeteredProgram,
}

impl InteractiveMachine for ProgramAgent {
    fn respond(
        &self,
        input: &[bool],
        history: &[Exchange],
        coins: &mut dyn CoinSource,
    ) -> Result<Response, Interrupt> {
        let mut io = AgentIo {
            history,
            sends: 0,
            recvs: 0,
            pending: None,
            coins,
            next_coin: 0,
        };
        let r = run(&self.program.program, input, self.program.fuel, &mut io)?;
        let mv = match r.outcome {
            VmOutcome::Halted(v) => Move::Act(ActionIx(usize::try_from(v).map_err(|_| {
                Error::InvalidAction {
                    value: v,
                    actions: 0,
                }
            })?)),
            VmOutcome::Suspended => {
                Move::Send(io.pending.expect("suspends only on a new send").to_string())
            }
            VmOutcome::FuelExhausted => return Err(Error::NonHalting(self.program.fuel).into()),
        };
        if io.sends < history.len() {
            return Err(Error::OffTree.into());
        }
        Ok(Response {
            mv,
            complexity: r.steps,
            type_read: r.input_read,
        })
    }
}

struct InformantIo<'a> {
    received: &'a [Msg],
    recvs: usize,
    sends: usize,
    reply: Option<i64>,
    coins: &'a mut dyn CoinSource,
    next_coin: usize,
}

impl VmIo for InformantIo<'_> {
    fn send(&mut self, value: i64) -> Result<bool, Interrupt> {
        self.sends += 1;
        if self.sends == self.received.len() {
            self.reply = Some(value);
            return Ok(false);
        }
        Ok(true)
    }

    fn recv(&mut self) -> Result<Option<i64>, Interrupt> {
        let Some(m) = self.received.get(self.recvs) else {
            return Ok(None);
        };
        self.recvs += 1;
        Ok(Some(parse_message(m)))
    }

    fn coin(&mut self) -> Result<bool, Interrupt> {
        let b = self.coins.coin(self.next_coin)?;
        self.next_coin += 1;
        Ok(b)
    }
}

/// A program as the informant. It reads the state bits; its k-th `SEND`
/// answers the k-th message received. Waiting for a message that has not
/// arrived, halting or running out of fuel before answering is silence.
#[derive(Debug, Clone)]
pub struct ProgramInformant {
    pub program: MeteredProgram,
    pub alphabet: Vec<Msg>,
}

impl Informant for ProgramInformant {
    fn alphabet(&self) -> &[Msg] {
        &self.alphabet
    }

    fn reply(
        &self,
        state: &[bool],
        received: &[Msg],
        coins: &mut dyn CoinSource,
    ) -> Result<Option<Msg>, Interrupt> {
        let mut io = InformantIo {
            received,
            recvs: 0,
            sends: 0,
            reply: None,
            coins,
            next_coin: 0,
        };
        run(&self.program.program, state, self.program.fuel, &mut io)?;
        Ok(io.reply.map(|v| v.to_string()))
    }
}

/// Primality by trial division over the input bits (most significant
/// first): halts with 1 for primes and 0 otherwise.
pub const TRIAL_DIVISION: &str = "
    # n = value of the input bits, most significant first
    PUSH 0
    STORE 0
    PUSH 0
    STORE 1
bits:
    LOAD 1
    INLEN
    LT
    JZ test
    LOAD 0
    PUSH 2
    MUL
    LOAD 1
    READ
    ADD
    STORE 0
    LOAD 1
    PUSH 1
    ADD
    STORE 1
    JMP bits
test:
    LOAD 0
    PUSH 2
    LT
    JNZ composite
    PUSH 2
    STORE 2
loop:
    LOAD 2
    LOAD 2
    MUL
    LOAD 0
    SWAP
    LT
    JNZ prime       # n < d*d
    LOAD 0
    LOAD 2
    MOD
    JZ composite
    LOAD 2
    PUSH 1
    ADD
    STORE 2
    JMP loop
prime:
    PUSH 1
    HALT
composite:
    PUSH 0
    HALT
";
