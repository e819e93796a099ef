//! Finite random tapes and exact enumeration over them.
//!
//! Randomized machines read coins lazily. [`enumerate_tapes`] runs a
//! computation on growing tape prefixes, splitting whenever a coin beyond
//! the current prefix is requested. Each finished branch stands for every
//! full tape extending its prefix, so branch weights `2^-(prefix bits)` give
//! the exact uniform expectation over all `2^R` tapes per party.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::decision::Bits;
use crate::error::Error;

/// Whose tape a coin comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Informant,
    Machine,
}

impl Role {
    pub fn tape(self) -> usize {
        match self {
            Role::Informant => 0,
            Role::Machine => 1,
        }
    }
}

/// A tape of declared length R.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomTape {
    pub bits: Bits,
    pub role: Role,
}

impl RandomTape {
    pub fn new(bits: Bits, role: Role) -> Self {
        RandomTape { bits, role }
    }

    pub fn zeros(len: usize, role: Role) -> Self {
        RandomTape {
            bits: vec![false; len],
            role,
        }
    }
}

/// Why a computation stopped before producing a value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Interrupt {
    /// A coin beyond the known prefix of tape `n` was requested.
    NeedCoin(usize),
    Fail(Error),
}

impl From<Error> for Interrupt {
    fn from(e: Error) -> Self {
        Interrupt::Fail(e)
    }
}

impl Interrupt {
    /// Collapses a missing coin into the "insufficient random prefix" error.
    pub fn into_error(self) -> Error {
        match self {
            Interrupt::NeedCoin(_) => Error::InsufficientRandomPrefix,
            Interrupt::Fail(e) => e,
        }
    }
}

/// The i-th coin of one party. Machines replay from scratch, so the same
/// index may be requested repeatedly and must return the same bit.
pub trait CoinSource {
    fn coin(&mut self, i: usize) -> Result<bool, Interrupt>;
}

impl<C: CoinSource + ?Sized> CoinSource for &mut C {
    fn coin(&mut self, i: usize) -> Result<bool, Interrupt> {
        (**self).coin(i)
    }
}

/// Coins read from a fixed prefix.
pub struct PrefixCoins<'a> {
    bits: &'a [bool],
    tape: usize,
    used: usize,
}

impl<'a> PrefixCoins<'a> {
    pub fn new(bits: &'a [bool], tape: usize) -> Self {
        PrefixCoins {
            bits,
            tape,
            used: 0,
        }
    }

    /// Number of leading coins actually read.
    pub fn used(&self) -> usize {
        self.used
    }
}

impl CoinSource for PrefixCoins<'_> {
    fn coin(&mut self, i: usize) -> Result<bool, Interrupt> {
        match self.bits.get(i) {
            Some(&b) => {
                self.used = self.used.max(i + 1);
                Ok(b)
            }
            None => Err(Interrupt::NeedCoin(self.tape)),
        }
    }
}

/// Never supplies a coin.
pub struct NoCoins;

impl CoinSource for NoCoins {
    fn coin(&mut self, _i: usize) -> Result<bool, Interrupt> {
        Err(Interrupt::Fail(Error::InsufficientRandomPrefix))
    }
}

/// One coin stream shared by several parties: each party's coins are laid
/// out in the order they are first requested.
pub struct SharedTape<C> {
    inner: RefCell<SharedState<C>>,
}

struct SharedState<C> {
    source: C,
    layout: HashMap<(usize, usize), usize>,
    drawn: Vec<bool>,
}

impl<C: CoinSource> SharedTape<C> {
    pub fn new(source: C) -> Self {
        SharedTape {
            inner: RefCell::new(SharedState {
                source,
                layout: HashMap::new(),
                drawn: Vec::new(),
            }),
        }
    }

    pub fn party(&self, party: usize) -> SharedCoins<'_, C> {
        SharedCoins { tape: self, party }
    }

    /// How many tape positions have been assigned so far.
    pub fn consumed(&self) -> usize {
        self.inner.borrow().drawn.len()
    }

    /// Every bit drawn so far, in tape order.
    pub fn drawn(&self) -> Bits {
        self.inner.borrow().drawn.clone()
    }

    /// The coins one party has read, in that party's index order.
    pub fn party_bits(&self, party: usize) -> Bits {
        let state = self.inner.borrow();
        (0..)
            .map_while(|i| state.layout.get(&(party, i)).map(|&p| state.drawn[p]))
            .collect()
    }
}

pub struct SharedCoins<'t, C> {
    tape: &'t SharedTape<C>,
    party: usize,
}

impl<C: CoinSource> CoinSource for SharedCoins<'_, C> {
    fn coin(&mut self, i: usize) -> Result<bool, Interrupt> {
        let mut state = self.tape.inner.borrow_mut();
        if let Some(&p) = state.layout.get(&(self.party, i)) {
            return Ok(state.drawn[p]);
        }
        let p = state.drawn.len();
        let bit = state.source.coin(p)?;
        state.drawn.push(bit);
        state.layout.insert((self.party, i), p);
        Ok(bit)
    }
}

/// A finished branch: the tape prefixes read and the computed value.
#[derive(Debug, Clone)]
pub struct Branch<R> {
    pub prefixes: Vec<Bits>,
    pub value: R,
}

impl<R> Branch<R> {
    /// Total number of coins fixed by this branch; its probability is
    /// `2^-bits`.
    pub fn bits(&self) -> usize {
        self.prefixes.iter().map(Vec::len).sum()
    }
}

/// Runs `run` on every tape prefix it asks for, up to `bound` bits per tape.
///
/// Branches come out in lexicographic order of their prefixes, zeros first.
pub fn enumerate_tapes<R>(
    n_tapes: usize,
    bound: usize,
    mut run: impl FnMut(&[Bits]) -> Result<R, Interrupt>,
) -> Result<Vec<Branch<R>>, Error> {
    let mut out = Vec::new();
    let mut stack = vec![vec![Vec::new(); n_tapes]];
    while let Some(prefixes) = stack.pop() {
        match run(&prefixes) {
            Ok(value) => out.push(Branch { prefixes, value }),
            Err(Interrupt::NeedCoin(k)) => {
                if k >= n_tapes || prefixes[k].len() >= bound {
                    return Err(Error::InsufficientRandomPrefix);
                }
                for bit in [true, false] {
                    let mut next = prefixes.clone();
                    next[k].push(bit);
                    stack.push(next);
                }
            }
            Err(Interrupt::Fail(e)) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_runs_use_no_bits() {
        let branches = enumerate_tapes(2, 4, |_| Ok::<_, Interrupt>(7)).unwrap();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].bits(), 0);
    }

    #[test]
    fn branches_cover_all_prefixes_with_exact_weights() {
        // Reads tape 1 once, then tape 0 twice when the first coin is 1.
        let branches = enumerate_tapes(2, 4, |p| {
            let mut m = PrefixCoins::new(&p[1], 1);
            let mut w = PrefixCoins::new(&p[0], 0);
            let first = m.coin(0)?;
            if first {
                let a = w.coin(0)?;
                let b = w.coin(1)?;
                Ok(1 + a as u32 + b as u32)
            } else {
                Ok(0)
            }
        })
        .unwrap();
        assert_eq!(branches.len(), 5);
        let total: f64 = branches.iter().map(|b| 0.5f64.powi(b.bits() as i32)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(branches[0].prefixes, vec![vec![], vec![false]]);
    }

    #[test]
    fn exceeding_the_bound_is_an_error() {
        let err = enumerate_tapes(1, 2, |p| {
            let mut c = PrefixCoins::new(&p[0], 0);
            for i in 0..3 {
                c.coin(i)?;
            }
            Ok(())
        })
        .unwrap_err();
        assert_eq!(err, Error::InsufficientRandomPrefix);
    }

    #[test]
    fn shared_tape_assigns_positions_in_request_order() {
        let bits = [true, false, true];
        let tape = SharedTape::new(PrefixCoins::new(&bits, 0));
        let mut a = tape.party(0);
        assert!(a.coin(0).unwrap());
        let mut b = tape.party(1);
        assert!(!b.coin(0).unwrap());
        assert!(a.coin(0).unwrap());
        assert!(a.coin(1).unwrap());
        assert_eq!(tape.consumed(), 3);
        assert_eq!(tape.party_bits(0), vec![true, true]);
        assert_eq!(tape.party_bits(1), vec![false]);
        assert_eq!(a.coin(2), Err(Interrupt::NeedCoin(0)));
    }
}
