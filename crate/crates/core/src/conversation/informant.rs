use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::Msg;
use crate::decision::Bits;
use crate::tape::{CoinSource, Interrupt};

/// The other party of a conversation. It runs on the true state's bits and
/// answers each message the DM's machine sends.
pub trait Informant: Send + Sync + fmt::Debug {
    /// Every reply it may give.
    fn alphabet(&self) -> &[Msg];

    /// Reply to the last of `received`; `None` is silence.
    fn reply(
        &self,
        state: &[bool],
        received: &[Msg],
        coins: &mut dyn CoinSource,
    ) -> Result<Option<Msg>, Interrupt>;

    fn is_silent(&self) -> bool {
        false
    }
}

/// ⊥: never says anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl Informant for Silent {
    fn alphabet(&self) -> &[Msg] {
        &[]
    }

    fn reply(
        &self,
        _state: &[bool],
        _received: &[Msg],
        _coins: &mut dyn CoinSource,
    ) -> Result<Option<Msg>, Interrupt> {
        Ok(None)
    }

    fn is_silent(&self) -> bool {
        true
    }
}

type ReplyFn = dyn Fn(&[bool], &[Msg]) -> Option<Msg> + Send + Sync;

/// A deterministic informant given by a function of the state bits and the
/// messages received so far.
#[derive(Clone)]
pub struct FnInformant {
    alphabet: Vec<Msg>,
    f: Arc<ReplyFn>,
}

impl FnInformant {
    pub fn new(
        alphabet: Vec<Msg>,
        f: impl Fn(&[bool], &[Msg]) -> Option<Msg> + Send + Sync + 'static,
    ) -> Self {
        FnInformant {
            alphabet,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnInformant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnInformant")
            .field("alphabet", &self.alphabet)
            .finish_non_exhaustive()
    }
}

impl Informant for FnInformant {
    fn alphabet(&self) -> &[Msg] {
        &self.alphabet
    }

    fn reply(
        &self,
        state: &[bool],
        received: &[Msg],
        _coins: &mut dyn CoinSource,
    ) -> Result<Option<Msg>, Interrupt> {
        Ok((self.f)(state, received))
    }
}

/// Replies looked up by (state bits, last message); unlisted pairs are
/// answered with silence.
#[derive(Debug, Clone, Default)]
pub struct TableInformant {
    pub alphabet: Vec<Msg>,
    pub replies: BTreeMap<(Bits, Msg), Msg>,
}

impl Informant for TableInformant {
    fn alphabet(&self) -> &[Msg] {
        &self.alphabet
    }

    fn reply(
        &self,
        state: &[bool],
        received: &[Msg],
        _coins: &mut dyn CoinSource,
    ) -> Result<Option<Msg>, Interrupt> {
        let Some(last) = received.last() else {
            return Ok(None);
        };
        Ok(self.replies.get(&(state.to_vec(), last.clone())).cloned())
    }
}
