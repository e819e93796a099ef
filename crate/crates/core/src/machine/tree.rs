use std::collections::BTreeMap;

use crate::conversation::{Exchange, InteractiveMachine, Move, Msg, Response, View};
use crate::decision::ActionIx;
use crate::error::{Error, Result};
use crate::tape::{CoinSource, Interrupt, PrefixCoins, Role};

/// A node of a finite interactive strategy. Every node adds its `cost` to
/// the complexity of any conversation that visits it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeNode {
    Act {
        action: ActionIx,
        cost: u64,
    },
    /// Sends `message`; the child is chosen by the reply, or by `silent`
    /// when the informant says nothing.
    Send {
        message: Msg,
        cost: u64,
        replies: BTreeMap<Msg, TreeNode>,
        silent: Option<Box<TreeNode>>,
    },
    /// Reads `bits` coins; child `i` is taken for coin value `i`, most
    /// significant coin first.
    Coin {
        bits: usize,
        cost: u64,
        branches: Vec<TreeNode>,
    },
    ReadType {
        index: usize,
        cost: u64,
        zero: Box<TreeNode>,
        one: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn act(action: usize, cost: u64) -> Self {
        TreeNode::Act {
            action: ActionIx(action),
            cost,
        }
    }

    fn children(&self) -> Vec<&TreeNode> {
        match self {
            TreeNode::Act { .. } => vec![],
            TreeNode::Send {
                replies, silent, ..
            } => replies.values().chain(silent.as_deref()).collect(),
            TreeNode::Coin { branches, .. } => branches.iter().collect(),
            TreeNode::ReadType { zero, one, .. } => vec![zero, one],
        }
    }

    /// Longest chain of `Send` nodes below and including this one.
    pub fn send_depth(&self) -> usize {
        let own = usize::from(matches!(self, TreeNode::Send { .. }));
        own + self
            .children()
            .iter()
            .map(|c| c.send_depth())
            .max()
            .unwrap_or(0)
    }
}

/// A finite interactive machine whose position is determined by the
/// message history, coins and type bits read so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyTree {
    pub root: TreeNode,
}

impl StrategyTree {
    pub fn new(root: TreeNode) -> Result<Self> {
        let tree = StrategyTree { root };
        tree.check_shape(&tree.root)?;
        Ok(tree)
    }

    fn check_shape(&self, node: &TreeNode) -> Result<()> {
        if let TreeNode::Coin { bits, branches, .. } = node {
            if *bits >= usize::BITS as usize || branches.len() != 1usize << bits {
                return Err(Error::Invalid(format!(
                    "coin node over {bits} bits needs {} branches, has {}",
                    1u128 << bits.min(&100),
                    branches.len()
                )));
            }
        }
        node.children()
            .into_iter()
            .try_for_each(|c| self.check_shape(c))
    }

    /// Every send node must have a child for each reply in `alphabet`.
    pub fn validate_alphabet(&self, alphabet: &[Msg]) -> Result<()> {
        fn go(node: &TreeNode, alphabet: &[Msg]) -> Result<()> {
            if let TreeNode::Send {
                message, replies, ..
            } = node
            {
                if let Some(missing) = alphabet.iter().find(|a| !replies.contains_key(*a)) {
                    return Err(Error::Invalid(format!(
                        "send node `{message}` has no branch for reply `{missing}`"
                    )));
                }
            }
            node.children()
                .into_iter()
                .try_for_each(|c| go(c, alphabet))
        }
        go(&self.root, alphabet)
    }

    pub fn send_depth(&self) -> usize {
        self.root.send_depth()
    }

    fn walk(
        &self,
        input: &[bool],
        history: &[Exchange],
        coins: &mut dyn CoinSource,
    ) -> Result<Response, Interrupt> {
        let mut node = &self.root;
        let mut k = 0;
        let mut next_coin = 0;
        let mut complexity = 0u64;
        let mut type_read = 0;
        loop {
            match node {
                TreeNode::Act { action, cost } => {
                    complexity += cost;
                    if k != history.len() {
                        return Err(Error::OffTree.into());
                    }
                    return Ok(Response {
                        mv: Move::Act(*action),
                        complexity,
                        type_read,
                    });
                }
                TreeNode::Send {
                    message,
                    cost,
                    replies,
                    silent,
                } => {
                    complexity += cost;
                    let Some(ex) = history.get(k) else {
                        return Ok(Response {
                            mv: Move::Send(message.clone()),
                            complexity,
                            type_read,
                        });
                    };
                    if ex.sent != *message {
                        return Err(Error::OffTree.into());
                    }
                    node = match &ex.reply {
                        Some(r) => replies.get(r),
                        None => silent.as_deref(),
                    }
                    .ok_or(Interrupt::Fail(Error::OffTree))?;
                    k += 1;
                }
                TreeNode::Coin {
                    bits,
                    cost,
                    branches,
                } => {
                    complexity += cost;
                    let mut value = 0usize;
                    for _ in 0..*bits {
                        value = value * 2 + usize::from(coins.coin(next_coin)?);
                        next_coin += 1;
                    }
                    node = &branches[value];
                }
                TreeNode::ReadType {
                    index,
                    cost,
                    zero,
                    one,
                } => {
                    complexity += cost;
                    type_read = type_read.max(index + 1);
                    node = if input.get(*index).copied().unwrap_or(false) {
                        one
                    } else {
                        zero
                    };
                }
            }
        }
    }
}

impl InteractiveMachine for StrategyTree {
    fn respond(
        &self,
        input: &[bool],
        history: &[Exchange],
        coins: &mut dyn CoinSource,
    ) -> Result<Response, Interrupt> {
        self.walk(input, history, coins)
    }
}

/// The move at `view`, reading coins from the view's random prefix.
pub fn strategy_tree_step(tree: &StrategyTree, input: &[bool], view: &View) -> Result<Move> {
    let mut coins = PrefixCoins::new(&view.random_prefix, Role::Machine.tape());
    tree.walk(input, &view.history, &mut coins)
        .map(|r| r.mv)
        .map_err(Interrupt::into_error)
}

/// Question text asked by the binary-search builders.
pub fn greater_than(k: i64) -> Msg {
    format!("x>{k}?")
}

/// Binary search for a number in `lo..=hi` by questions `x>k?` with
/// `k = ⌊(lo+hi)/2⌋`, answered `yes`/`no`. The leaf for number `x` acts
/// with action `x − lo`. Every question costs `cost`.
///
/// With `pad_to = Some(d)` every path asks exactly `d` questions, repeating
/// `x>x?` once the number is known. When the informant is silent the tree
/// guesses the current midpoint.
pub fn binary_search_tree(
    lo: i64,
    hi: i64,
    cost: u64,
    pad_to: Option<usize>,
) -> Result<StrategyTree> {
    if lo > hi {
        return Err(Error::Invalid(format!("empty range {lo}..={hi}")));
    }
    if let Some(d) = pad_to {
        let needed = (64 - ((hi - lo) as u64).leading_zeros()) as usize;
        if d < needed {
            return Err(Error::Invalid(format!(
                "{d} questions cannot separate {} numbers",
                hi - lo + 1
            )));
        }
    }
    fn build(lo: i64, hi: i64, base: i64, cost: u64, left: Option<usize>) -> TreeNode {
        let done = match left {
            Some(d) => d == 0,
            None => lo == hi,
        };
        if done {
            return TreeNode::act((lo - base) as usize, 0);
        }
        let next = left.map(|d| d - 1);
        let mid = lo + (hi - lo) / 2;
        let (yes, no) = if lo == hi {
            (
                build(lo, lo, base, cost, next),
                build(lo, lo, base, cost, next),
            )
        } else {
            (
                build(mid + 1, hi, base, cost, next),
                build(lo, mid, base, cost, next),
            )
        };
        TreeNode::Send {
            message: greater_than(mid),
            cost,
            replies: BTreeMap::from([("yes".to_string(), yes), ("no".to_string(), no)]),
            silent: Some(Box::new(TreeNode::act((mid - base) as usize, 0))),
        }
    }
    StrategyTree::new(build(lo, hi, lo, cost, pad_to))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::NoCoins;
    use proptest::prelude::*;

    fn answer(x: i64, q: &str) -> Option<Msg> {
        let k: i64 = q.strip_prefix("x>")?.strip_suffix('?')?.parse().ok()?;
        Some(if x > k { "yes" } else { "no" }.to_string())
    }

    fn path(tree: &StrategyTree, x: i64) -> (Vec<Exchange>, ActionIx, u64) {
        let mut history = Vec::new();
        loop {
            let r = tree.respond(&[], &history, &mut NoCoins).unwrap();
            match r.mv {
                Move::Send(m) => {
                    let reply = answer(x, &m);
                    history.push(Exchange { sent: m, reply });
                }
                Move::Act(a) => return (history, a, r.complexity),
            }
        }
    }

    #[test]
    fn binary_search_opens_with_the_midpoints() {
        let tree = binary_search_tree(1, 100, 0, None).unwrap();
        let view = View::default();
        assert_eq!(
            strategy_tree_step(&tree, &[], &view).unwrap(),
            Move::Send("x>50?".into())
        );
        let view = View {
            history: vec![Exchange::new("x>50?", Some("yes"))],
            ..View::default()
        };
        assert_eq!(
            strategy_tree_step(&tree, &[], &view).unwrap(),
            Move::Send("x>75?".into())
        );
    }

    #[test]
    fn off_tree_histories_are_rejected() {
        let tree = binary_search_tree(1, 100, 0, None).unwrap();
        let view = View {
            history: vec![Exchange::new("x>10?", Some("yes"))],
            ..View::default()
        };
        assert_eq!(
            strategy_tree_step(&tree, &[], &view).unwrap_err(),
            Error::OffTree
        );
        let view = View {
            history: vec![Exchange::new("x>50?", Some("maybe"))],
            ..View::default()
        };
        assert_eq!(
            strategy_tree_step(&tree, &[], &view).unwrap_err(),
            Error::OffTree
        );
    }

    #[test]
    fn padded_search_always_asks_seven_questions() {
        let tree = binary_search_tree(1, 100, 1, Some(7)).unwrap();
        assert!(binary_search_tree(1, 100, 1, Some(6)).is_err());
        for x in 1..=100 {
            let (h, a, c) = path(&tree, x);
            assert_eq!(h.len(), 7);
            assert_eq!(a, ActionIx((x - 1) as usize));
            assert_eq!(c, 7);
        }
        // Unpadded search is not always seven questions.
        let plain = binary_search_tree(1, 100, 1, None).unwrap();
        assert!((1..=100).any(|x| path(&plain, x).0.len() < 7));
    }

    #[test]
    fn alphabet_and_coin_shape_checks() {
        let tree = binary_search_tree(1, 4, 0, None).unwrap();
        tree.validate_alphabet(&["yes".into(), "no".into()])
            .unwrap();
        assert!(tree
            .validate_alphabet(&["yes".into(), "maybe".into()])
            .is_err());
        let bad = TreeNode::Coin {
            bits: 1,
            cost: 0,
            branches: vec![TreeNode::act(0, 0)],
        };
        assert!(StrategyTree::new(bad).is_err());
    }

    #[test]
    fn coins_and_type_bits_drive_the_walk() {
        let tree = StrategyTree::new(TreeNode::Coin {
            bits: 1,
            cost: 1,
            branches: vec![
                TreeNode::act(0, 0),
                TreeNode::ReadType {
                    index: 2,
                    cost: 2,
                    zero: Box::new(TreeNode::act(1, 0)),
                    one: Box::new(TreeNode::act(2, 0)),
                },
            ],
        })
        .unwrap();
        let mut coins = PrefixCoins::new(&[true], 1);
        let r = tree
            .respond(&[false, false, true], &[], &mut coins)
            .unwrap();
        assert_eq!(
            (r.mv, r.complexity, r.type_read),
            (Move::Act(ActionIx(2)), 3, 3)
        );
        assert_eq!(
            tree.respond(&[], &[], &mut NoCoins).unwrap_err(),
            Interrupt::Fail(Error::InsufficientRandomPrefix)
        );
    }

    proptest! {
        #[test]
        fn each_number_has_one_consistent_path(lo in -20i64..20, span in 0i64..40) {
            let hi = lo + span;
            let tree = binary_search_tree(lo, hi, 1, None).unwrap();
            let depth = tree.send_depth();
            for x in lo..=hi {
                let (h, a, _) = path(&tree, x);
                prop_assert!(h.len() <= depth);
                prop_assert_eq!(a, ActionIx((x - lo) as usize));
                // Replaying the same answers gives the same leaf.
                let again = path(&tree, x);
                prop_assert_eq!(again.0, h);
            }
        }
    }
}
