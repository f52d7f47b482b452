//! Strictly binary trees over leaf indices `0..n`, merge traces, baselines,
//! the bracketed text form and unlabeled span scores.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Inclusive leaf range `(first, last)` covered by an internal node.
pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BinaryTree {
    Leaf(usize),
    Internal(Box<BinaryTree>, Box<BinaryTree>),
}

impl BinaryTree {
    pub fn join(left: BinaryTree, right: BinaryTree) -> Self {
        BinaryTree::Internal(Box::new(left), Box::new(right))
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            BinaryTree::Leaf(_) => 1,
            BinaryTree::Internal(l, r) => l.leaf_count() + r.leaf_count(),
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            BinaryTree::Leaf(_) => 0,
            BinaryTree::Internal(l, r) => 1 + l.internal_count() + r.internal_count(),
        }
    }

    /// Edges on the longest root-to-leaf path; a single leaf has height 0.
    pub fn height(&self) -> usize {
        match self {
            BinaryTree::Leaf(_) => 0,
            BinaryTree::Internal(l, r) => 1 + l.height().max(r.height()),
        }
    }

    /// `(first, last)` leaf index under this node.
    pub fn span(&self) -> Span {
        match self {
            BinaryTree::Leaf(i) => (*i, *i),
            BinaryTree::Internal(l, r) => (l.span().0, r.span().1),
        }
    }

    /// Leaf indices in left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            BinaryTree::Leaf(i) => out.push(*i),
            BinaryTree::Internal(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Checks that the leaves read `0, 1, ..., n-1` from left to right, which
    /// makes every span contiguous and sibling spans adjacent.
    pub fn validate(&self) -> Result<()> {
        for (expected, leaf) in self.leaves().into_iter().enumerate() {
            if leaf != expected {
                return Err(Error::InvalidArgument(format!(
                    "leaf at position {expected} is {leaf}"
                )));
            }
        }
        Ok(())
    }

    /// Spans of all internal nodes, root included, single leaves excluded.
    pub fn spans(&self) -> BTreeSet<Span> {
        let mut out = BTreeSet::new();
        self.collect_spans(&mut out);
        out
    }

    fn collect_spans(&self, out: &mut BTreeSet<Span>) -> Span {
        match self {
            BinaryTree::Leaf(i) => (*i, *i),
            BinaryTree::Internal(l, r) => {
                let (lo, _) = l.collect_spans(out);
                let (_, hi) = r.collect_spans(out);
                out.insert((lo, hi));
                (lo, hi)
            }
        }
    }

    /// Number of internal nodes whose left child is itself internal.
    pub fn internal_left_children(&self) -> usize {
        match self {
            BinaryTree::Leaf(_) => 0,
            BinaryTree::Internal(l, r) => {
                let here = usize::from(matches!(**l, BinaryTree::Internal(..)));
                here + l.internal_left_children() + r.internal_left_children()
            }
        }
    }

    /// True when every right child is a leaf.
    pub fn is_left_branching(&self) -> bool {
        match self {
            BinaryTree::Leaf(_) => true,
            BinaryTree::Internal(l, r) => matches!(**r, BinaryTree::Leaf(_)) && l.is_left_branching(),
        }
    }

    /// Bracketed form: a leaf is its decimal index, an internal node is
    /// `( left right )`, tokens separated by single spaces.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.write_bracketed(&mut out);
        out
    }

    fn write_bracketed(&self, out: &mut String) {
        match self {
            BinaryTree::Leaf(i) => {
                use core::fmt::Write;
                let _ = write!(out, "{i}");
            }
            BinaryTree::Internal(l, r) => {
                out.push_str("( ");
                l.write_bracketed(out);
                out.push(' ');
                r.write_bracketed(out);
                out.push_str(" )");
            }
        }
    }

    pub fn parse_bracketed(text: &str) -> Result<Self> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { tokens: &tokens, pos: 0, next_leaf: 0 };
        let tree = parser.node()?;
        if let Some(&(offset, _)) = tokens.get(parser.pos) {
            return Err(bracket_error(offset, "unexpected trailing input"));
        }
        Ok(tree)
    }
}

impl core::fmt::Display for BinaryTree {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

fn bracket_error(position: usize, message: impl Into<String>) -> Error {
    Error::Bracketed {
        position,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, &str)>> {
    if text.is_empty() {
        return Err(bracket_error(0, "empty tree"));
    }
    let mut tokens = Vec::new();
    let mut offset = 0;
    for token in text.split(' ') {
        if token.is_empty() {
            return Err(bracket_error(offset, "expected a single space between tokens"));
        }
        tokens.push((offset, token));
        offset += token.len() + 1;
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [(usize, &'a str)],
    pos: usize,
    next_leaf: usize,
}

impl Parser<'_> {
    fn end_offset(&self) -> usize {
        self.tokens.last().map_or(0, |(o, t)| o + t.len())
    }

    fn node(&mut self) -> Result<BinaryTree> {
        let Some(&(offset, token)) = self.tokens.get(self.pos) else {
            return Err(bracket_error(self.end_offset(), "unbalanced parentheses: input ended early"));
        };
        self.pos += 1;
        match token {
            "(" => {
                let left = self.node()?;
                let right = self.node()?;
                match self.tokens.get(self.pos) {
                    Some(&(_, ")")) => {
                        self.pos += 1;
                        Ok(BinaryTree::join(left, right))
                    }
                    Some(&(o, _)) => Err(bracket_error(o, "expected ')' after two children")),
                    None => Err(bracket_error(self.end_offset(), "unbalanced parentheses: missing ')'")),
                }
            }
            ")" => Err(bracket_error(offset, "unbalanced parentheses: unexpected ')'")),
            digits => {
                if !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(bracket_error(offset, format!("invalid token {digits:?}")));
                }
                let leaf: usize = digits
                    .parse()
                    .map_err(|_| bracket_error(offset, format!("invalid leaf index {digits:?}")))?;
                if leaf != self.next_leaf {
                    let message = if leaf < self.next_leaf {
                        format!("duplicate or out-of-order leaf {leaf}")
                    } else {
                        format!("leaf {} missing", self.next_leaf)
                    };
                    return Err(bracket_error(offset, message));
                }
                self.next_leaf += 1;
                Ok(BinaryTree::Leaf(leaf))
            }
        }
    }
}

/// Sequence of adjacent-pair merges: step `t` joins frontier nodes `p_t` and
/// `p_t + 1` of a frontier holding `n - t` nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MergeTrace(pub Vec<usize>);

impl MergeTrace {
    pub fn steps(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("tree needs at least one leaf".into()));
        }
        if self.0.len() != n - 1 {
            return Err(Error::TraceLength {
                expected: n - 1,
                actual: self.0.len(),
            });
        }
        for (step, &index) in self.0.iter().enumerate() {
            let frontier = n - step;
            if index + 1 >= frontier {
                return Err(Error::TraceStep { step, index, frontier });
            }
        }
        Ok(())
    }

    pub fn to_tree(&self, n: usize) -> Result<BinaryTree> {
        from_merge_trace(n, self)
    }
}

pub fn from_merge_trace(n: usize, trace: &MergeTrace) -> Result<BinaryTree> {
    trace.validate(n)?;
    let mut frontier: Vec<BinaryTree> = (0..n).map(BinaryTree::Leaf).collect();
    for &p in trace.steps() {
        let right = frontier.remove(p + 1);
        let left = core::mem::replace(&mut frontier[p], BinaryTree::Leaf(0));
        frontier[p] = BinaryTree::join(left, right);
    }
    Ok(frontier.pop().expect("one node remains"))
}

/// Span overlap between a predicted and a gold tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanScore {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SpanScore {
    /// Scores from pooled counts. Empty span sets score 1.
    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { matched, predicted, gold, precision, recall, f1 }
    }
}

pub fn unlabeled_span_f1(pred: &BinaryTree, gold: &BinaryTree) -> Result<SpanScore> {
    let (pn, gn) = (pred.leaf_count(), gold.leaf_count());
    if pn != gn {
        return Err(Error::LeafCount { pred: pn, gold: gn });
    }
    let (sp, sg) = (pred.spans(), gold.spans());
    let matched = sp.intersection(&sg).count();
    Ok(SpanScore::from_counts(matched, sp.len(), sg.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Left,
    Right,
    Balanced,
    Random,
}

impl core::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Self::Left),
            "right" => Ok(Self::Right),
            "balanced" => Ok(Self::Balanced),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidArgument(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Baseline tree over `n` leaves; `seed` only matters for [`BaselineKind::Random`].
pub fn baseline_tree(kind: BaselineKind, n: usize, seed: u64) -> Result<BinaryTree> {
    baseline_tree_with_rng(kind, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Like [`baseline_tree`] but drawing from a caller-owned generator, so a
/// corpus of random baselines comes from one seeded stream.
///
/// The random baseline picks each merge uniformly among the adjacent pairs
/// of the current frontier; that is not uniform over tree shapes.
pub fn baseline_tree_with_rng<R: Rng + ?Sized>(kind: BaselineKind, n: usize, rng: &mut R) -> Result<BinaryTree> {
    if n == 0 {
        return Err(Error::InvalidArgument("baseline tree needs n >= 1".into()));
    }
    let trace = match kind {
        BaselineKind::Left => MergeTrace(alloc::vec![0; n - 1]),
        BaselineKind::Right => MergeTrace((0..n - 1).rev().collect()),
        BaselineKind::Balanced => return Ok(balanced(0, n)),
        BaselineKind::Random => MergeTrace((0..n - 1).map(|t| rng.gen_range(0..n - t - 1)).collect()),
    };
    from_merge_trace(n, &trace)
}

fn balanced(start: usize, len: usize) -> BinaryTree {
    if len == 1 {
        return BinaryTree::Leaf(start);
    }
    let left = len.div_ceil(2);
    BinaryTree::join(balanced(start, left), balanced(start + left, len - left))
}
