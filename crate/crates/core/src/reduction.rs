//! Reductions between sequences and finite-reduction sets.
//!
//! A finite sequence `a` reduces to `b` when `b` has a subsequence split into
//! consecutive blocks `b₀ * b₁ * …` with `a(n) = fₙ(bₙ)` for orderly terms
//! `fₙ`. `FR(b)` collects the values of orderly terms on finite subsequences.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use serde_json::{json, Value};

use crate::algebra::{Operation, Signature, Term, TermEnumerator};
use crate::error::{Error, Result};

/// Generator for the entries of a [`StreamSeq`] past its explicit prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `start + step·i`
    Arithmetic { start: u64, step: u64 },
    /// `start · ratio^i`
    Geometric { start: u64, ratio: u64 },
    /// `base^i`
    Powers { base: u64 },
    /// `values[i]`, undefined past the end.
    Table { values: Vec<u64> },
}

impl Rule {
    fn eval(&self, i: usize) -> Option<u64> {
        let i32 = u32::try_from(i).ok();
        match self {
            Rule::Arithmetic { start, step } => step.checked_mul(i as u64)?.checked_add(*start),
            Rule::Geometric { start, ratio } => ratio.checked_pow(i32?)?.checked_mul(*start),
            Rule::Powers { base } => base.checked_pow(i32?),
            Rule::Table { values } => values.get(i).copied(),
        }
    }

    /// A number dividing every value at rule index `≥ from`, when the rule
    /// makes one evident.
    fn divisor_from(&self, from: usize) -> Option<u64> {
        match self {
            Rule::Arithmetic { start, step } => Some(gcd(self.eval(from)?, *step).max(
                if *step == 0 { *start } else { 0 },
            )),
            Rule::Geometric { .. } | Rule::Powers { .. } => self.eval(from),
            Rule::Table { values } => Some(values.get(from..)?.iter().fold(0, |g, &v| gcd(g, v))),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Rule::Arithmetic { start, step } => {
                json!({"kind": "arithmetic", "params": {"start": start, "step": step}})
            }
            Rule::Geometric { start, ratio } => {
                json!({"kind": "geometric", "params": {"start": start, "ratio": ratio}})
            }
            Rule::Powers { base } => json!({"kind": "powers", "params": {"base": base}}),
            Rule::Table { values } => json!({"kind": "table", "params": {"values": values}}),
        }
    }

    fn from_json(v: &Value) -> Result<Self> {
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Invalid(format!("rule needs a kind: {v}")))?;
        let params = v.get("params").cloned().unwrap_or(Value::Null);
        let num = |key: &str| {
            params
                .get(key)
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::Invalid(format!("rule `{kind}` needs params.{key}")))
        };
        Ok(match kind {
            "arithmetic" => Rule::Arithmetic {
                start: num("start")?,
                step: num("step")?,
            },
            "geometric" => Rule::Geometric {
                start: num("start")?,
                ratio: num("ratio")?,
            },
            "powers" => Rule::Powers { base: num("base")? },
            "table" => Rule::Table {
                values: serde_json::from_value(
                    params.get("values").cloned().unwrap_or(Value::Null),
                )?,
            },
            other => return Err(Error::Invalid(format!("unknown rule kind `{other}`"))),
        })
    }
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// A sequence given by an explicit prefix and an optional rule for the
/// remaining entries. Without a rule the sequence is finite.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamSeq {
    prefix: Vec<u64>,
    rule: Option<Rule>,
    /// Offset added to indices when the rule is consulted; cut-offs shift it.
    shift: usize,
}

impl StreamSeq {
    pub fn finite(values: Vec<u64>) -> Self {
        StreamSeq {
            prefix: values,
            rule: None,
            shift: 0,
        }
    }

    pub fn with_rule(prefix: Vec<u64>, rule: Rule) -> Self {
        StreamSeq {
            prefix,
            rule: Some(rule),
            shift: 0,
        }
    }

    pub fn powers(base: u64) -> Self {
        Self::with_rule(Vec::new(), Rule::Powers { base })
    }

    /// `1, 2, 3, …`
    pub fn positive_naturals() -> Self {
        Self::with_rule(Vec::new(), Rule::Arithmetic { start: 1, step: 1 })
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "powers2" => Some(Self::powers(2)),
            "powers3" => Some(Self::powers(3)),
            "naturals" | "positive" => Some(Self::positive_naturals()),
            _ => None,
        }
    }

    pub fn get(&self, i: usize) -> Option<u64> {
        if let Some(&v) = self.prefix.get(i) {
            return Some(v);
        }
        self.rule.as_ref()?.eval(i.checked_add(self.shift)?)
    }

    /// Entry `i`, or a "need longer prefix" error.
    pub fn at(&self, i: usize) -> Result<u64> {
        self.get(i).ok_or(Error::NeedPrefix { index: i })
    }

    pub fn take(&self, n: usize) -> Result<Vec<u64>> {
        (0..n).map(|i| self.at(i)).collect()
    }

    /// Length when the sequence is known to be finite.
    pub fn known_len(&self) -> Option<usize> {
        match &self.rule {
            None => Some(self.prefix.len()),
            Some(Rule::Table { values }) => {
                let rule_len = values.len().saturating_sub(self.shift);
                Some(self.prefix.len().max(rule_len))
            }
            Some(_) => None,
        }
    }

    /// The cut-off sequence `⟨a(n), a(n+1), …⟩`.
    pub fn tail(&self, n: usize) -> Self {
        StreamSeq {
            prefix: self.prefix.get(n..).map(<[u64]>::to_vec).unwrap_or_default(),
            rule: self.rule.clone(),
            shift: self.shift + n,
        }
    }

    /// Entries from index `from` onward while they are at most `bound`,
    /// checking that they strictly increase.
    pub fn increasing_up_to(&self, from: usize, bound: u64) -> Result<Vec<u64>> {
        let mut out: Vec<u64> = Vec::new();
        let mut i = from;
        loop {
            let v = match self.get(i) {
                Some(v) => v,
                None if self.known_len().is_some_and(|l| i >= l) => break,
                None => return Err(Error::NeedPrefix { index: i }),
            };
            if let Some(&last) = out.last() {
                if v <= last {
                    return Err(Error::Precondition(format!(
                        "sequence is not strictly increasing at index {i}"
                    )));
                }
            }
            if v > bound {
                break;
            }
            out.push(v);
            i += 1;
        }
        Ok(out)
    }

    /// A common divisor of every entry from index `from` on, when the
    /// explicit data and the rule make one evident. Returns the gcd of what is
    /// known; `None` when nothing is known (infinite tail without rule data).
    pub fn common_divisor_from(&self, from: usize) -> Option<u64> {
        let mut g = self
            .prefix
            .get(from..)
            .unwrap_or(&[])
            .iter()
            .fold(0, |g, &v| gcd(g, v));
        if let Some(rule) = &self.rule {
            let rule_from = from.max(self.prefix.len()) + self.shift;
            g = gcd(g, rule.divisor_from(rule_from)?);
        }
        Some(g)
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "prefix": self.prefix });
        if let Some(r) = &self.rule {
            v["rule"] = r.to_json();
        }
        if self.shift != 0 {
            v["shift"] = json!(self.shift);
        }
        v
    }

    /// Accepts `[…]` (finite) or `{prefix, rule?, shift?}`.
    pub fn from_json(v: &Value) -> Result<Self> {
        if v.is_array() {
            return Ok(Self::finite(serde_json::from_value(v.clone())?));
        }
        let prefix = match v.get("prefix") {
            Some(p) => serde_json::from_value(p.clone())?,
            None => Vec::new(),
        };
        let rule = match v.get("rule") {
            Some(Value::Null) | None => None,
            Some(r) => Some(Rule::from_json(r)?),
        };
        let shift = v.get("shift").and_then(Value::as_u64).unwrap_or(0) as usize;
        Ok(StreamSeq {
            prefix,
            rule,
            shift,
        })
    }
}

/// One block of a reduction: positions in the longer sequence and the term
/// applied to the entries there.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub indices: Vec<usize>,
    pub term: Term,
}

/// Certificate for `a ⊴ b`: one block per entry of `a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ReductionWitness {
    pub blocks: Vec<Block>,
}

impl ReductionWitness {
    /// Identity blocks selecting the given positions.
    pub fn identity(indices: impl IntoIterator<Item = usize>) -> Self {
        ReductionWitness {
            blocks: indices
                .into_iter()
                .map(|i| Block {
                    indices: vec![i],
                    term: Term::Id,
                })
                .collect(),
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.blocks.iter().flat_map(|b| b.indices.last()).copied().max()
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.blocks
                .iter()
                .map(|b| json!({ "indices": b.indices, "term": b.term.to_json() }))
                .collect(),
        )
    }

    pub fn from_json(v: &Value, sig: &Signature) -> Result<Self> {
        let arr = v
            .as_array()
            .ok_or_else(|| Error::Invalid("witness must be an array of blocks".into()))?;
        let blocks = arr
            .iter()
            .map(|b| {
                let indices = serde_json::from_value(b.get("indices").cloned().unwrap_or_default())?;
                let term = Term::from_json(
                    b.get("term")
                        .ok_or_else(|| Error::Invalid("block needs a term".into()))?,
                    sig,
                )?;
                Ok(Block { indices, term })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ReductionWitness { blocks })
    }
}

/// Composes `a ⊴ b` (outer) with `b ⊴ c` (inner) into `a ⊴ c`.
pub fn compose_witnesses(outer: &ReductionWitness, inner: &ReductionWitness) -> Result<ReductionWitness> {
    let blocks = outer
        .blocks
        .iter()
        .map(|block| {
            let mut indices = Vec::new();
            let mut subs = Vec::with_capacity(block.indices.len());
            for &i in &block.indices {
                let b = inner.blocks.get(i).ok_or(Error::NeedPrefix { index: i })?;
                indices.extend_from_slice(&b.indices);
                subs.push(b.term.clone());
            }
            Ok(Block {
                indices,
                term: block.term.substitute(&subs)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReductionWitness { blocks })
}

/// Checks a witness for `a ⊴ b`. Malformed witnesses are errors; a
/// well-formed witness whose values disagree with `a` gives `Ok(false)`.
pub fn check_witness(a: &[u64], b: &[u64], w: &ReductionWitness, sig: &Signature) -> Result<bool> {
    if w.blocks.len() != a.len() {
        return Err(Error::Invalid(format!(
            "witness has {} blocks for a sequence of length {}",
            w.blocks.len(),
            a.len()
        )));
    }
    let mut last: Option<usize> = None;
    for block in &w.blocks {
        if block.indices.is_empty() {
            return Err(Error::Invalid("empty block".into()));
        }
        if block.term.arity() != block.indices.len() {
            return Err(Error::Arity {
                expected: block.term.arity(),
                got: block.indices.len(),
            });
        }
        if let Some(op) = block.term.ops().into_iter().find(|op| !sig.contains(op)) {
            return Err(Error::Invalid(format!(
                "operation `{}` is not in the signature",
                op.name()
            )));
        }
        for &i in &block.indices {
            if i >= b.len() {
                return Err(Error::Invalid(format!(
                    "index {i} out of range for a sequence of length {}",
                    b.len()
                )));
            }
            if last.is_some_and(|l| i <= l) {
                return Err(Error::Invalid(format!(
                    "block indices are not globally increasing at {i}"
                )));
            }
            last = Some(i);
        }
    }
    for (target, block) in a.iter().zip(&w.blocks) {
        let args: Vec<u64> = block.indices.iter().map(|&i| b[i]).collect();
        if block.term.eval(&args)? != *target {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest leaf count of a term of depth `depth` over `sig`.
pub(crate) fn max_leaves(sig: &Signature, depth: usize) -> usize {
    let r = sig.max_arity().max(1);
    let mut n: usize = 1;
    for _ in 1..depth {
        n = n.saturating_mul(r);
    }
    n
}

/// Values of orderly terms over segments of a value list, by interval
/// dynamic programming. With `subsequence` set, a segment's value set covers
/// terms on any nonempty subsequence of the segment; otherwise terms must use
/// every entry of the segment. Values above `cap` are dropped, which is only
/// sound for inflationary signatures.
pub(crate) struct SegmentValues<'a> {
    vals: &'a [u64],
    sig: &'a Signature,
    cap: Option<u64>,
    subsequence: bool,
    memo: HashMap<(usize, usize, usize), Rc<BTreeSet<u64>>>,
}

impl<'a> SegmentValues<'a> {
    pub(crate) fn new(vals: &'a [u64], sig: &'a Signature, cap: Option<u64>, subsequence: bool) -> Self {
        SegmentValues {
            vals,
            sig,
            cap,
            subsequence,
            memo: HashMap::new(),
        }
    }

    pub(crate) fn get(&mut self, lo: usize, hi: usize, depth: usize) -> Rc<BTreeSet<u64>> {
        let depth = effective_depth(self.sig, hi.saturating_sub(lo), depth);
        if let Some(v) = self.memo.get(&(lo, hi, depth)) {
            return v.clone();
        }
        let mut out = BTreeSet::new();
        if depth >= 1 && hi > lo {
            if self.subsequence {
                out.extend(self.vals[lo..hi].iter().copied().filter(|&v| self.keep(v)));
            } else if hi - lo == 1 && self.keep(self.vals[lo]) {
                out.insert(self.vals[lo]);
            }
            let ops = self.sig.ops().to_vec();
            for op in &ops {
                let n = op.arity();
                if n > hi - lo {
                    continue;
                }
                for cuts in cut_points(lo, hi, n) {
                    let parts: Vec<Rc<BTreeSet<u64>>> = cuts
                        .windows(2)
                        .map(|w| self.get(w[0], w[1], depth - 1))
                        .collect();
                    if parts.iter().any(|p| p.is_empty()) {
                        continue;
                    }
                    let mut args = Vec::with_capacity(n);
                    self.product(&parts, &mut args, &mut |vals| op.apply(vals), &mut out);
                }
            }
        }
        let out = Rc::new(out);
        self.memo.insert((lo, hi, depth), out.clone());
        out
    }

    fn keep(&self, v: u64) -> bool {
        self.cap.map_or(true, |c| v <= c)
    }

    fn product(
        &self,
        parts: &[Rc<BTreeSet<u64>>],
        args: &mut Vec<u64>,
        f: &mut dyn FnMut(&[u64]) -> u64,
        out: &mut BTreeSet<u64>,
    ) {
        if args.len() == parts.len() {
            let v = f(args);
            if self.keep(v) {
                out.insert(v);
            }
            return;
        }
        let part = parts[args.len()].clone();
        for &x in part.iter() {
            args.push(x);
            self.product(parts, args, f, out);
            args.pop();
        }
    }
}

/// Boundaries `lo = p₀ < p₁ < … < p_n = hi`.
fn cut_points(lo: usize, hi: usize, n: usize) -> Vec<Vec<usize>> {
    crate::algebra::compositions(hi - lo, n)
        .into_iter()
        .map(|parts| {
            let mut cuts = vec![lo];
            let mut at = lo;
            for p in parts {
                at += p;
                cuts.push(at);
            }
            cuts
        })
        .collect()
}

/// Effective depth: when every operation has arity ≥ 2, depth beyond the
/// number of leaves adds nothing.
fn effective_depth(sig: &Signature, leaves: usize, max_depth: usize) -> usize {
    if sig.all_arities_at_least_two() {
        max_depth.min(leaves.max(1))
    } else {
        max_depth
    }
}

/// Values of orderly terms of depth ≤ `max_depth` using every entry of `vals`.
pub fn term_values(vals: &[u64], sig: &Signature, max_depth: usize) -> BTreeSet<u64> {
    let depth = effective_depth(sig, vals.len(), max_depth);
    let mut sv = SegmentValues::new(vals, sig, None, false);
    sv.get(0, vals.len(), depth).as_ref().clone()
}

/// `FR(b)` restricted to terms of depth ≤ `max_depth`.
pub fn fr_enumerate(b: &[u64], sig: &Signature, max_depth: usize) -> BTreeSet<u64> {
    let depth = effective_depth(sig, b.len(), max_depth);
    let mut sv = SegmentValues::new(b, sig, None, true);
    sv.get(0, b.len(), depth).as_ref().clone()
}

/// Like [`fr_enumerate`] but drops values above `cap`. Exact on `[0, cap]`
/// when every operation is inflationary.
pub fn fr_enumerate_capped(b: &[u64], sig: &Signature, max_depth: usize, cap: u64) -> BTreeSet<u64> {
    let depth = effective_depth(sig, b.len(), max_depth);
    let cap = if sig.all_inflationary() { Some(cap) } else { None };
    let mut sv = SegmentValues::new(b, sig, cap, true);
    sv.get(0, b.len(), depth).as_ref().clone()
}

fn require_decidable_sig(sig: &Signature) -> Result<()> {
    if !sig.all_inflationary() {
        return Err(Error::Precondition(
            "membership needs every operation flagged inflationary".into(),
        ));
    }
    if !sig.all_arities_at_least_two() {
        return Err(Error::Precondition(
            "membership needs every operation of arity at least two".into(),
        ));
    }
    Ok(())
}

/// Decides `x ∈ FR(b − tail)`. Only entries `≤ x` can contribute, so the
/// search is over the finite set `{i ≥ tail : b(i) ≤ x}`.
pub fn fr_member(x: u64, b: &StreamSeq, tail: usize, sig: &Signature) -> Result<bool> {
    require_decidable_sig(sig)?;
    let entries = b.increasing_up_to(tail, x)?;
    if entries.is_empty() {
        return Ok(false);
    }
    if entries.contains(&x) {
        return Ok(true);
    }
    let mut sv = SegmentValues::new(&entries, sig, Some(x), true);
    Ok(sv.get(0, entries.len(), entries.len()).contains(&x))
}

/// Searches for a witness of `a ⊴ b` with terms of depth ≤ `max_depth`.
///
/// Blocks are tried in lexicographic order of their index lists, and for a
/// block the first term in enumeration order with the right value is used.
/// Complete when every operation has arity ≥ 2 and `max_depth ≥ |b|`.
pub fn find_reduction(
    a: &[u64],
    b: &[u64],
    sig: &Signature,
    max_depth: usize,
) -> Option<ReductionWitness> {
    let mut finder = Finder {
        b,
        sig,
        depth: effective_depth(sig, b.len(), max_depth),
        enumerator: TermEnumerator::new(sig),
        failed: HashSet::new(),
        inflationary: sig.all_inflationary(),
        max_leaves: max_leaves(sig, max_depth).min(b.len()),
    };
    let mut blocks = Vec::new();
    finder.entry(a, 0, 0, &mut blocks).then_some(ReductionWitness { blocks })
}

struct Finder<'a> {
    b: &'a [u64],
    sig: &'a Signature,
    depth: usize,
    enumerator: TermEnumerator<'a>,
    /// (entry of `a`, first free position of `b`) pairs known to fail.
    failed: HashSet<(usize, usize)>,
    inflationary: bool,
    max_leaves: usize,
}

impl Finder<'_> {
    fn entry(&mut self, a: &[u64], n: usize, start: usize, blocks: &mut Vec<Block>) -> bool {
        if n == a.len() {
            return true;
        }
        if self.failed.contains(&(n, start)) {
            return false;
        }
        let mut idx = Vec::new();
        if self.extend(a, n, start, &mut idx, blocks) {
            return true;
        }
        self.failed.insert((n, start));
        false
    }

    fn extend(
        &mut self,
        a: &[u64],
        n: usize,
        lo: usize,
        idx: &mut Vec<usize>,
        blocks: &mut Vec<Block>,
    ) -> bool {
        if idx.len() >= self.max_leaves {
            return false;
        }
        for i in lo..self.b.len() {
            if self.inflationary && self.b[i] > a[n] {
                continue;
            }
            idx.push(i);
            if let Some(term) = self.term_for(idx, a[n]) {
                blocks.push(Block {
                    indices: idx.clone(),
                    term,
                });
                if self.entry(a, n + 1, i + 1, blocks) {
                    return true;
                }
                blocks.pop();
            }
            if self.extend(a, n, i + 1, idx, blocks) {
                return true;
            }
            idx.pop();
        }
        false
    }

    fn term_for(&mut self, idx: &[usize], target: u64) -> Option<Term> {
        let vals: Vec<u64> = idx.iter().map(|&i| self.b[i]).collect();
        let cap = self.inflationary.then_some(target);
        let mut sv = SegmentValues::new(&vals, self.sig, cap, false);
        let depth = effective_depth(self.sig, vals.len(), self.depth);
        if !sv.get(0, vals.len(), depth).contains(&target) {
            return None;
        }
        self.enumerator
            .terms(vals.len(), depth)
            .iter()
            .find(|t| t.eval(&vals).ok() == Some(target))
            .cloned()
    }
}

/// How the entries of one stage arise from the previous stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageLink {
    /// The first stage; it has no predecessor.
    Root,
    /// Explicit blocks for a finite prefix of the stage.
    Explicit(Vec<Block>),
    /// Entry `j` is entry `j + s` of the previous stage.
    Shift(usize),
    /// Entry `j` is `term` applied to previous entries `j·size .. (j+1)·size`.
    Blocks { size: usize, term: Term },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub seq: StreamSeq,
    pub link: StageLink,
}

/// Output of [`diagonalize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagonal {
    pub values: Vec<u64>,
    /// `(stage, index)` each entry was taken from.
    pub picks: Vec<(usize, usize)>,
    /// `witnesses[m]` certifies `⟨b(m), …⟩ ⊴` a prefix of stage
    /// `min(m, stages − 1)`.
    pub witnesses: Vec<ReductionWitness>,
}

impl Diagonal {
    pub fn stage_for(&self, m: usize, stages: usize) -> usize {
        m.min(stages - 1)
    }
}

/// Finite-stage diagonal construction for a chain of reductions
/// `stage₀ ≥ stage₁ ≥ …`: builds `b` of the given length with `b − n`
/// reducing to stage `n` (the last stage for `n` past the end). Entry `n` is
/// the lowest entry of its stage whose expansion into every earlier stage
/// lies beyond everything already consumed there.
pub fn diagonalize(stages: &[Stage], length: usize) -> Result<Diagonal> {
    if stages.is_empty() {
        return Err(Error::Invalid("diagonalize needs at least one stage".into()));
    }
    const SCAN_CAP: usize = 1 << 16;
    let last = stages.len() - 1;
    let mut consumed: Vec<Option<usize>> = vec![None; stages.len()];
    let mut picks = Vec::with_capacity(length);
    let mut values = Vec::with_capacity(length);
    for n in 0..length {
        let s = n.min(last);
        let start = consumed[s].map_or(0, |c| c + 1);
        let mut chosen = None;
        for j in start..start + SCAN_CAP {
            let mut ok = true;
            for m in 0..=s {
                let (idx, _) = expand(stages, s, j, m)?;
                if consumed[m].is_some_and(|c| idx[0] <= c) {
                    ok = false;
                    break;
                }
            }
            if ok {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen.ok_or(Error::NeedPrefix {
            index: start + SCAN_CAP,
        })?;
        for m in 0..=s {
            let (idx, _) = expand(stages, s, j, m)?;
            consumed[m] = Some(*idx.last().expect("nonempty expansion"));
        }
        values.push(stages[s].seq.at(j)?);
        picks.push((s, j));
    }
    let mut witnesses = Vec::with_capacity(length);
    for m in 0..length {
        let target = m.min(last);
        let mut blocks = Vec::new();
        for &(s, j) in &picks[m..] {
            let (indices, term) = expand(stages, s, j, target)?;
            blocks.push(Block { indices, term });
        }
        witnesses.push(ReductionWitness { blocks });
    }
    Ok(Diagonal {
        values,
        picks,
        witnesses,
    })
}

fn link_block(stages: &[Stage], k: usize, j: usize) -> Result<Block> {
    match &stages[k].link {
        StageLink::Root => Err(Error::Invalid(format!(
            "stage {k} has no link to stage {}",
            k.wrapping_sub(1)
        ))),
        StageLink::Explicit(blocks) => blocks.get(j).cloned().ok_or(Error::NeedPrefix { index: j }),
        StageLink::Shift(s) => Ok(Block {
            indices: vec![j + s],
            term: Term::Id,
        }),
        StageLink::Blocks { size, term } => {
            if term.arity() != *size || *size == 0 {
                return Err(Error::Arity {
                    expected: *size,
                    got: term.arity(),
                });
            }
            Ok(Block {
                indices: (j * size..(j + 1) * size).collect(),
                term: term.clone(),
            })
        }
    }
}

/// Positions and composed term expressing entry `j` of stage `k` over stage
/// `m ≤ k`. Every link used is checked against the stage values.
fn expand(stages: &[Stage], k: usize, j: usize, m: usize) -> Result<(Vec<usize>, Term)> {
    if k == m {
        return Ok((vec![j], Term::Id));
    }
    let block = link_block(stages, k, j)?;
    let prev = &stages[k - 1].seq;
    let args = block
        .indices
        .iter()
        .map(|&i| prev.at(i))
        .collect::<Result<Vec<_>>>()?;
    if block.term.eval(&args)? != stages[k].seq.at(j)? {
        return Err(Error::Precondition(format!(
            "stage {k} entry {j} is not certified by its link to stage {}",
            k - 1
        )));
    }
    let mut indices = Vec::new();
    let mut subs = Vec::with_capacity(block.indices.len());
    for &i in &block.indices {
        let (idx, t) = expand(stages, k - 1, i, m)?;
        indices.extend(idx);
        subs.push(t);
    }
    Ok((indices, block.term.substitute(&subs)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::OpDef;
    use std::sync::Arc;

    fn plus_term() -> Term {
        Term::basic(&Arc::new(OpDef::plus()))
    }

    /// Independent subset-sum oracle.
    fn subset_sums(b: &[u64]) -> BTreeSet<u64> {
        let mut out = BTreeSet::new();
        for mask in 1u32..(1 << b.len()) {
            out.insert((0..b.len()).filter(|i| mask >> i & 1 == 1).map(|i| b[i]).sum());
        }
        out
    }

    #[test]
    fn check_witness_examples() {
        let sig = Signature::plus();
        let w = ReductionWitness {
            blocks: vec![Block {
                indices: vec![0, 1],
                term: plus_term(),
            }],
        };
        assert!(check_witness(&[3], &[1, 2], &w, &sig).unwrap());
        assert!(!check_witness(&[4], &[1, 2], &w, &sig).unwrap());
        assert!(check_witness(&[1], &[1, 2], &ReductionWitness::identity([0]), &sig).unwrap());
        let bad = ReductionWitness {
            blocks: vec![
                Block {
                    indices: vec![0, 1],
                    term: plus_term(),
                },
                Block {
                    indices: vec![0],
                    term: Term::Id,
                },
            ],
        };
        assert!(check_witness(&[3, 1], &[1, 2], &bad, &sig).is_err());
        let out_of_range = ReductionWitness::identity([5]);
        assert!(check_witness(&[1], &[1, 2], &out_of_range, &sig).is_err());
        let arity = ReductionWitness {
            blocks: vec![Block {
                indices: vec![0],
                term: plus_term(),
            }],
        };
        assert!(matches!(
            check_witness(&[1], &[1, 2], &arity, &sig),
            Err(Error::Arity { .. })
        ));
    }

    #[test]
    fn foreign_operation_is_rejected() {
        let w = ReductionWitness {
            blocks: vec![Block {
                indices: vec![0, 1],
                term: Term::basic(&Arc::new(OpDef::shifted_mul())),
            }],
        };
        assert!(check_witness(&[5], &[1, 2], &w, &Signature::plus()).is_err());
    }

    #[test]
    fn find_reduction_examples() {
        let sig = Signature::plus();
        assert!(find_reduction(&[5], &[1, 2], &sig, 4).is_none());
        let b = [1, 2, 4, 8];
        let w = find_reduction(&[3, 12], &b, &sig, 4).unwrap();
        assert!(check_witness(&[3, 12], &b, &w, &sig).unwrap());
        assert_eq!(w.blocks[0].indices, vec![0, 1]);
        assert_eq!(w.blocks[1].indices, vec![2, 3]);
        let same = [4, 9, 1];
        let w = find_reduction(&same, &same, &sig, 3).unwrap();
        assert_eq!(w, ReductionWitness::identity([0, 1, 2]));
    }

    #[test]
    fn find_reduction_prefers_least_indices() {
        let sig = Signature::plus();
        // 3 = 1 + 2 or 3 itself; lexicographic order picks [0, 1] first
        let w = find_reduction(&[3], &[1, 2, 3], &sig, 3).unwrap();
        assert_eq!(w.blocks[0].indices, vec![0, 1]);
    }

    #[test]
    fn fr_examples() {
        let sig = Signature::plus();
        assert_eq!(
            fr_enumerate(&[1, 2, 4], &sig, 3),
            (1..=7).collect::<BTreeSet<u64>>()
        );
        assert_eq!(fr_enumerate(&[9], &sig, 3), BTreeSet::from([9]));
        let smul = Signature::single(OpDef::shifted_mul());
        assert_eq!(fr_enumerate(&[1, 2], &smul, 2), BTreeSet::from([1, 2, 5]));
    }

    #[test]
    fn fr_matches_subset_sums_exhaustively() {
        let sig = Signature::plus();
        // strictly increasing sequences of length ≤ 4 over [1, 9]
        for mask in 1u32..(1 << 9) {
            if mask.count_ones() > 4 {
                continue;
            }
            let b: Vec<u64> = (0..9).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
            assert_eq!(fr_enumerate(&b, &sig, b.len()), subset_sums(&b), "{b:?}");
        }
    }

    #[test]
    fn fr_member_examples() {
        let sig = Signature::plus();
        let p2 = StreamSeq::powers(2);
        assert!(fr_member(12, &p2, 2, &sig).unwrap());
        assert!(fr_member(6, &p2, 0, &sig).unwrap());
        assert!(!fr_member(13, &p2, 1, &sig).unwrap());
        assert!(fr_member(p2.at(3).unwrap(), &p2, 3, &sig).unwrap());
        let not_increasing = StreamSeq::finite(vec![1, 3, 2, 8]);
        assert!(fr_member(5, &not_increasing, 0, &sig).is_err());
        let zero = Signature::single(OpDef::const_zero());
        assert!(matches!(
            fr_member(0, &p2, 0, &zero),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn fr_member_agrees_with_prefix_enumeration() {
        let sig = Signature::plus();
        let seq = StreamSeq::with_rule(vec![2, 3], Rule::Geometric { start: 1, ratio: 5 });
        for n in 1..=6 {
            let prefix = seq.take(n).unwrap();
            if prefix.windows(2).any(|w| w[0] >= w[1]) {
                continue;
            }
            for x in fr_enumerate(&prefix, &sig, n) {
                assert!(fr_member(x, &seq, 0, &sig).unwrap(), "{x} from {prefix:?}");
            }
        }
    }

    #[test]
    fn stream_tail_and_divisors() {
        let p2 = StreamSeq::powers(2);
        assert_eq!(p2.tail(3).take(3).unwrap(), vec![8, 16, 32]);
        assert_eq!(p2.common_divisor_from(0), Some(1));
        assert_eq!(p2.common_divisor_from(2), Some(4));
        let s = StreamSeq::with_rule(vec![6, 9], Rule::Arithmetic { start: 0, step: 3 });
        assert_eq!(s.tail(1).take(3).unwrap(), vec![9, 6, 9]);
        assert_eq!(s.common_divisor_from(0), Some(3));
        let fin = StreamSeq::finite(vec![1, 2]);
        assert_eq!(fin.get(2), None);
        assert_eq!(fin.at(2), Err(Error::NeedPrefix { index: 2 }));
        let back = StreamSeq::from_json(&s.tail(4).to_json()).unwrap();
        assert_eq!(back, s.tail(4));
    }

    #[test]
    fn composed_witnesses_check() {
        let sig = Signature::plus();
        let c = [1, 2, 4, 8, 16, 32];
        let b = [3, 12, 48];
        let a = [15, 48];
        let inner = find_reduction(&b, &c, &sig, 6).unwrap();
        let outer = find_reduction(&a, &b, &sig, 3).unwrap();
        let w = compose_witnesses(&outer, &inner).unwrap();
        assert!(check_witness(&a, &c, &w, &sig).unwrap());
        assert_eq!(w.blocks[0].indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn diagonalize_single_stage() {
        let a = StreamSeq::powers(3);
        let d = diagonalize(
            &[Stage {
                seq: a.clone(),
                link: StageLink::Root,
            }],
            4,
        )
        .unwrap();
        assert_eq!(d.values, a.take(4).unwrap());
    }

    #[test]
    fn diagonalize_shift_chain() {
        let a = StreamSeq::powers(2);
        let stages: Vec<Stage> = (0..3)
            .map(|k| Stage {
                seq: a.tail(k),
                link: if k == 0 {
                    StageLink::Root
                } else {
                    StageLink::Shift(1)
                },
            })
            .collect();
        let d = diagonalize(&stages, 3).unwrap();
        let sig = Signature::plus();
        for m in 0..3 {
            let stage = &stages[m].seq;
            let n = d.witnesses[m].max_index().unwrap() + 1;
            assert!(check_witness(&d.values[m..], &stage.take(n).unwrap(), &d.witnesses[m], &sig)
                .unwrap());
        }
    }

    #[test]
    fn diagonalize_pairwise_sums() {
        let sig = Signature::plus();
        let stages = vec![
            Stage {
                seq: StreamSeq::powers(2),
                link: StageLink::Root,
            },
            Stage {
                seq: StreamSeq::with_rule(vec![], Rule::Geometric { start: 3, ratio: 4 }),
                link: StageLink::Blocks {
                    size: 2,
                    term: plus_term(),
                },
            },
        ];
        let d = diagonalize(&stages, 2).unwrap();
        assert_eq!(d.values, vec![1, 12]);
        for m in 0..2 {
            let stage = &stages[m].seq;
            let n = d.witnesses[m].max_index().unwrap() + 1;
            assert!(check_witness(&d.values[m..], &stage.take(n).unwrap(), &d.witnesses[m], &sig)
                .unwrap());
        }
        // b − 0 ⊴ powers of two via blocks [0] and [2, 3]
        assert_eq!(d.witnesses[0].blocks[1].indices, vec![2, 3]);
    }

    #[test]
    fn diagonalize_reports_short_prefix() {
        let stages = vec![
            Stage {
                seq: StreamSeq::finite(vec![1, 2, 4]),
                link: StageLink::Root,
            },
            Stage {
                seq: StreamSeq::finite(vec![3]),
                link: StageLink::Explicit(vec![Block {
                    indices: vec![0, 1],
                    term: plus_term(),
                }]),
            },
        ];
        assert!(matches!(
            diagonalize(&stages, 3),
            Err(Error::NeedPrefix { .. })
        ));
    }

    #[test]
    fn diagonalize_rejects_uncertified_links() {
        let stages = vec![
            Stage {
                seq: StreamSeq::powers(2),
                link: StageLink::Root,
            },
            Stage {
                seq: StreamSeq::finite(vec![4, 100]),
                link: StageLink::Blocks {
                    size: 2,
                    term: plus_term(),
                },
            },
        ];
        assert!(matches!(
            diagonalize(&stages, 2),
            Err(Error::Precondition(_))
        ));
    }
}
