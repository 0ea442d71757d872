//! Operation signatures on ℕ and the orderly-term algebra over them.
//!
//! An orderly term is a tree whose leaves are the identity function and whose
//! inner nodes apply an operation of the signature to children that consume
//! consecutive, disjoint blocks of the argument list. The arity of a term is
//! therefore the number of its leaves.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Something that can be evaluated on ℕ^arity and, when its fibers are known
/// to be finite, can enumerate them.
pub trait Operation {
    fn arity(&self) -> usize;

    /// Evaluates on exactly `arity()` arguments.
    fn apply(&self, args: &[u64]) -> u64;

    /// Every argument tuple mapped to `value`, or `None` when the fibers of
    /// this operation are not known to be finite.
    fn fiber(&self, value: u64) -> Option<Vec<Vec<u64>>>;

    fn describe(&self) -> String;
}

/// What to do with arguments missing from a [`OpKind::Table`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Fallback {
    Plus,
    Const(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OpKind {
    /// Sum of all arguments.
    Plus,
    /// `(a+1)(b+1)…−1`; for two arguments this is `a + b + ab`.
    ShiftedMul,
    ConstZero,
    /// Projection to the first argument.
    First,
    /// Truncated subtraction `a ∸ b` (binary only).
    Monus,
    /// Explicit values on finitely many tuples, a fallback rule elsewhere.
    Table {
        entries: BTreeMap<Vec<u64>, u64>,
        fallback: Fallback,
    },
}

/// Declared properties of an operation. Each declared flag is checked by
/// sampling when the operation is constructed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Flags {
    /// Every fiber `f⁻¹[{c}]` is finite.
    pub finite_fibers: bool,
    /// `f(x̄) ≥ max x̄`.
    pub inflationary: bool,
    /// `f(x̄) > max x̄` whenever all arguments are positive.
    pub strictly_increasing_safe: bool,
    pub associative: bool,
}

impl Flags {
    pub fn all() -> Self {
        Flags {
            finite_fibers: true,
            inflationary: true,
            strictly_increasing_safe: true,
            associative: true,
        }
    }

    fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.finite_fibers {
            out.push("finite_fibers".to_string());
        }
        if self.inflationary {
            out.push("inflationary".to_string());
        }
        if self.strictly_increasing_safe {
            out.push("strictly_increasing_safe".to_string());
        }
        if self.associative {
            out.push("associative".to_string());
        }
        out
    }

    fn from_names(names: &[String]) -> Result<Self> {
        let mut flags = Flags::default();
        for n in names {
            match n.as_str() {
                "finite_fibers" => flags.finite_fibers = true,
                "inflationary" => flags.inflationary = true,
                "strictly_increasing_safe" => flags.strictly_increasing_safe = true,
                "associative" => flags.associative = true,
                other => return Err(Error::Invalid(format!("unknown flag `{other}`"))),
            }
        }
        Ok(flags)
    }
}

/// A named operation of fixed positive arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OpDef {
    name: String,
    arity: usize,
    kind: OpKind,
    flags: Flags,
}

const FLAG_SAMPLE_BOUND: u64 = 64;
const FIBER_CHECK_MAX: u64 = 32;

impl OpDef {
    /// Builds an operation and validates every declared flag by sampling.
    pub fn new(name: impl Into<String>, arity: usize, kind: OpKind, flags: Flags) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Invalid("operation name must be nonempty".into()));
        }
        if arity == 0 {
            return Err(Error::Invalid(format!("operation `{name}` is nullary")));
        }
        match &kind {
            OpKind::Monus if arity != 2 => {
                return Err(Error::Invalid("monus is binary".into()));
            }
            OpKind::Table { entries, .. } => {
                if let Some(k) = entries.keys().find(|k| k.len() != arity) {
                    return Err(Error::Invalid(format!(
                        "table key {k:?} does not have length {arity}"
                    )));
                }
            }
            _ => {}
        }
        let op = OpDef {
            name,
            arity,
            kind,
            flags,
        };
        op.validate_flags()?;
        Ok(op)
    }

    pub fn plus() -> Self {
        Self::new("plus", 2, OpKind::Plus, Flags::all()).expect("built-in")
    }

    pub fn shifted_mul() -> Self {
        Self::new("shifted-mul", 2, OpKind::ShiftedMul, Flags::all()).expect("built-in")
    }

    pub fn const_zero() -> Self {
        let flags = Flags {
            associative: true,
            ..Flags::default()
        };
        Self::new("zero", 2, OpKind::ConstZero, flags).expect("built-in")
    }

    pub fn first() -> Self {
        let flags = Flags {
            associative: true,
            ..Flags::default()
        };
        Self::new("first", 2, OpKind::First, flags).expect("built-in")
    }

    pub fn monus() -> Self {
        Self::new("monus", 2, OpKind::Monus, Flags::default()).expect("built-in")
    }

    /// Looks up a built-in operation by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "plus" | "+" => Some(Self::plus()),
            "shifted-mul" | "smul" => Some(Self::shifted_mul()),
            "zero" | "const-zero" => Some(Self::const_zero()),
            "first" => Some(Self::first()),
            "monus" => Some(Self::monus()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    fn eval_raw(&self, args: &[u64]) -> u64 {
        match &self.kind {
            OpKind::Plus => args.iter().fold(0u64, |acc, &a| acc.saturating_add(a)),
            OpKind::ShiftedMul => args
                .iter()
                .fold(1u64, |acc, &a| acc.saturating_mul(a.saturating_add(1)))
                - 1,
            OpKind::ConstZero => 0,
            OpKind::First => args[0],
            OpKind::Monus => args[0].saturating_sub(args[1]),
            OpKind::Table { entries, fallback } => match entries.get(args) {
                Some(&v) => v,
                None => match fallback {
                    Fallback::Plus => args.iter().fold(0u64, |acc, &a| acc.saturating_add(a)),
                    Fallback::Const(c) => *c,
                },
            },
        }
    }

    /// Fiber enumeration by kind, ignoring the declared flag.
    fn kind_fiber(&self, value: u64) -> Option<Vec<Vec<u64>>> {
        match &self.kind {
            OpKind::Plus => {
                let mut out = Vec::new();
                weak_compositions(value, self.arity, &mut Vec::new(), &mut out);
                Some(out)
            }
            OpKind::ShiftedMul => {
                let mut out = Vec::new();
                ordered_factorizations(value.checked_add(1)?, self.arity, &mut Vec::new(), &mut out);
                Some(out)
            }
            OpKind::Table {
                entries,
                fallback: Fallback::Plus,
            } => {
                let key_max = entries.keys().flatten().copied().max().unwrap_or(0);
                let bound = value.max(key_max);
                let mut out = Vec::new();
                scan_box(self.arity, bound, &mut |t| {
                    if self.eval_raw(t) == value {
                        out.push(t.to_vec());
                    }
                });
                Some(out)
            }
            _ => None,
        }
    }

    fn validate_flags(&self) -> Result<()> {
        let samples = sample_tuples(self.arity, FLAG_SAMPLE_BOUND, 2048, 0x5eed);
        if self.flags.inflationary {
            if let Some(t) = samples
                .iter()
                .find(|t| self.eval_raw(t) < t.iter().copied().max().unwrap_or(0))
            {
                return Err(self.flag_error("inflationary", t));
            }
        }
        if self.flags.strictly_increasing_safe {
            if let Some(t) = samples.iter().find(|t| {
                t.iter().all(|&a| a > 0) && self.eval_raw(t) <= t.iter().copied().max().unwrap_or(0)
            }) {
                return Err(self.flag_error("strictly_increasing_safe", t));
            }
        }
        if self.flags.associative {
            if self.arity != 2 {
                return Err(Error::Invalid(format!(
                    "`{}`: associativity needs a binary operation",
                    self.name
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(0xa550c);
            let mut triples: Vec<[u64; 3]> = Vec::new();
            for a in 0..=8 {
                for b in 0..=8 {
                    for c in 0..=8 {
                        triples.push([a, b, c]);
                    }
                }
            }
            for _ in 0..4096 {
                triples.push([
                    rng.gen_range(0..=FLAG_SAMPLE_BOUND),
                    rng.gen_range(0..=FLAG_SAMPLE_BOUND),
                    rng.gen_range(0..=FLAG_SAMPLE_BOUND),
                ]);
            }
            for [a, b, c] in triples {
                let left = self.eval_raw(&[self.eval_raw(&[a, b]), c]);
                let right = self.eval_raw(&[a, self.eval_raw(&[b, c])]);
                if left != right {
                    return Err(self.flag_error("associative", &[a, b, c]));
                }
            }
        }
        if self.flags.finite_fibers {
            let (box_bound, c_max) = match self.arity {
                1 | 2 => (FLAG_SAMPLE_BOUND, FIBER_CHECK_MAX),
                3 => (32, FIBER_CHECK_MAX),
                _ => (12, 12),
            };
            let mut counts = vec![0usize; c_max as usize + 1];
            scan_box(self.arity, box_bound, &mut |t| {
                let v = self.eval_raw(t);
                if v <= c_max {
                    counts[v as usize] += 1;
                }
            });
            for c in 0..=c_max {
                let Some(fiber) = self.kind_fiber(c) else {
                    return Err(Error::Invalid(format!(
                        "`{}`: finite_fibers declared but no fiber enumeration exists for this kind",
                        self.name
                    )));
                };
                if fiber.len() != counts[c as usize] {
                    return Err(Error::Invalid(format!(
                        "`{}`: finite_fibers fails at value {c}: scan found {} preimages, enumeration {}",
                        self.name,
                        counts[c as usize],
                        fiber.len()
                    )));
                }
            }
        }
        Ok(())
    }

    fn flag_error(&self, flag: &str, at: &[u64]) -> Error {
        Error::Invalid(format!(
            "`{}`: declared flag {flag} fails at {at:?}",
            self.name
        ))
    }

    pub fn to_spec(&self) -> OpSpec {
        let (kind, params) = match &self.kind {
            OpKind::Plus => ("plus", Value::Null),
            OpKind::ShiftedMul => ("shifted-mul", Value::Null),
            OpKind::ConstZero => ("const-zero", Value::Null),
            OpKind::First => ("first", Value::Null),
            OpKind::Monus => ("monus", Value::Null),
            OpKind::Table { entries, fallback } => {
                let entries: Vec<Value> = entries.iter().map(|(k, v)| json!([k, v])).collect();
                let fallback = match fallback {
                    Fallback::Plus => json!("plus"),
                    Fallback::Const(c) => json!({ "const": c }),
                };
                ("table", json!({ "entries": entries, "fallback": fallback }))
            }
        };
        OpSpec {
            name: self.name.clone(),
            arity: self.arity,
            kind: kind.to_string(),
            params,
            flags: self.flags.names(),
        }
    }

    pub fn from_spec(spec: &OpSpec) -> Result<Self> {
        let kind = match spec.kind.as_str() {
            "plus" => OpKind::Plus,
            "shifted-mul" => OpKind::ShiftedMul,
            "const-zero" | "zero" => OpKind::ConstZero,
            "first" => OpKind::First,
            "monus" => OpKind::Monus,
            "table" => {
                let entries = spec
                    .params
                    .get("entries")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::Invalid("table needs params.entries".into()))?;
                let mut map = BTreeMap::new();
                for e in entries {
                    let (k, v): (Vec<u64>, u64) = serde_json::from_value(e.clone())?;
                    map.insert(k, v);
                }
                let fallback = match spec.params.get("fallback") {
                    None => Fallback::Plus,
                    Some(Value::String(s)) if s == "plus" => Fallback::Plus,
                    Some(v) => match v.get("const").and_then(Value::as_u64) {
                        Some(c) => Fallback::Const(c),
                        None => return Err(Error::Invalid(format!("bad table fallback {v}"))),
                    },
                };
                OpKind::Table {
                    entries: map,
                    fallback,
                }
            }
            other => return Err(Error::Invalid(format!("unknown operation kind `{other}`"))),
        };
        OpDef::new(spec.name.clone(), spec.arity, kind, Flags::from_names(&spec.flags)?)
    }
}

impl Operation for OpDef {
    fn arity(&self) -> usize {
        self.arity
    }

    fn apply(&self, args: &[u64]) -> u64 {
        debug_assert_eq!(args.len(), self.arity);
        self.eval_raw(args)
    }

    fn fiber(&self, value: u64) -> Option<Vec<Vec<u64>>> {
        if !self.flags.finite_fibers {
            return None;
        }
        self.kind_fiber(value)
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// JSON form of an operation: `{name, arity, kind, params, flags}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpSpec {
    pub name: String,
    pub arity: usize,
    pub kind: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureSpec {
    pub ops: Vec<OpSpec>,
}

/// A finite collection of operations with pairwise distinct names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    ops: Vec<Arc<OpDef>>,
}

impl Signature {
    pub fn new(ops: Vec<OpDef>) -> Result<Self> {
        for (i, a) in ops.iter().enumerate() {
            if ops[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Invalid(format!("duplicate operation name `{}`", a.name)));
            }
        }
        Ok(Signature {
            ops: ops.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn single(op: OpDef) -> Self {
        Signature {
            ops: vec![Arc::new(op)],
        }
    }

    pub fn plus() -> Self {
        Self::single(OpDef::plus())
    }

    /// Built-in signatures: a single built-in operation name, or several
    /// joined with `,` (e.g. `plus,shifted-mul`).
    pub fn builtin(name: &str) -> Option<Self> {
        let ops: Option<Vec<OpDef>> = name.split(',').map(|n| OpDef::builtin(n.trim())).collect();
        Signature::new(ops?).ok()
    }

    pub fn ops(&self) -> &[Arc<OpDef>] {
        &self.ops
    }

    pub fn get(&self, name: &str) -> Option<&Arc<OpDef>> {
        self.ops.iter().find(|o| o.name == name)
    }

    pub fn contains(&self, op: &OpDef) -> bool {
        self.get(&op.name).is_some_and(|o| **o == *op)
    }

    pub fn min_arity(&self) -> usize {
        self.ops.iter().map(|o| o.arity).min().unwrap_or(0)
    }

    pub fn max_arity(&self) -> usize {
        self.ops.iter().map(|o| o.arity).max().unwrap_or(0)
    }

    /// True when every operation has arity at least two, the case in which
    /// bounded term enumeration is complete.
    pub fn all_arities_at_least_two(&self) -> bool {
        self.ops.iter().all(|o| o.arity >= 2)
    }

    pub fn all_inflationary(&self) -> bool {
        self.ops.iter().all(|o| o.flags.inflationary)
    }

    pub fn all_finite_fibers(&self) -> bool {
        self.ops.iter().all(|o| o.flags.finite_fibers)
    }

    /// True when every operation maps multiples of any `g` to multiples of
    /// `g`. Only the arithmetic built-in kinds are recognised.
    pub fn preserves_divisibility(&self) -> bool {
        self.ops.iter().all(|o| {
            matches!(
                o.kind,
                OpKind::Plus | OpKind::ShiftedMul | OpKind::ConstZero | OpKind::First
            )
        })
    }

    pub fn to_spec(&self) -> SignatureSpec {
        SignatureSpec {
            ops: self.ops.iter().map(|o| o.to_spec()).collect(),
        }
    }

    pub fn from_spec(spec: &SignatureSpec) -> Result<Self> {
        let ops = spec.ops.iter().map(OpDef::from_spec).collect::<Result<Vec<_>>>()?;
        Signature::new(ops)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self.to_spec()).expect("signature spec serializes")
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let spec: SignatureSpec = serde_json::from_value(v.clone())?;
        Self::from_spec(&spec)
    }
}

/// An orderly term: the identity, or an operation applied to orderly terms
/// whose arguments are consecutive blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Id,
    Apply(Arc<OpDef>, Vec<Term>),
}

impl Term {
    pub fn apply(op: &Arc<OpDef>, children: Vec<Term>) -> Result<Self> {
        if children.len() != op.arity {
            return Err(Error::Arity {
                expected: op.arity,
                got: children.len(),
            });
        }
        Ok(Term::Apply(op.clone(), children))
    }

    /// The term `op(x₁, …, x_n)` applying one operation to identities.
    pub fn basic(op: &Arc<OpDef>) -> Self {
        Term::Apply(op.clone(), vec![Term::Id; op.arity])
    }

    /// Left-nested fold of a binary operation over `n ≥ 1` leaves.
    pub fn left_fold(op: &Arc<OpDef>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("fold over zero leaves".into()));
        }
        if op.arity != 2 && n > 1 {
            return Err(Error::Invalid(format!("`{}` is not binary", op.name)));
        }
        let mut t = Term::Id;
        for _ in 1..n {
            t = Term::Apply(op.clone(), vec![t, Term::Id]);
        }
        Ok(t)
    }

    /// Number of leaves.
    pub fn arity(&self) -> usize {
        match self {
            Term::Id => 1,
            Term::Apply(_, ch) => ch.iter().map(Term::arity).sum(),
        }
    }

    /// Tree depth; the identity has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Term::Id => 1,
            Term::Apply(_, ch) => 1 + ch.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    pub fn ops(&self) -> Vec<&Arc<OpDef>> {
        let mut out = Vec::new();
        self.collect_ops(&mut out);
        out
    }

    fn collect_ops<'a>(&'a self, out: &mut Vec<&'a Arc<OpDef>>) {
        if let Term::Apply(op, ch) = self {
            out.push(op);
            for c in ch {
                c.collect_ops(out);
            }
        }
    }

    pub fn eval(&self, args: &[u64]) -> Result<u64> {
        let arity = self.arity();
        if args.len() != arity {
            return Err(Error::Arity {
                expected: arity,
                got: args.len(),
            });
        }
        Ok(self.eval_unchecked(args))
    }

    fn eval_unchecked(&self, args: &[u64]) -> u64 {
        match self {
            Term::Id => args[0],
            Term::Apply(op, ch) => {
                let mut vals = Vec::with_capacity(ch.len());
                let mut at = 0;
                for c in ch {
                    let k = c.arity();
                    vals.push(c.eval_unchecked(&args[at..at + k]));
                    at += k;
                }
                op.eval_raw(&vals)
            }
        }
    }

    /// Replaces the leaves, left to right, by `subs`. The result is the
    /// orderly composition of `self` with `subs`.
    pub fn substitute(&self, subs: &[Term]) -> Result<Term> {
        let arity = self.arity();
        if subs.len() != arity {
            return Err(Error::Arity {
                expected: arity,
                got: subs.len(),
            });
        }
        let mut iter = subs.iter();
        Ok(self.substitute_with(&mut iter))
    }

    fn substitute_with<'a>(&self, subs: &mut impl Iterator<Item = &'a Term>) -> Term {
        match self {
            Term::Id => subs.next().expect("arity checked").clone(),
            Term::Apply(op, ch) => {
                Term::Apply(op.clone(), ch.iter().map(|c| c.substitute_with(subs)).collect())
            }
        }
    }

    /// Nested-array JSON: `["id"]` or `[opname, child, …]`.
    pub fn to_json(&self) -> Value {
        match self {
            Term::Id => json!(["id"]),
            Term::Apply(op, ch) => {
                let mut v = vec![Value::String(op.name.clone())];
                v.extend(ch.iter().map(Term::to_json));
                Value::Array(v)
            }
        }
    }

    pub fn from_json(v: &Value, sig: &Signature) -> Result<Self> {
        let arr = v
            .as_array()
            .ok_or_else(|| Error::Invalid(format!("term must be an array, got {v}")))?;
        let head = arr
            .first()
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Invalid(format!("term head must be a string: {v}")))?;
        if head == "id" {
            if arr.len() != 1 {
                return Err(Error::Invalid("identity takes no children".into()));
            }
            return Ok(Term::Id);
        }
        let op = sig
            .get(head)
            .ok_or_else(|| Error::Invalid(format!("operation `{head}` not in signature")))?;
        let children = arr[1..]
            .iter()
            .map(|c| Term::from_json(c, sig))
            .collect::<Result<Vec<_>>>()?;
        Term::apply(op, children)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Id => write!(f, "x"),
            Term::Apply(op, ch) => {
                write!(f, "{}(", op.name)?;
                for (i, c) in ch.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Operation for Term {
    fn arity(&self) -> usize {
        Term::arity(self)
    }

    fn apply(&self, args: &[u64]) -> u64 {
        self.eval_unchecked(args)
    }

    fn fiber(&self, value: u64) -> Option<Vec<Vec<u64>>> {
        match self {
            Term::Id => Some(vec![vec![value]]),
            Term::Apply(op, ch) => {
                let mut out = Vec::new();
                for outer in op.fiber(value)? {
                    let mut partial: Vec<Vec<u64>> = vec![Vec::new()];
                    for (c, &v) in ch.iter().zip(&outer) {
                        let inner = c.fiber(v)?;
                        let mut next = Vec::with_capacity(partial.len() * inner.len());
                        for p in &partial {
                            for i in &inner {
                                let mut t = p.clone();
                                t.extend_from_slice(i);
                                next.push(t);
                            }
                        }
                        partial = next;
                        if partial.is_empty() {
                            break;
                        }
                    }
                    out.extend(partial);
                }
                out.sort();
                out.dedup();
                Some(out)
            }
        }
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}

/// All orderly terms over `sig` of the given arity and depth at most
/// `max_depth`, in a fixed deterministic order (identity first, then by
/// operation, block split, and children in enumeration order).
///
/// When every operation has arity ≥ 2 a term with `m` leaves has depth at most
/// `m`, so `max_depth ≥ arity` yields every orderly term of that arity.
pub fn enumerate_orderly_terms(sig: &Signature, arity: usize, max_depth: usize) -> Vec<Term> {
    TermEnumerator::new(sig).terms(arity, max_depth).to_vec()
}

/// Memoized enumerator; reuse it when many (arity, depth) pairs are needed.
pub struct TermEnumerator<'a> {
    sig: &'a Signature,
    memo: HashMap<(usize, usize), Arc<Vec<Term>>>,
}

impl<'a> TermEnumerator<'a> {
    pub fn new(sig: &'a Signature) -> Self {
        TermEnumerator {
            sig,
            memo: HashMap::new(),
        }
    }

    pub fn terms(&mut self, arity: usize, depth: usize) -> Arc<Vec<Term>> {
        if let Some(t) = self.memo.get(&(arity, depth)) {
            return t.clone();
        }
        let mut out = Vec::new();
        if arity >= 1 && depth >= 1 {
            if arity == 1 {
                out.push(Term::Id);
            }
            let ops: Vec<Arc<OpDef>> = self.sig.ops.clone();
            for op in &ops {
                if op.arity > arity {
                    continue;
                }
                for split in compositions(arity, op.arity) {
                    let lists: Vec<Arc<Vec<Term>>> =
                        split.iter().map(|&k| self.terms(k, depth - 1)).collect();
                    if lists.iter().any(|l| l.is_empty()) {
                        continue;
                    }
                    let mut idx = vec![0usize; lists.len()];
                    'product: loop {
                        let children = idx
                            .iter()
                            .zip(&lists)
                            .map(|(&i, l)| l[i].clone())
                            .collect();
                        out.push(Term::Apply(op.clone(), children));
                        for pos in (0..idx.len()).rev() {
                            idx[pos] += 1;
                            if idx[pos] < lists[pos].len() {
                                continue 'product;
                            }
                            idx[pos] = 0;
                        }
                        break;
                    }
                }
            }
        }
        let out = Arc::new(out);
        self.memo.insert((arity, depth), out.clone());
        out
    }
}

/// Compositions of `total` into `parts` positive parts, lexicographic order.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(total: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            if total >= 1 {
                cur.push(total);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for first in 1..=total.saturating_sub(parts - 1) {
            cur.push(first);
            go(total - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts >= 1 && total >= parts {
        go(total, parts, &mut Vec::new(), &mut out);
    }
    out
}

fn weak_compositions(total: u64, parts: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if parts == 1 {
        cur.push(total);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for first in 0..=total {
        cur.push(first);
        weak_compositions(total - first, parts - 1, cur, out);
        cur.pop();
    }
}

fn ordered_factorizations(n: u64, parts: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if parts == 1 {
        cur.push(n - 1);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for d in 1..=n {
        if n % d == 0 {
            cur.push(d - 1);
            ordered_factorizations(n / d, parts - 1, cur, out);
            cur.pop();
        }
    }
}

/// Calls `f` on every tuple in `[0, bound]^arity`, lexicographically.
pub(crate) fn scan_box(arity: usize, bound: u64, f: &mut dyn FnMut(&[u64])) {
    let mut t = vec![0u64; arity];
    loop {
        f(&t);
        let mut pos = arity;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if t[pos] < bound {
                t[pos] += 1;
                for x in &mut t[pos + 1..] {
                    *x = 0;
                }
                break;
            }
        }
    }
}

/// The full grid for arity ≤ 2, otherwise `count` seeded random tuples.
fn sample_tuples(arity: usize, bound: u64, count: usize, seed: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    if arity <= 2 {
        scan_box(arity, bound, &mut |t| out.push(t.to_vec()));
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..count {
            out.push((0..arity).map(|_| rng.gen_range(0..=bound)).collect());
        }
    }
    out
}
