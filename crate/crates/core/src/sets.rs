//! Finite and cofinite subsets of ωⁿ, set terms over membership oracles,
//! bounded closures and sampled admissibility checks.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{OpDef, Operation, Signature};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Finite,
    Cofinite,
}

impl Mode {
    fn flip(self) -> Self {
        match self {
            Mode::Finite => Mode::Cofinite,
            Mode::Cofinite => Mode::Finite,
        }
    }
}

/// A finite subset of ωⁿ or the complement of one. The support is kept
/// sorted, so structural equality is set equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymSet {
    dim: usize,
    mode: Mode,
    support: BTreeSet<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct SymSetJson {
    dim: usize,
    mode: Mode,
    support: Vec<Vec<u64>>,
}

impl SymSet {
    pub fn new(dim: usize, mode: Mode, support: impl IntoIterator<Item = Vec<u64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("sets live in ωⁿ with n ≥ 1".into()));
        }
        let support: BTreeSet<Vec<u64>> = support.into_iter().collect();
        if let Some(t) = support.iter().find(|t| t.len() != dim) {
            return Err(Error::Dimension(format!(
                "tuple {t:?} in a set of dimension {dim}"
            )));
        }
        Ok(SymSet { dim, mode, support })
    }

    pub fn finite(dim: usize, support: impl IntoIterator<Item = Vec<u64>>) -> Result<Self> {
        Self::new(dim, Mode::Finite, support)
    }

    pub fn cofinite(dim: usize, support: impl IntoIterator<Item = Vec<u64>>) -> Result<Self> {
        Self::new(dim, Mode::Cofinite, support)
    }

    pub fn empty(dim: usize) -> Self {
        SymSet {
            dim,
            mode: Mode::Finite,
            support: BTreeSet::new(),
        }
    }

    pub fn full(dim: usize) -> Self {
        SymSet {
            dim,
            mode: Mode::Cofinite,
            support: BTreeSet::new(),
        }
    }

    pub fn singleton(t: Vec<u64>) -> Self {
        SymSet {
            dim: t.len().max(1),
            mode: Mode::Finite,
            support: BTreeSet::from([t]),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn support(&self) -> &BTreeSet<Vec<u64>> {
        &self.support
    }

    pub fn is_finite(&self) -> bool {
        self.mode == Mode::Finite
    }

    pub fn is_cofinite(&self) -> bool {
        self.mode == Mode::Cofinite
    }

    pub fn is_empty(&self) -> bool {
        self.is_finite() && self.support.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.is_cofinite() && self.support.is_empty()
    }

    /// Largest entry mentioned in the support.
    pub fn max_entry(&self) -> Option<u64> {
        self.support.iter().flatten().copied().max()
    }

    pub fn member(&self, t: &[u64]) -> Result<bool> {
        self.check_dim(t.len())?;
        Ok(self.contains_unchecked(t))
    }

    pub(crate) fn contains_unchecked(&self, t: &[u64]) -> bool {
        self.support.contains(t) == (self.mode == Mode::Finite)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d == self.dim {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "expected dimension {}, got {d}",
                self.dim
            )))
        }
    }

    pub fn complement(&self) -> Self {
        SymSet {
            dim: self.dim,
            mode: self.mode.flip(),
            support: self.support.clone(),
        }
    }

    pub fn union(&self, other: &SymSet) -> Result<Self> {
        self.check_dim(other.dim)?;
        use Mode::*;
        let (mode, support) = match (self.mode, other.mode) {
            (Finite, Finite) => (Finite, &self.support | &other.support),
            (Cofinite, Cofinite) => (Cofinite, &self.support & &other.support),
            (Cofinite, Finite) => (Cofinite, &self.support - &other.support),
            (Finite, Cofinite) => (Cofinite, &other.support - &self.support),
        };
        Ok(SymSet {
            dim: self.dim,
            mode,
            support,
        })
    }

    pub fn intersection(&self, other: &SymSet) -> Result<Self> {
        Ok(self.complement().union(&other.complement())?.complement())
    }

    pub fn difference(&self, other: &SymSet) -> Result<Self> {
        self.intersection(&other.complement())
    }

    /// `{(a₂, …, aₙ, a₁) : (a₁, …, aₙ) ∈ X}`
    pub fn cyc(&self) -> Result<Self> {
        if self.dim < 2 {
            return Err(Error::Dimension("cyc needs dimension at least 2".into()));
        }
        Ok(SymSet {
            dim: self.dim,
            mode: self.mode,
            support: self.support.iter().map(|t| rotate_left(t)).collect(),
        })
    }

    /// `{(a₁, …, aₙ₋₁) : (c, a₁, …, aₙ₋₁) ∈ X}`
    pub fn fib(&self, c: u64) -> Result<Self> {
        if self.dim < 2 {
            return Err(Error::Dimension("fib needs dimension at least 2".into()));
        }
        Ok(SymSet {
            dim: self.dim - 1,
            mode: self.mode,
            support: self
                .support
                .iter()
                .filter(|t| t[0] == c)
                .map(|t| t[1..].to_vec())
                .collect(),
        })
    }

    /// Section at a fixed prefix: `{b̄ : (ā, b̄) ∈ X}`.
    pub fn section(&self, prefix: &[u64]) -> Result<Self> {
        if prefix.len() >= self.dim {
            return Err(Error::Dimension(format!(
                "prefix of length {} leaves nothing of dimension {}",
                prefix.len(),
                self.dim
            )));
        }
        Ok(SymSet {
            dim: self.dim - prefix.len(),
            mode: self.mode,
            support: self
                .support
                .iter()
                .filter(|t| t.starts_with(prefix))
                .map(|t| t[prefix.len()..].to_vec())
                .collect(),
        })
    }

    /// `{(a₁, …, aₙ₋₁, x̄) : (a₁, …, aₙ₋₁, f(x̄)) ∈ X}` for `X ⊆ ωⁿ`.
    pub fn pre(&self, op: &dyn Operation, n: usize) -> Result<Self> {
        if n != self.dim {
            return Err(Error::Dimension(format!(
                "pre at position {n} on a set of dimension {}",
                self.dim
            )));
        }
        let mut support = BTreeSet::new();
        for t in &self.support {
            let fiber = op.fiber(t[n - 1]).ok_or_else(|| {
                Error::Precondition(format!(
                    "`{}` is not known to have finite fibers",
                    op.describe()
                ))
            })?;
            for x in fiber {
                let mut u = t[..n - 1].to_vec();
                u.extend(x);
                support.insert(u);
            }
        }
        Ok(SymSet {
            dim: n + op.arity() - 1,
            mode: self.mode,
            support,
        })
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(SymSetJson {
            dim: self.dim,
            mode: self.mode,
            support: self.support.iter().cloned().collect(),
        })
        .expect("symset serializes")
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let j: SymSetJson = serde_json::from_value(v.clone())?;
        Self::new(j.dim, j.mode, j.support)
    }
}

impl fmt::Display for SymSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .support
            .iter()
            .map(|t| {
                let parts: Vec<String> = t.iter().map(u64::to_string).collect();
                format!("({})", parts.join(","))
            })
            .collect();
        match self.mode {
            Mode::Finite => write!(f, "{{{}}}", items.join(", ")),
            Mode::Cofinite => write!(f, "ω^{} ∖ {{{}}}", self.dim, items.join(", ")),
        }
    }
}

fn rotate_left(t: &[u64]) -> Vec<u64> {
    let mut u = t.to_vec();
    u.rotate_left(1);
    u
}

fn rotate_right(t: &[u64]) -> Vec<u64> {
    let mut u = t.to_vec();
    u.rotate_right(1);
    u
}

/// A random set with entries `≤ entry_bound` and at most `max_support`
/// support tuples, either mode with equal odds.
pub fn random_symset(rng: &mut impl Rng, dim: usize, entry_bound: u64, max_support: usize) -> SymSet {
    let k = rng.gen_range(0..=max_support);
    let support: Vec<Vec<u64>> = (0..k)
        .map(|_| (0..dim).map(|_| rng.gen_range(0..=entry_bound)).collect())
        .collect();
    let mode = if rng.gen_bool(0.5) {
        Mode::Finite
    } else {
        Mode::Cofinite
    };
    SymSet::new(dim, mode, support).expect("tuples have the right length")
}

/// What is known about a generator set beyond its membership test.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Hint {
    /// Finite, contained in `[0, bound]ⁿ`.
    Finite(u64),
    /// Contains every tuple with an entry above `bound`.
    Cofinite(u64),
    /// Member `index` of a decreasing chain of sets.
    Chain { family: String, index: usize },
    Unknown,
}

pub type MemberFn = Arc<dyn Fn(&[u64]) -> bool + Send + Sync>;

/// A generator set given by a total membership test on ω^dim.
#[derive(Clone)]
pub struct GeneratorOracle {
    pub id: String,
    pub dim: usize,
    pub member: MemberFn,
    pub hint: Hint,
}

impl fmt::Debug for GeneratorOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorOracle")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("hint", &self.hint)
            .finish()
    }
}

impl GeneratorOracle {
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        hint: Hint,
        member: impl Fn(&[u64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        GeneratorOracle {
            id: id.into(),
            dim,
            member: Arc::new(member),
            hint,
        }
    }

    /// Even numbers, or multiples of `m` in general.
    pub fn multiples(m: u64) -> Self {
        let id = if m == 2 {
            "evens".to_string()
        } else {
            format!("multiples-{m}")
        };
        GeneratorOracle::new(id, 1, Hint::Unknown, move |t| m != 0 && t[0] % m == 0)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "evens" | "parity" => Some(Self::multiples(2)),
            "odds" => Some(GeneratorOracle::new("odds", 1, Hint::Unknown, |t| t[0] % 2 == 1)),
            "diagonal" => Some(GeneratorOracle::new("diagonal", 2, Hint::Unknown, |t| t[0] == t[1])),
            "below" => Some(GeneratorOracle::new("below", 2, Hint::Unknown, |t| t[0] < t[1])),
            _ => None,
        }
    }
}

pub type OracleTable = BTreeMap<String, GeneratorOracle>;

pub fn oracle_table(oracles: impl IntoIterator<Item = GeneratorOracle>) -> OracleTable {
    oracles.into_iter().map(|o| (o.id.clone(), o)).collect()
}

/// A set expression over literals and generator oracles.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SetTerm {
    Lit(SymSet),
    Gen { id: String, dim: usize },
    Union(Box<SetTerm>, Box<SetTerm>),
    Inter(Box<SetTerm>, Box<SetTerm>),
    Compl(Box<SetTerm>),
    Cyc(Box<SetTerm>),
    Fib(u64, Box<SetTerm>),
    Pre { op: Arc<OpDef>, n: usize, t: Box<SetTerm> },
}

impl SetTerm {
    pub fn gen(o: &GeneratorOracle) -> Self {
        SetTerm::Gen {
            id: o.id.clone(),
            dim: o.dim,
        }
    }

    pub fn union(a: SetTerm, b: SetTerm) -> Self {
        SetTerm::Union(Box::new(a), Box::new(b))
    }

    pub fn inter(a: SetTerm, b: SetTerm) -> Self {
        SetTerm::Inter(Box::new(a), Box::new(b))
    }

    pub fn compl(a: SetTerm) -> Self {
        SetTerm::Compl(Box::new(a))
    }

    pub fn minus(a: SetTerm, b: SetTerm) -> Self {
        Self::inter(a, Self::compl(b))
    }

    pub fn cyc(a: SetTerm) -> Self {
        SetTerm::Cyc(Box::new(a))
    }

    pub fn fib(c: u64, a: SetTerm) -> Self {
        SetTerm::Fib(c, Box::new(a))
    }

    pub fn pre(op: Arc<OpDef>, n: usize, a: SetTerm) -> Self {
        SetTerm::Pre {
            op,
            n,
            t: Box::new(a),
        }
    }

    /// Dimension of the denoted set, checking that every node composes.
    pub fn dim(&self) -> Result<usize> {
        match self {
            SetTerm::Lit(s) => Ok(s.dim()),
            SetTerm::Gen { dim, .. } => Ok(*dim),
            SetTerm::Union(a, b) | SetTerm::Inter(a, b) => {
                let (da, db) = (a.dim()?, b.dim()?);
                if da != db {
                    return Err(Error::Dimension(format!(
                        "Boolean node joins dimensions {da} and {db}"
                    )));
                }
                Ok(da)
            }
            SetTerm::Compl(a) => a.dim(),
            SetTerm::Cyc(a) => {
                let d = a.dim()?;
                if d < 2 {
                    return Err(Error::Dimension("cyc needs dimension at least 2".into()));
                }
                Ok(d)
            }
            SetTerm::Fib(_, a) => {
                let d = a.dim()?;
                if d < 2 {
                    return Err(Error::Dimension("fib needs dimension at least 2".into()));
                }
                Ok(d - 1)
            }
            SetTerm::Pre { op, n, t } => {
                let d = t.dim()?;
                if d != *n || *n == 0 {
                    return Err(Error::Dimension(format!(
                        "pre at position {n} on a set of dimension {d}"
                    )));
                }
                Ok(n + op.arity() - 1)
            }
        }
    }

    /// Number of constructor applications on the longest path to a leaf.
    pub fn depth(&self) -> usize {
        match self {
            SetTerm::Lit(_) | SetTerm::Gen { .. } => 0,
            SetTerm::Union(a, b) | SetTerm::Inter(a, b) => 1 + a.depth().max(b.depth()),
            SetTerm::Compl(a) | SetTerm::Cyc(a) | SetTerm::Fib(_, a) => 1 + a.depth(),
            SetTerm::Pre { t, .. } => 1 + t.depth(),
        }
    }

    pub fn children(&self) -> Vec<&SetTerm> {
        match self {
            SetTerm::Lit(_) | SetTerm::Gen { .. } => vec![],
            SetTerm::Union(a, b) | SetTerm::Inter(a, b) => vec![a, b],
            SetTerm::Compl(a) | SetTerm::Cyc(a) | SetTerm::Fib(_, a) => vec![a],
            SetTerm::Pre { t, .. } => vec![t],
        }
    }

    fn constructor(&self) -> Option<Constructor> {
        match self {
            SetTerm::Lit(_) | SetTerm::Gen { .. } => None,
            SetTerm::Union(..) | SetTerm::Inter(..) | SetTerm::Compl(_) => Some(Constructor::Boolean),
            SetTerm::Cyc(_) => Some(Constructor::Cyc),
            SetTerm::Fib(..) => Some(Constructor::Fib),
            SetTerm::Pre { .. } => Some(Constructor::Pre),
        }
    }

    /// The set itself when every leaf is a literal.
    pub fn to_symset(&self) -> Result<Option<SymSet>> {
        Ok(Some(match self {
            SetTerm::Lit(s) => s.clone(),
            SetTerm::Gen { .. } => return Ok(None),
            SetTerm::Union(a, b) | SetTerm::Inter(a, b) => {
                let (Some(x), Some(y)) = (a.to_symset()?, b.to_symset()?) else {
                    return Ok(None);
                };
                if matches!(self, SetTerm::Union(..)) {
                    x.union(&y)?
                } else {
                    x.intersection(&y)?
                }
            }
            SetTerm::Compl(a) => match a.to_symset()? {
                Some(x) => x.complement(),
                None => return Ok(None),
            },
            SetTerm::Cyc(a) => match a.to_symset()? {
                Some(x) => x.cyc()?,
                None => return Ok(None),
            },
            SetTerm::Fib(c, a) => match a.to_symset()? {
                Some(x) => x.fib(*c)?,
                None => return Ok(None),
            },
            SetTerm::Pre { op, n, t } => match t.to_symset()? {
                Some(x) => x.pre(op.as_ref(), *n)?,
                None => return Ok(None),
            },
        }))
    }

    pub fn generator_ids(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_ids(&mut out);
        out
    }

    fn collect_ids<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        if let SetTerm::Gen { id, .. } = self {
            out.insert(id);
        }
        for c in self.children() {
            c.collect_ids(out);
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            SetTerm::Lit(s) => json!({ "lit": s.to_json() }),
            SetTerm::Gen { id, dim } => json!({ "gen": id, "dim": dim }),
            SetTerm::Union(a, b) => json!({ "union": [a.to_json(), b.to_json()] }),
            SetTerm::Inter(a, b) => json!({ "inter": [a.to_json(), b.to_json()] }),
            SetTerm::Compl(a) => json!({ "compl": a.to_json() }),
            SetTerm::Cyc(a) => json!({ "cyc": a.to_json() }),
            SetTerm::Fib(c, a) => json!({ "fib": { "c": c, "t": a.to_json() } }),
            SetTerm::Pre { op, n, t } => {
                json!({ "pre": { "op": op.name(), "n": n, "t": t.to_json() } })
            }
        }
    }

    /// Parses the tagged-object form. Generator dimensions default to the
    /// oracle's; `pre` operations are looked up in `sig`.
    pub fn from_json(v: &Value, sig: &Signature, oracles: &OracleTable) -> Result<Self> {
        let obj = v
            .as_object()
            .filter(|o| !o.is_empty())
            .ok_or_else(|| Error::Invalid(format!("set term must be a tagged object: {v}")))?;
        let sub = |x: &Value| SetTerm::from_json(x, sig, oracles);
        let pair = |x: &Value| -> Result<(SetTerm, SetTerm)> {
            match x.as_array().map(Vec::as_slice) {
                Some([a, b]) => Ok((sub(a)?, sub(b)?)),
                _ => Err(Error::Invalid(format!("expected a pair of set terms: {x}"))),
            }
        };
        let field = |x: &Value, k: &str| -> Result<Value> {
            x.get(k)
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("missing field `{k}` in {x}")))
        };
        let term = if let Some(s) = obj.get("lit") {
            SetTerm::Lit(SymSet::from_json(s)?)
        } else if let Some(id) = obj.get("gen") {
            let id = id
                .as_str()
                .ok_or_else(|| Error::Invalid("generator id must be a string".into()))?;
            let oracle = oracles
                .get(id)
                .ok_or_else(|| Error::UnknownGenerator(id.to_string()))?;
            let dim = obj.get("dim").and_then(Value::as_u64).map_or(oracle.dim, |d| d as usize);
            SetTerm::Gen {
                id: id.to_string(),
                dim,
            }
        } else if let Some(x) = obj.get("union") {
            let (a, b) = pair(x)?;
            SetTerm::union(a, b)
        } else if let Some(x) = obj.get("inter") {
            let (a, b) = pair(x)?;
            SetTerm::inter(a, b)
        } else if let Some(x) = obj.get("compl") {
            SetTerm::compl(sub(x)?)
        } else if let Some(x) = obj.get("cyc") {
            SetTerm::cyc(sub(x)?)
        } else if let Some(x) = obj.get("fib") {
            let c = field(x, "c")?
                .as_u64()
                .ok_or_else(|| Error::Invalid("fib constant must be a natural number".into()))?;
            SetTerm::fib(c, sub(&field(x, "t")?)?)
        } else if let Some(x) = obj.get("pre") {
            let name = field(x, "op")?;
            let name = name
                .as_str()
                .ok_or_else(|| Error::Invalid("pre operation must be named".into()))?;
            let op = sig
                .get(name)
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("operation `{name}` is not in the signature")))?;
            let n = field(x, "n")?
                .as_u64()
                .ok_or_else(|| Error::Invalid("pre position must be a natural number".into()))?;
            SetTerm::pre(op, n as usize, sub(&field(x, "t")?)?)
        } else {
            return Err(Error::Invalid(format!("unknown set term node: {v}")));
        };
        term.dim()?;
        Ok(term)
    }
}

impl fmt::Display for SetTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetTerm::Lit(s) => write!(f, "{s}"),
            SetTerm::Gen { id, .. } => write!(f, "{id}"),
            SetTerm::Union(a, b) => write!(f, "({a} ∪ {b})"),
            SetTerm::Inter(a, b) => write!(f, "({a} ∩ {b})"),
            SetTerm::Compl(a) => write!(f, "comp({a})"),
            SetTerm::Cyc(a) => write!(f, "cyc({a})"),
            SetTerm::Fib(c, a) => write!(f, "fib{c}({a})"),
            SetTerm::Pre { op, n, t } => write!(f, "pre[{},{n}]({t})", op.name()),
        }
    }
}

/// Membership of `t` in the set denoted by `term`.
pub fn term_member(t: &[u64], term: &SetTerm, oracles: &OracleTable) -> Result<bool> {
    let d = term.dim()?;
    if t.len() != d {
        return Err(Error::Dimension(format!(
            "tuple of length {} for a set of dimension {d}",
            t.len()
        )));
    }
    member_rec(t, term, oracles)
}

fn member_rec(t: &[u64], term: &SetTerm, oracles: &OracleTable) -> Result<bool> {
    Ok(match term {
        SetTerm::Lit(s) => s.contains_unchecked(t),
        SetTerm::Gen { id, dim } => {
            let o = oracles
                .get(id)
                .ok_or_else(|| Error::UnknownGenerator(id.clone()))?;
            if o.dim != *dim {
                return Err(Error::Dimension(format!(
                    "generator `{id}` has dimension {}, used at {dim}",
                    o.dim
                )));
            }
            (o.member)(t)
        }
        SetTerm::Union(a, b) => member_rec(t, a, oracles)? || member_rec(t, b, oracles)?,
        SetTerm::Inter(a, b) => member_rec(t, a, oracles)? && member_rec(t, b, oracles)?,
        SetTerm::Compl(a) => !member_rec(t, a, oracles)?,
        SetTerm::Cyc(a) => member_rec(&rotate_right(t), a, oracles)?,
        SetTerm::Fib(c, a) => {
            let mut u = Vec::with_capacity(t.len() + 1);
            u.push(*c);
            u.extend_from_slice(t);
            member_rec(&u, a, oracles)?
        }
        SetTerm::Pre { op, n, t: inner } => {
            let mut u = t[..n - 1].to_vec();
            u.push(op.apply(&t[n - 1..]));
            member_rec(&u, inner, oracles)?
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constructor {
    Boolean,
    Cyc,
    Fib,
    Pre,
}

impl Constructor {
    pub fn name(self) -> &'static str {
        match self {
            Constructor::Boolean => "boolean",
            Constructor::Cyc => "cyc",
            Constructor::Fib => "fib",
            Constructor::Pre => "pre",
        }
    }
}

/// Which constructors a closure uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureOptions {
    pub constructors: BTreeSet<Constructor>,
    /// Constants `c` for `fib_c`.
    pub fib_constants: Vec<u64>,
    /// Singleton literals `{t}` are added for every `t ∈ [0, bound]^d`.
    pub singleton_bound: u64,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions {
            constructors: [Constructor::Boolean, Constructor::Cyc, Constructor::Fib, Constructor::Pre]
                .into_iter()
                .collect(),
            fib_constants: vec![0, 1, 2],
            singleton_bound: 1,
        }
    }
}

impl ClosureOptions {
    pub fn boolean_only(singleton_bound: u64) -> Self {
        ClosureOptions {
            constructors: BTreeSet::from([Constructor::Boolean]),
            fib_constants: vec![],
            singleton_bound,
        }
    }
}

fn singletons(dim: usize, bound: u64) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=bound).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// Every set term of depth ≤ `depth` built from the generators and singleton
/// literals whose dimension, and that of every subterm, lies in `dims`.
/// Terms are deduplicated structurally; commutative Boolean nodes are built
/// once per unordered pair.
pub fn closure_enumerate(
    generators: &OracleTable,
    sig: &Signature,
    depth: usize,
    dims: &BTreeSet<usize>,
    opts: &ClosureOptions,
) -> Vec<SetTerm> {
    let mut all: Vec<(SetTerm, usize)> = Vec::new();
    let mut seen: HashSet<SetTerm> = HashSet::new();
    let mut push = |t: SetTerm, d: usize, all: &mut Vec<(SetTerm, usize)>| {
        if seen.insert(t.clone()) {
            all.push((t, d));
        }
    };
    for o in generators.values() {
        if dims.contains(&o.dim) {
            push(SetTerm::gen(o), 0, &mut all);
        }
    }
    for &d in dims {
        for t in singletons(d, opts.singleton_bound) {
            push(SetTerm::Lit(SymSet::singleton(t)), 0, &mut all);
        }
    }
    let has = |c| opts.constructors.contains(&c);
    for level in 1..=depth {
        let before = all.len();
        let dim_of = |t: &SetTerm| t.dim().expect("closure terms are well formed");
        let fresh: Vec<usize> = (0..before).filter(|&i| all[i].1 == level - 1).collect();
        let mut made = Vec::new();
        for &i in &fresh {
            let t = &all[i].0;
            let d = dim_of(t);
            if has(Constructor::Boolean) {
                made.push(SetTerm::compl(t.clone()));
            }
            if has(Constructor::Cyc) && d >= 2 {
                made.push(SetTerm::cyc(t.clone()));
            }
            if has(Constructor::Fib) && d >= 2 && dims.contains(&(d - 1)) {
                for &c in &opts.fib_constants {
                    made.push(SetTerm::fib(c, t.clone()));
                }
            }
            if has(Constructor::Pre) {
                for op in sig.ops() {
                    if op.flags().finite_fibers && dims.contains(&(d + op.arity() - 1)) {
                        made.push(SetTerm::pre(op.clone(), d, t.clone()));
                    }
                }
            }
        }
        if has(Constructor::Boolean) {
            for i in 0..before {
                for j in i..before {
                    if all[i].1 != level - 1 && all[j].1 != level - 1 {
                        continue;
                    }
                    let (a, b) = (&all[i].0, &all[j].0);
                    if dim_of(a) != dim_of(b) {
                        continue;
                    }
                    made.push(SetTerm::union(a.clone(), b.clone()));
                    made.push(SetTerm::inter(a.clone(), b.clone()));
                }
            }
        }
        for t in made {
            push(t, level, &mut all);
        }
    }
    all.into_iter().map(|(t, _)| t).collect()
}

/// A family of sets: the terms over some generators that use the allowed
/// constructors, with a list of representative members for sampling.
#[derive(Debug, Clone)]
pub struct Family {
    pub name: String,
    pub sig: Signature,
    pub oracles: OracleTable,
    pub members: Vec<SetTerm>,
    pub constructors: BTreeSet<Constructor>,
    /// Whether finite and cofinite literals belong to the family.
    pub literals: bool,
    /// Whether terms over literals only are replaced by their value.
    pub fold_literals: bool,
}

impl Family {
    /// The finite and cofinite subsets of ωⁿ, sampled by random literals of
    /// dimension 1 to 3.
    pub fn finite_cofinite(sig: Signature, members: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members = (0..members)
            .map(|i| SetTerm::Lit(random_symset(&mut rng, 1 + i % 3, 6, 6)))
            .collect();
        Family {
            name: "finite-cofinite".into(),
            sig,
            oracles: OracleTable::new(),
            members,
            constructors: ClosureOptions::default().constructors,
            literals: true,
            fold_literals: true,
        }
    }

    /// Bounded closure of the generators (see [`closure_enumerate`]).
    pub fn generated(
        name: impl Into<String>,
        sig: Signature,
        oracles: OracleTable,
        depth: usize,
        dims: &BTreeSet<usize>,
        opts: &ClosureOptions,
    ) -> Self {
        let members = closure_enumerate(&oracles, &sig, depth, dims, opts);
        Family {
            name: name.into(),
            sig,
            oracles,
            members,
            constructors: opts.constructors.clone(),
            literals: true,
            fold_literals: false,
        }
    }

    /// The same family with one constructor removed.
    pub fn without(mut self, c: Constructor) -> Self {
        self.constructors.remove(&c);
        self.name = format!("{}-without-{}", self.name, c.name());
        self
    }

    /// Whether the term denotes a set of this family by construction.
    pub fn contains(&self, t: &SetTerm) -> bool {
        if t.dim().is_err() {
            return false;
        }
        self.contains_rec(t)
    }

    fn contains_rec(&self, t: &SetTerm) -> bool {
        match t {
            SetTerm::Lit(_) => self.literals,
            SetTerm::Gen { id, dim } => self.oracles.get(id).is_some_and(|o| o.dim == *dim),
            SetTerm::Pre { op, .. } if !self.sig.contains(op) => false,
            _ => {
                t.constructor().is_some_and(|c| self.constructors.contains(&c))
                    && t.children().into_iter().all(|c| self.contains_rec(c))
            }
        }
    }

    /// The family's representative of a constructor applied to members, or
    /// `None` when the family is not closed under it.
    fn close(&self, t: SetTerm) -> Result<Option<SetTerm>> {
        if !self.contains(&t) {
            return Ok(None);
        }
        if self.fold_literals {
            if let Some(s) = t.to_symset()? {
                return Ok(Some(SetTerm::Lit(s)));
            }
        }
        Ok(Some(t))
    }

    pub fn member(&self, t: &[u64], term: &SetTerm) -> Result<bool> {
        term_member(t, term, &self.oracles)
    }
}

/// Merges families over one signature. A term belongs to the union when its
/// generators come from some part and each of its constructors is allowed by
/// some part.
pub fn family_union(families: &[Family]) -> Result<Family> {
    let first = families
        .first()
        .ok_or_else(|| Error::Invalid("union of no families".into()))?;
    let mut out = Family {
        name: families
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join("+"),
        sig: first.sig.clone(),
        oracles: OracleTable::new(),
        members: Vec::new(),
        constructors: BTreeSet::new(),
        literals: false,
        fold_literals: families.iter().all(|f| f.fold_literals),
    };
    let mut seen = HashSet::new();
    for f in families {
        if f.sig != first.sig {
            return Err(Error::Invalid(format!(
                "families `{}` and `{}` have different signatures",
                first.name, f.name
            )));
        }
        for (id, o) in &f.oracles {
            if let Some(prev) = out.oracles.get(id) {
                if prev.dim != o.dim || prev.hint != o.hint {
                    return Err(Error::Invalid(format!(
                        "generator `{id}` differs between families"
                    )));
                }
            }
            out.oracles.insert(id.clone(), o.clone());
        }
        for m in &f.members {
            if seen.insert(m.clone()) {
                out.members.push(m.clone());
            }
        }
        out.constructors.extend(f.constructors.iter().copied());
        out.literals |= f.literals;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    pub entry_bound: u64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            entry_bound: 16,
            samples: 512,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClauseReport {
    pub clause: String,
    pub checked: usize,
    pub counterexamples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdmissibilityReport {
    pub family: String,
    pub clauses: Vec<ClauseReport>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.counterexamples.is_empty())
    }
}

const MAX_COUNTEREXAMPLES: usize = 8;

/// Samples the closure clauses of admissibility: for members `X`, the
/// family must contain `cyc(X)`, `fib_c(X)`, every section of `X` at a fixed
/// prefix, and the Boolean combinations, each with the membership the
/// rewrite rules prescribe.
pub fn check_admissible_sampled(family: &Family, plan: &SamplingPlan) -> Result<AdmissibilityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let with_dims: Vec<(&SetTerm, usize)> = family
        .members
        .iter()
        .map(|m| Ok((m, m.dim()?)))
        .collect::<Result<_>>()?;
    let multi: Vec<(&SetTerm, usize)> = with_dims.iter().copied().filter(|&(_, d)| d >= 2).collect();
    let bound = plan.entry_bound;
    let tuple = |rng: &mut ChaCha8Rng, d: usize| -> Vec<u64> {
        (0..d).map(|_| rng.gen_range(0..=bound)).collect()
    };
    let mut clauses = Vec::new();

    let mut run = |name: &str,
                   pool: &[(&SetTerm, usize)],
                   rng: &mut ChaCha8Rng,
                   check: &mut dyn FnMut(&mut ChaCha8Rng, &SetTerm, usize) -> Result<Option<String>>|
     -> Result<()> {
        let mut report = ClauseReport {
            clause: name.into(),
            checked: 0,
            counterexamples: Vec::new(),
        };
        if !pool.is_empty() {
            for _ in 0..plan.samples {
                let &(x, d) = pool.choose(rng).expect("nonempty pool");
                report.checked += 1;
                if let Some(msg) = check(rng, x, d)? {
                    if report.counterexamples.len() < MAX_COUNTEREXAMPLES {
                        report.counterexamples.push(msg);
                    }
                }
            }
        }
        clauses.push(report);
        Ok(())
    };

    run("cyc", &multi, &mut rng, &mut |rng, x, d| {
        let Some(y) = family.close(SetTerm::cyc(x.clone()))? else {
            return Ok(Some(format!("cyc({x}) is not in the family")));
        };
        let t = tuple(rng, d);
        let expected = family.member(&rotate_right(&t), x)?;
        Ok((family.member(&t, &y)? != expected).then(|| format!("{t:?} in cyc({x})")))
    })?;

    run("fib", &multi, &mut rng, &mut |rng, x, d| {
        let c = rng.gen_range(0..=bound);
        let Some(y) = family.close(SetTerm::fib(c, x.clone()))? else {
            return Ok(Some(format!("fib{c}({x}) is not in the family")));
        };
        let t = tuple(rng, d - 1);
        let mut u = vec![c];
        u.extend_from_slice(&t);
        let expected = family.member(&u, x)?;
        Ok((family.member(&t, &y)? != expected).then(|| format!("{t:?} in fib{c}({x})")))
    })?;

    run("sections", &multi, &mut rng, &mut |rng, x, d| {
        let k = rng.gen_range(1..d);
        let prefix = tuple(rng, d - k);
        let mut y = x.clone();
        for &a in &prefix {
            match family.close(SetTerm::fib(a, y))? {
                Some(z) => y = z,
                None => return Ok(Some(format!("section of {x} at {prefix:?} is not in the family"))),
            }
        }
        let t = tuple(rng, k);
        let mut u = prefix.clone();
        u.extend_from_slice(&t);
        let expected = family.member(&u, x)?;
        Ok((family.member(&t, &y)? != expected)
            .then(|| format!("{t:?} in the section of {x} at {prefix:?}")))
    })?;

    run("boolean", &with_dims, &mut rng, &mut |rng, x, d| {
        let same: Vec<&SetTerm> = with_dims
            .iter()
            .filter(|&&(_, e)| e == d)
            .map(|&(m, _)| m)
            .collect();
        let y = *same.choose(rng).expect("x itself qualifies");
        let t = tuple(rng, d);
        let (a, b) = (family.member(&t, x)?, family.member(&t, y)?);
        let cases = [
            (SetTerm::compl(x.clone()), !a),
            (SetTerm::union(x.clone(), y.clone()), a || b),
            (SetTerm::inter(x.clone(), y.clone()), a && b),
        ];
        for (term, expected) in cases {
            match family.close(term.clone())? {
                None => return Ok(Some(format!("{term} is not in the family"))),
                Some(z) if family.member(&t, &z)? != expected => {
                    return Ok(Some(format!("{t:?} in {term}")))
                }
                Some(_) => {}
            }
        }
        Ok(None)
    })?;

    Ok(AdmissibilityReport {
        family: family.name.clone(),
        clauses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fin(d: usize, s: &[&[u64]]) -> SymSet {
        SymSet::finite(d, s.iter().map(|t| t.to_vec())).unwrap()
    }

    fn cof(d: usize, s: &[&[u64]]) -> SymSet {
        SymSet::cofinite(d, s.iter().map(|t| t.to_vec())).unwrap()
    }

    #[test]
    fn boolean_examples() {
        assert_eq!(fin(1, &[&[3]]).complement(), cof(1, &[&[3]]));
        assert_eq!(
            cof(1, &[&[1]]).intersection(&cof(1, &[&[2]])).unwrap(),
            cof(1, &[&[1], &[2]])
        );
        assert_eq!(
            fin(1, &[&[1]]).union(&fin(1, &[&[2]])).unwrap(),
            fin(1, &[&[1], &[2]])
        );
        assert_eq!(
            cof(1, &[&[1], &[2]]).union(&fin(1, &[&[2], &[5]])).unwrap(),
            cof(1, &[&[1]])
        );
        assert!(fin(1, &[]).union(&fin(2, &[])).is_err());
    }

    #[test]
    fn cyc_examples() {
        assert_eq!(fin(2, &[&[1, 2]]).cyc().unwrap(), fin(2, &[&[2, 1]]));
        assert_eq!(
            cof(2, &[&[0, 3], &[5, 5]]).cyc().unwrap(),
            cof(2, &[&[3, 0], &[5, 5]])
        );
        let x = fin(3, &[&[1, 2, 3], &[0, 0, 7]]);
        assert_eq!(x.cyc().unwrap().cyc().unwrap().cyc().unwrap(), x);
        assert!(fin(1, &[&[1]]).cyc().is_err());
    }

    #[test]
    fn fib_examples() {
        assert_eq!(cof(2, &[&[0, 3]]).fib(0).unwrap(), cof(1, &[&[3]]));
        assert_eq!(fin(2, &[&[0, 3]]).fib(5).unwrap(), SymSet::empty(1));
        assert_eq!(SymSet::full(2).fib(0).unwrap(), SymSet::full(1));
    }

    #[test]
    fn pre_examples() {
        let plus = OpDef::plus();
        assert_eq!(
            fin(1, &[&[5]]).pre(&plus, 1).unwrap(),
            fin(2, &[&[0, 5], &[1, 4], &[2, 3], &[3, 2], &[4, 1], &[5, 0]])
        );
        assert_eq!(SymSet::full(1).pre(&plus, 1).unwrap(), SymSet::full(2));
        assert_eq!(
            cof(2, &[&[0, 0]]).pre(&plus, 2).unwrap(),
            cof(3, &[&[0, 0, 0]])
        );
        assert!(matches!(
            fin(1, &[&[5]]).pre(&OpDef::monus(), 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn member_examples() {
        assert!(fin(1, &[&[3]]).member(&[3]).unwrap());
        assert!(!cof(1, &[&[3]]).member(&[3]).unwrap());
        assert!(cof(2, &[&[0, 0]]).member(&[7, 7]).unwrap());
        assert!(cof(2, &[&[0, 0]]).member(&[7]).is_err());
    }

    #[test]
    fn term_member_examples() {
        let oracles = oracle_table([GeneratorOracle::multiples(2)]);
        let evens = SetTerm::gen(&oracles["evens"]);
        assert!(term_member(&[4], &evens, &oracles).unwrap());
        let plus = Arc::new(OpDef::plus());
        let pre = SetTerm::pre(plus, 1, evens.clone());
        assert!(term_member(&[1, 3], &pre, &oracles).unwrap());
        assert!(!term_member(&[1, 4], &pre, &oracles).unwrap());
        let t = SetTerm::compl(SetTerm::union(evens, SetTerm::Lit(fin(1, &[&[3]]))));
        assert!(!term_member(&[3], &t, &oracles).unwrap());
        let missing = SetTerm::Gen {
            id: "nope".into(),
            dim: 1,
        };
        assert!(matches!(
            term_member(&[3], &missing, &oracles),
            Err(Error::UnknownGenerator(_))
        ));
    }

    #[test]
    fn cyc_and_fib_terms_rewrite_tuples() {
        let oracles = oracle_table([GeneratorOracle::builtin("below").unwrap()]);
        let below = SetTerm::gen(&oracles["below"]);
        // cyc(X) ∋ (a₂, a₁) iff (a₁, a₂) ∈ X
        assert!(term_member(&[5, 2], &SetTerm::cyc(below.clone()), &oracles).unwrap());
        assert!(!term_member(&[2, 5], &SetTerm::cyc(below.clone()), &oracles).unwrap());
        assert!(term_member(&[4], &SetTerm::fib(3, below.clone()), &oracles).unwrap());
        assert!(!term_member(&[3], &SetTerm::fib(3, below), &oracles).unwrap());
    }

    #[test]
    fn closure_depth_zero_and_one() {
        let sig = Signature::plus();
        let dims = BTreeSet::from([1]);
        let opts = ClosureOptions::boolean_only(2);
        let base = closure_enumerate(&OracleTable::new(), &sig, 0, &dims, &opts);
        assert_eq!(base.len(), 3);
        assert!(base.iter().all(|t| matches!(t, SetTerm::Lit(s) if s.support().len() == 1)));

        let oracles = oracle_table([GeneratorOracle::builtin("below").unwrap()]);
        let dims = BTreeSet::from([1, 2]);
        let terms = closure_enumerate(&oracles, &sig, 1, &dims, &ClosureOptions::default());
        let g = SetTerm::gen(&oracles["below"]);
        assert!(terms.contains(&SetTerm::cyc(g.clone())));
        assert!(terms.contains(&SetTerm::fib(1, g.clone())));
        assert!(terms.contains(&SetTerm::compl(g)));
        let set: HashSet<&SetTerm> = terms.iter().collect();
        assert_eq!(set.len(), terms.len());
    }

    #[test]
    fn literal_closure_evaluates_to_symsets() {
        let sig = Signature::plus();
        let dims = BTreeSet::from([1]);
        let terms = closure_enumerate(&OracleTable::new(), &sig, 2, &dims, &ClosureOptions::boolean_only(2));
        for t in &terms {
            let s = t.to_symset().unwrap().expect("literal leaves only");
            for x in 0..=12 {
                assert_eq!(s.member(&[x]).unwrap(), term_member(&[x], t, &OracleTable::new()).unwrap());
            }
        }
    }

    #[test]
    fn finite_cofinite_family_is_admissible() {
        let fam = Family::finite_cofinite(Signature::plus(), 48, 1);
        let report = check_admissible_sampled(&fam, &SamplingPlan::default()).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.clauses.iter().all(|c| c.checked > 0));
    }

    #[test]
    fn generated_family_is_admissible_and_crippled_one_is_not() {
        let oracles = oracle_table([
            GeneratorOracle::builtin("below").unwrap(),
            GeneratorOracle::multiples(3),
        ]);
        let fam = Family::generated(
            "g",
            Signature::plus(),
            oracles,
            1,
            &BTreeSet::from([1, 2]),
            &ClosureOptions::default(),
        );
        let plan = SamplingPlan::default();
        assert!(check_admissible_sampled(&fam, &plan).unwrap().passed());
        let crippled = fam.clone().without(Constructor::Cyc);
        let report = check_admissible_sampled(&crippled, &plan).unwrap();
        assert!(!report.passed());
        let cyc = report.clauses.iter().find(|c| c.clause == "cyc").unwrap();
        assert!(!cyc.counterexamples.is_empty());
    }

    #[test]
    fn family_union_behaviour() {
        let fam = Family::finite_cofinite(Signature::plus(), 12, 3);
        let twice = family_union(&[fam.clone(), fam.clone()]).unwrap();
        assert_eq!(twice.members, fam.members);
        let oracles = oracle_table([GeneratorOracle::multiples(2)]);
        let gen = Family::generated(
            "evens",
            Signature::plus(),
            oracles,
            1,
            &BTreeSet::from([1]),
            &ClosureOptions::boolean_only(1),
        );
        let both = family_union(&[fam, gen]).unwrap();
        assert!(both.members.iter().any(|m| matches!(m, SetTerm::Lit(_))));
        assert!(both.members.iter().any(|m| matches!(m, SetTerm::Gen { .. })));
        assert!(check_admissible_sampled(&both, &SamplingPlan::default()).unwrap().passed());
        let other = Family::finite_cofinite(Signature::single(OpDef::shifted_mul()), 1, 0);
        assert!(family_union(&[both, other]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let sig = Signature::plus();
        let oracles = oracle_table([GeneratorOracle::multiples(2)]);
        let t = SetTerm::pre(
            sig.ops()[0].clone(),
            1,
            SetTerm::union(SetTerm::gen(&oracles["evens"]), SetTerm::Lit(fin(1, &[&[3]]))),
        );
        assert_eq!(SetTerm::from_json(&t.to_json(), &sig, &oracles).unwrap(), t);
        let s = cof(2, &[&[1, 2]]);
        assert_eq!(SymSet::from_json(&s.to_json()).unwrap(), s);
        assert!(SymSet::from_json(&json!({"dim": 2, "mode": "finite", "support": [[1]]})).is_err());
    }

    fn arb_symset(dim: usize) -> impl Strategy<Value = SymSet> {
        (
            any::<bool>(),
            proptest::collection::vec(proptest::collection::vec(0u64..=6, dim), 0..=8),
        )
            .prop_map(move |(f, s)| {
                SymSet::new(dim, if f { Mode::Finite } else { Mode::Cofinite }, s).unwrap()
            })
    }

    fn tuples(dim: usize, bound: u64) -> Vec<Vec<u64>> {
        singletons(dim, bound)
    }

    proptest! {
        #[test]
        fn boolean_ops_are_pointwise(x in arb_symset(2), y in arb_symset(2)) {
            let u = x.union(&y).unwrap();
            let i = x.intersection(&y).unwrap();
            let c = x.complement();
            for t in tuples(2, 8) {
                let (a, b) = (x.member(&t).unwrap(), y.member(&t).unwrap());
                prop_assert_eq!(u.member(&t).unwrap(), a || b);
                prop_assert_eq!(i.member(&t).unwrap(), a && b);
                prop_assert_eq!(c.member(&t).unwrap(), !a);
            }
        }

        #[test]
        fn cyc_fib_pre_are_pointwise(x in arb_symset(3), c in 0u64..=6) {
            let cy = x.cyc().unwrap();
            let fb = x.fib(c).unwrap();
            for t in tuples(3, 7) {
                prop_assert_eq!(cy.member(&t).unwrap(), x.member(&rotate_right(&t)).unwrap());
            }
            for t in tuples(2, 12) {
                prop_assert_eq!(fb.member(&t).unwrap(), x.member(&[c, t[0], t[1]]).unwrap());
            }
            let y = x.fib(c).unwrap().fib(c).unwrap();
            let pre = y.pre(&OpDef::plus(), 1).unwrap();
            for t in tuples(2, 12) {
                prop_assert_eq!(pre.member(&t).unwrap(), y.member(&[t[0] + t[1]]).unwrap());
            }
        }

        #[test]
        fn iterated_sections_match_direct(x in arb_symset(5), prefix in proptest::collection::vec(0u64..=6, 1..=4)) {
            let mut y = x.clone();
            for &a in &prefix {
                y = y.fib(a).unwrap();
            }
            prop_assert_eq!(&y, &x.section(&prefix).unwrap());
            let k = 5 - prefix.len();
            for t in tuples(k, 3) {
                let mut u = prefix.clone();
                u.extend(&t);
                prop_assert_eq!(y.member(&t).unwrap(), x.member(&u).unwrap());
            }
        }

        #[test]
        fn compositions_stay_canonical(x in arb_symset(2), y in arb_symset(2), c in 0u64..=6) {
            let z = x.union(&y).unwrap().cyc().unwrap().intersection(&x.complement()).unwrap();
            let w = z.fib(c).unwrap().pre(&OpDef::plus(), 1).unwrap();
            for s in [&z, &w] {
                prop_assert!(s.support().iter().all(|t| t.len() == s.dim()));
                let rebuilt = SymSet::new(s.dim(), s.mode(), s.support().iter().cloned()).unwrap();
                prop_assert_eq!(&rebuilt, s);
            }
        }
    }
}
