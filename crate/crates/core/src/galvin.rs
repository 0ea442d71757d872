//! Chains of finite-reduction sets, the ultrafilter they generate on the
//! computable fragment, and homogeneous sequences from idempotent
//! ultrafilters.
//!
//! For a strictly increasing sequence `a` the sets `Gᵢ = FR(a − i)` form a
//! decreasing chain. The sets containing some `Gₙ` form a filter; on sets
//! built from the chain and finite sets by Boolean operations membership is
//! decidable through [`ChainNormalForm`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::algebra::{OpDef, Operation, Signature};
use crate::error::{Error, Result};
use crate::reduction::{fr_enumerate, fr_member, StreamSeq};
use crate::sets::{
    check_admissible_sampled, term_member, AdmissibilityReport, ClosureOptions, Family,
    GeneratorOracle, Hint, OracleTable, SamplingPlan, SetTerm, SymSet,
};
use crate::ultrafilter::{is_idempotent, section_set, uf_member, Ultrafilter};

/// Answer to a question that finite data may not settle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Unknown { reason: String },
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }

    pub fn unknown(reason: impl Into<String>) -> Self {
        Verdict::Unknown {
            reason: reason.into(),
        }
    }

    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::Yes)
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Verdict::Unknown { .. })
    }
}

const PREFIX_CHECK: usize = 32;

/// The chain `G₀ ⊇ G₁ ⊇ …`, `Gᵢ = FR(seq − i)`, with generators up to
/// `depth`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrChainField {
    pub name: String,
    pub seq: StreamSeq,
    pub sig: Signature,
    pub depth: usize,
}

impl FrChainField {
    pub fn new(seq: StreamSeq, sig: Signature, depth: usize) -> Result<Self> {
        if !sig.all_inflationary() || !sig.all_arities_at_least_two() {
            return Err(Error::Precondition(
                "chain fields need inflationary operations of arity at least two".into(),
            ));
        }
        if seq.known_len().is_some() {
            return Err(Error::Precondition("chain fields need an infinite sequence".into()));
        }
        let head = seq.take(PREFIX_CHECK)?;
        if head[0] == 0 || head.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition(
                "chain fields need a positive, strictly increasing sequence".into(),
            ));
        }
        Ok(FrChainField {
            name: "chain".into(),
            seq,
            sig,
            depth,
        })
    }

    pub fn generator_id(i: usize) -> String {
        format!("G{i}")
    }

    /// `x ∈ Gᵢ`
    pub fn in_chain(&self, x: u64, i: usize) -> Result<bool> {
        fr_member(x, &self.seq, i, &self.sig)
    }

    pub fn generator(&self, i: usize) -> GeneratorOracle {
        let seq = self.seq.clone();
        let sig = self.sig.clone();
        GeneratorOracle::new(
            Self::generator_id(i),
            1,
            Hint::Chain {
                family: self.name.clone(),
                index: i,
            },
            move |t| fr_member(t[0], &seq, i, &sig).unwrap_or(false),
        )
    }

    pub fn oracles(&self) -> OracleTable {
        (0..=self.depth)
            .map(|i| (Self::generator_id(i), self.generator(i)))
            .collect()
    }

    /// Least `n ≥ from` with `seq(n) > bound`.
    fn index_beyond(&self, from: usize, bound: u64) -> Result<usize> {
        let mut n = from;
        while self.seq.at(n)? <= bound {
            n += 1;
        }
        Ok(n)
    }

    pub fn to_json(&self) -> Value {
        json!({ "seq": self.seq.to_json(), "sig": self.sig.to_json(), "depth": self.depth })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let seq = v
            .get("seq")
            .ok_or_else(|| Error::Invalid("chain field needs `seq`".into()))?;
        let seq = match seq.as_str() {
            Some(name) => StreamSeq::builtin(name)
                .ok_or_else(|| Error::Invalid(format!("unknown sequence `{name}`")))?,
            None => StreamSeq::from_json(seq)?,
        };
        let sig = match v.get("sig") {
            Some(Value::String(name)) => Signature::builtin(name)
                .ok_or_else(|| Error::Invalid(format!("unknown signature `{name}`")))?,
            Some(s) => Signature::from_json(s)?,
            None => Signature::plus(),
        };
        let depth = v.get("depth").and_then(Value::as_u64).unwrap_or(0) as usize;
        Self::new(seq, sig, depth)
    }
}

/// `((Gᵢ ∪ plus) ∖ minus)`, complemented when `complement` is set; without
/// a chain index the chain part is empty. Canonical: `plus` is disjoint from
/// `Gᵢ` and `minus ⊆ Gᵢ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ChainNormalForm {
    pub chain: Option<usize>,
    pub plus: BTreeSet<u64>,
    pub minus: BTreeSet<u64>,
    pub complement: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Base {
    Empty,
    Full,
    Chain(usize),
    CoChain(usize),
}

impl Base {
    fn union(self, other: Base) -> Option<Base> {
        use Base::*;
        Some(match (self, other) {
            (Empty, x) | (x, Empty) => x,
            (Full, _) | (_, Full) => Full,
            (Chain(i), Chain(j)) => Chain(i.min(j)),
            (CoChain(i), CoChain(j)) => CoChain(i.max(j)),
            (Chain(i), CoChain(j)) | (CoChain(j), Chain(i)) => {
                if i <= j {
                    Full
                } else {
                    return None;
                }
            }
        })
    }
}

impl ChainNormalForm {
    pub fn finite(points: impl IntoIterator<Item = u64>) -> Self {
        ChainNormalForm {
            chain: None,
            plus: points.into_iter().collect(),
            minus: BTreeSet::new(),
            complement: false,
        }
    }

    pub fn chain(i: usize) -> Self {
        ChainNormalForm {
            chain: Some(i),
            plus: BTreeSet::new(),
            minus: BTreeSet::new(),
            complement: false,
        }
    }

    fn base(&self) -> Base {
        match (self.chain, self.complement) {
            (None, false) => Base::Empty,
            (None, true) => Base::Full,
            (Some(i), false) => Base::Chain(i),
            (Some(i), true) => Base::CoChain(i),
        }
    }

    fn exceptions(&self) -> BTreeSet<u64> {
        &self.plus | &self.minus
    }

    fn from_parts(field: &FrChainField, base: Base, exceptions: BTreeSet<u64>) -> Result<Self> {
        let (chain, complement) = match base {
            Base::Empty => (None, false),
            Base::Full => (None, true),
            Base::Chain(i) => (Some(i), false),
            Base::CoChain(i) => (Some(i), true),
        };
        let mut nf = ChainNormalForm {
            chain,
            plus: BTreeSet::new(),
            minus: BTreeSet::new(),
            complement,
        };
        for x in exceptions {
            let in_g = match chain {
                Some(i) => field.in_chain(x, i)?,
                None => false,
            };
            if in_g {
                nf.minus.insert(x);
            } else {
                nf.plus.insert(x);
            }
        }
        Ok(nf)
    }

    fn base_member(&self, field: &FrChainField, x: u64) -> Result<bool> {
        Ok(match self.base() {
            Base::Empty => false,
            Base::Full => true,
            Base::Chain(i) => field.in_chain(x, i)?,
            Base::CoChain(i) => !field.in_chain(x, i)?,
        })
    }

    pub fn member(&self, field: &FrChainField, x: u64) -> Result<bool> {
        let flipped = self.plus.contains(&x) || self.minus.contains(&x);
        Ok(self.base_member(field, x)? != flipped)
    }

    pub fn complemented(&self) -> Self {
        ChainNormalForm {
            complement: !self.complement,
            ..self.clone()
        }
    }

    /// Whether the set is infinite, read off the chain structure.
    pub fn is_infinite(&self) -> bool {
        self.base() != Base::Empty
    }

    fn union(&self, other: &Self, field: &FrChainField) -> Result<Option<Self>> {
        let Some(base) = self.base().union(other.base()) else {
            return Ok(None);
        };
        let mut exceptions = BTreeSet::new();
        for x in self.exceptions().union(&other.exceptions()) {
            let value = self.member(field, *x)? || other.member(field, *x)?;
            let probe = Self::from_parts(field, base, BTreeSet::new())?;
            if probe.base_member(field, *x)? != value {
                exceptions.insert(*x);
            }
        }
        Ok(Some(Self::from_parts(field, base, exceptions)?))
    }

    fn intersection(&self, other: &Self, field: &FrChainField) -> Result<Option<Self>> {
        Ok(self
            .complemented()
            .union(&other.complemented(), field)?
            .map(|u| u.complemented()))
    }
}

impl fmt::Display for ChainNormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let core = match self.chain {
            Some(i) => format!("(G{i} ∪ {:?}) ∖ {:?}", self.plus, self.minus),
            None => format!("{:?}", self.plus),
        };
        if self.complement {
            write!(f, "comp({core})")
        } else {
            write!(f, "{core}")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Normalized {
    Known(ChainNormalForm),
    Unknown { reason: String },
}

/// Rewrites a one-dimensional set term over chain generators and finite or
/// cofinite literals into normal form. Differences `Gᵢ ∖ Gⱼ` with `i < j`
/// have no normal form and make the result unknown.
pub fn normalize(field: &FrChainField, term: &SetTerm, oracles: &OracleTable) -> Result<Normalized> {
    if term.dim()? != 1 {
        return Err(Error::Dimension("normal forms are for subsets of ω".into()));
    }
    match normalize_rec(field, term, oracles)? {
        Ok(nf) => Ok(Normalized::Known(nf)),
        Err(reason) => Ok(Normalized::Unknown { reason }),
    }
}

fn normalize_rec(
    field: &FrChainField,
    term: &SetTerm,
    oracles: &OracleTable,
) -> Result<std::result::Result<ChainNormalForm, String>> {
    Ok(Ok(match term {
        SetTerm::Lit(s) => {
            let points = s.support().iter().map(|t| t[0]);
            let nf = ChainNormalForm::finite(points);
            if s.is_cofinite() {
                nf.complemented()
            } else {
                nf
            }
        }
        SetTerm::Gen { id, .. } => {
            let o = oracles
                .get(id)
                .ok_or_else(|| Error::UnknownGenerator(id.clone()))?;
            match &o.hint {
                Hint::Chain { family, index } if *family == field.name => {
                    ChainNormalForm::chain(*index)
                }
                _ => {
                    return Err(Error::Invalid(format!(
                        "generator `{id}` is not a member of chain `{}`",
                        field.name
                    )))
                }
            }
        }
        SetTerm::Compl(a) => match normalize_rec(field, a, oracles)? {
            Ok(nf) => nf.complemented(),
            Err(e) => return Ok(Err(e)),
        },
        SetTerm::Union(a, b) | SetTerm::Inter(a, b) => {
            let x = match normalize_rec(field, a, oracles)? {
                Ok(nf) => nf,
                Err(e) => return Ok(Err(e)),
            };
            let y = match normalize_rec(field, b, oracles)? {
                Ok(nf) => nf,
                Err(e) => return Ok(Err(e)),
            };
            let combined = if matches!(term, SetTerm::Union(..)) {
                x.union(&y, field)?
            } else {
                x.intersection(&y, field)?
            };
            match combined {
                Some(nf) => nf,
                None => return Ok(Err(format!("{term} involves a difference of chain sets"))),
            }
        }
        other => {
            return Err(Error::Invalid(format!(
                "`{other}` is not a Boolean combination of chain sets and literals"
            )))
        }
    }))
}

/// Decides whether some `Gₙ` is contained in the set; on success returns
/// the least such `n` found by the growth argument (entries of `Gₙ` are at
/// least `seq(n)`), after confirming the excluded points lie outside `Gₙ`.
pub fn fr_chain_member(field: &FrChainField, x: &ChainNormalForm) -> Result<Option<usize>> {
    let (from, excluded) = match x.base() {
        Base::Chain(i) => (i, &x.minus),
        Base::Full => (0, &x.plus),
        Base::Empty | Base::CoChain(_) => return Ok(None),
    };
    let bound = excluded.iter().next_back().copied();
    let n = match bound {
        Some(b) => field.index_beyond(from, b)?,
        None => from,
    };
    for &e in excluded {
        if field.in_chain(e, n)? {
            return Err(Error::Precondition(format!(
                "{e} lies in G{n} although every entry there exceeds it"
            )));
        }
    }
    Ok(Some(n))
}

/// Three-valued membership of a set term in the chain ultrafilter.
pub fn fr_chain_member_term(
    field: &FrChainField,
    term: &SetTerm,
    oracles: &OracleTable,
) -> Result<Verdict> {
    Ok(match normalize(field, term, oracles)? {
        Normalized::Known(nf) => Verdict::from_bool(fr_chain_member(field, &nf)?.is_some()),
        Normalized::Unknown { reason } => Verdict::Unknown { reason },
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GalvinOptions {
    pub scan_cap: u64,
}

impl Default for GalvinOptions {
    fn default() -> Self {
        GalvinOptions { scan_cap: 1_000_000 }
    }
}

/// A sequence of the given length whose finite reductions under `op` lie in
/// `x`, for an ultrafilter `u` idempotent for `op` with `x ∈ u`.
///
/// For principal and cofinite ultrafilters this is the star-set recursion:
/// with `Y* = {y ∈ Y : {z : op(y, z) ∈ Y} ∈ u}`, pick the least admissible
/// `x ∈ Y*` and continue with `Y* ∩ {z : op(x, z) ∈ Y*}`. Picks strictly
/// increase except for principal ultrafilters, whose only candidate may
/// repeat. For a chain ultrafilter the set contains some `Gₙ` and the
/// sequence is a prefix of `seq − n`.
pub fn galvin_construct(
    u: &Ultrafilter,
    op: &OpDef,
    x: &SetTerm,
    oracles: &OracleTable,
    length: usize,
    opts: &GalvinOptions,
) -> Result<Vec<u64>> {
    if op.arity() != 2 || !op.flags().associative || !op.flags().finite_fibers {
        return Err(Error::Precondition(format!(
            "`{}` must be a binary associative operation with finite fibers",
            op.name()
        )));
    }
    if !is_idempotent(op, u)? {
        return Err(Error::Precondition(format!(
            "the ultrafilter is not idempotent for `{}`",
            op.name()
        )));
    }
    if let Ultrafilter::FrChain(field) = u {
        if !field.sig.contains(op) {
            return Err(Error::Precondition(format!(
                "`{}` is not in the chain's signature",
                op.name()
            )));
        }
        let nf = match normalize(field, x, oracles)? {
            Normalized::Known(nf) => nf,
            Normalized::Unknown { reason } => return Err(Error::Inconclusive(reason)),
        };
        let n = fr_chain_member(field, &nf)?
            .ok_or_else(|| Error::Precondition("the target set is not in the ultrafilter".into()))?;
        return field.seq.tail(n).take(length);
    }
    let mut y = x
        .to_symset()?
        .ok_or_else(|| Error::Precondition("the target must be a finite or cofinite set".into()))?;
    if !uf_member(u, &y)? {
        return Err(Error::Precondition("the target set is not in the ultrafilter".into()));
    }
    let strict = !matches!(u, Ultrafilter::Principal(_));
    let mut picks: Vec<u64> = Vec::with_capacity(length);
    for _ in 0..length {
        let star = y.intersection(&section_set(&y.pre(op, 1)?, u)?)?;
        let start = match picks.last() {
            Some(&p) if strict => p + 1,
            Some(&p) => p,
            None => 0,
        };
        let pick = (start..=opts.scan_cap)
            .find(|&v| star.contains_unchecked(&[v]))
            .ok_or_else(|| {
                Error::Inconclusive(format!("no element found below the scan cap {}", opts.scan_cap))
            })?;
        picks.push(pick);
        y = star.intersection(&star.pre(op, 1)?.fib(pick)?)?;
    }
    Ok(picks)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StrongReducibilityReport {
    /// Prefix length whose finite reductions were checked against the set.
    pub prefix: usize,
    pub homogeneous: bool,
    pub homogeneity_violations: Vec<u64>,
    /// One verdict per tail `i < k` for `FR(a − i) ∈ U`.
    pub tails: Vec<Verdict>,
}

impl StrongReducibilityReport {
    pub fn verdict(&self) -> Verdict {
        if !self.homogeneous || self.tails.iter().any(|v| *v == Verdict::No) {
            Verdict::No
        } else if let Some(v) = self.tails.iter().find(|v| v.is_unknown()) {
            v.clone()
        } else {
            Verdict::Yes
        }
    }
}

/// Checks `FR(a ↾ prefix) ⊆ X` and, for `i < k`, `FR(a − i) ∈ U`.
pub fn verify_strongly_reducible(
    u: &Ultrafilter,
    sig: &Signature,
    x: &SetTerm,
    oracles: &OracleTable,
    a: &StreamSeq,
    k: usize,
    prefix: usize,
) -> Result<StrongReducibilityReport> {
    let head = a.take(prefix)?;
    let values = fr_enumerate(&head, sig, prefix);
    let mut violations = Vec::new();
    for v in values {
        if !term_member(&[v], x, oracles)? {
            violations.push(v);
        }
    }
    let tails = (0..k).map(|i| tail_in_ultrafilter(u, sig, a, i)).collect::<Result<_>>()?;
    Ok(StrongReducibilityReport {
        prefix,
        homogeneous: violations.is_empty(),
        homogeneity_violations: violations,
        tails,
    })
}

const CHAIN_MATCH_WINDOW: usize = 64;

fn tail_in_ultrafilter(u: &Ultrafilter, sig: &Signature, a: &StreamSeq, i: usize) -> Result<Verdict> {
    Ok(match u {
        Ultrafilter::Principal(c) => Verdict::from_bool(fr_member(*c, a, i, sig)?),
        Ultrafilter::Cofinite => match a.common_divisor_from(i) {
            Some(g) if g >= 2 && sig.preserves_divisibility() => Verdict::No,
            _ => Verdict::unknown(format!(
                "no certificate that FR(a − {i}) misses infinitely many values"
            )),
        },
        Ultrafilter::FrChain(field) => {
            let tail = a.tail(i);
            let m = (0..CHAIN_MATCH_WINDOW + i).find(|&m| field.seq.tail(m) == tail);
            match m {
                Some(_) if field.sig == *sig => Verdict::Yes,
                _ => Verdict::unknown(format!(
                    "a − {i} is not recognisably a tail of the chain's sequence"
                )),
            }
        }
    })
}

/// Summary of [`build_fr_field`].
#[derive(Debug, Clone, Serialize)]
pub struct FrFieldReport {
    pub generators: usize,
    pub members: usize,
    pub admissibility: AdmissibilityReport,
    /// One-dimensional members with a normal form.
    pub normal_forms: usize,
    /// One-dimensional members without one.
    pub unknown_forms: usize,
    pub axiom_violations: Vec<String>,
    pub consistency_violations: Vec<String>,
    pub nonprincipality_violations: Vec<String>,
    pub intersections_checked: usize,
    pub intersections_unknown: usize,
    pub sections_checked: usize,
    pub sections_unknown: usize,
    pub section_violations: Vec<String>,
    pub strong_reducibility: StrongReducibilityReport,
}

impl FrFieldReport {
    pub fn passed(&self) -> bool {
        self.admissibility.passed()
            && self.axiom_violations.is_empty()
            && self.consistency_violations.is_empty()
            && self.nonprincipality_violations.is_empty()
            && self.section_violations.is_empty()
            && self.strong_reducibility.verdict() == Verdict::Yes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrFieldOptions {
    pub closure_depth: usize,
    pub singleton_bound: u64,
    /// Points on which normal forms are compared with direct membership.
    pub consistency_bound: u64,
    pub intersection_pairs: usize,
    pub tails: usize,
    pub prefix: usize,
    pub plan: SamplingPlan,
}

impl Default for FrFieldOptions {
    fn default() -> Self {
        FrFieldOptions {
            closure_depth: 2,
            singleton_bound: 1,
            consistency_bound: 40,
            intersection_pairs: 4000,
            tails: 3,
            prefix: 8,
            plan: SamplingPlan::default(),
        }
    }
}

/// Builds the bounded closure over the chain generators `G₀ … G_depth`,
/// singletons and `extra`, together with the chain ultrafilter, and checks
/// it on the closure's members.
pub fn build_fr_field(
    seq: StreamSeq,
    sig: Signature,
    depth: usize,
    extra: OracleTable,
    opts: &FrFieldOptions,
) -> Result<(Family, Ultrafilter, FrFieldReport)> {
    if !sig.all_finite_fibers() {
        return Err(Error::Precondition(
            "chain fields need operations with finite fibers".into(),
        ));
    }
    let field = Arc::new(FrChainField::new(seq, sig.clone(), depth)?);
    let mut oracles = field.oracles();
    for (id, o) in extra {
        if oracles.contains_key(&id) {
            return Err(Error::Invalid(format!("generator `{id}` is already defined")));
        }
        oracles.insert(id, o);
    }
    let closure = ClosureOptions {
        singleton_bound: opts.singleton_bound,
        ..ClosureOptions::default()
    };
    let family = Family::generated(
        "fr-chain",
        sig.clone(),
        oracles,
        opts.closure_depth,
        &BTreeSet::from([1, 2]),
        &closure,
    );
    let u = Ultrafilter::FrChain(field.clone());
    let admissibility = check_admissible_sampled(&family, &opts.plan)?;

    let mut axiom_violations = Vec::new();
    let mut consistency_violations = Vec::new();
    let mut nonprincipality_violations = Vec::new();
    let mut known: Vec<(&SetTerm, ChainNormalForm, bool)> = Vec::new();
    let mut unknown_forms = 0;
    for m in &family.members {
        if m.dim()? != 1 {
            continue;
        }
        let nf = match normalize(&field, m, &family.oracles) {
            Ok(Normalized::Known(nf)) => nf,
            Ok(Normalized::Unknown { .. }) => {
                unknown_forms += 1;
                continue;
            }
            Err(Error::Invalid(_)) => {
                unknown_forms += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for x in 0..=opts.consistency_bound {
            if nf.member(&field, x)? != term_member(&[x], m, &family.oracles)? {
                consistency_violations.push(format!("{x} in {m}"));
                break;
            }
        }
        let inside = fr_chain_member(&field, &nf)?.is_some();
        let outside = fr_chain_member(&field, &nf.complemented())?.is_some();
        if inside == outside {
            axiom_violations.push(format!("{m}: exactly one of it and its complement must belong"));
        }
        if inside && !nf.is_infinite() {
            nonprincipality_violations.push(format!("{m} is finite but belongs"));
        }
        known.push((m, nf, inside));
    }
    if fr_chain_member(&field, &ChainNormalForm::finite([]))?.is_some() {
        axiom_violations.push("∅ belongs".into());
    }
    if fr_chain_member(&field, &ChainNormalForm::finite([]).complemented())?.is_none() {
        axiom_violations.push("ω does not belong".into());
    }
    for c in 0..=opts.consistency_bound {
        if fr_chain_member(&field, &ChainNormalForm::finite([c]))?.is_some() {
            nonprincipality_violations.push(format!("{{{c}}} belongs"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.plan.seed);
    let inside: Vec<&(&SetTerm, ChainNormalForm, bool)> = known.iter().filter(|k| k.2).collect();
    let mut intersections_checked = 0;
    let mut intersections_unknown = 0;
    if !inside.is_empty() {
        for _ in 0..opts.intersection_pairs {
            let a = inside.choose(&mut rng).expect("nonempty");
            let b = inside.choose(&mut rng).expect("nonempty");
            let t = SetTerm::inter(a.0.clone(), b.0.clone());
            match fr_chain_member_term(&field, &t, &family.oracles)? {
                Verdict::Yes => intersections_checked += 1,
                Verdict::No => {
                    intersections_checked += 1;
                    axiom_violations.push(format!("{t} does not belong"));
                }
                Verdict::Unknown { .. } => intersections_unknown += 1,
            }
        }
    }

    let mut sections_checked = 0;
    let mut sections_unknown = 0;
    let mut section_violations = Vec::new();
    for m in &family.members {
        if m.dim()? != 2 {
            continue;
        }
        let Some(z) = m.to_symset()? else {
            sections_unknown += 1;
            continue;
        };
        sections_checked += 1;
        let w = section_set(&z, &u)?;
        if !family.contains(&SetTerm::Lit(w.clone())) {
            section_violations.push(format!("section set of {m} is outside the family"));
        }
        for a in 0..=opts.consistency_bound {
            let direct = uf_member(&u, &z.section(&[a])?)?;
            if w.member(&[a])? != direct {
                section_violations.push(format!("section of {m} at {a}"));
                break;
            }
        }
    }

    let g0 = SetTerm::gen(&family.oracles[&FrChainField::generator_id(0)]);
    let strong = verify_strongly_reducible(
        &u,
        &sig,
        &g0,
        &family.oracles,
        &field.seq,
        opts.tails,
        opts.prefix,
    )?;
    let report = FrFieldReport {
        generators: depth + 1,
        members: family.members.len(),
        admissibility,
        normal_forms: known.len(),
        unknown_forms,
        axiom_violations,
        consistency_violations,
        nonprincipality_violations,
        intersections_checked,
        intersections_unknown,
        sections_checked,
        sections_unknown,
        section_violations,
        strong_reducibility: strong,
    };
    Ok((family, u, report))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainIdempotenceReport {
    pub sets: usize,
    pub pairs_checked: usize,
    pub violations: Vec<String>,
}

/// Sampled check that the chain ultrafilter is idempotent for `op` on sets
/// in normal form: for `X ⊇ Gₙ` and `y ∈ FR(seq − n)` built from entries
/// before index `m`, every `z ∈ FR(seq − m)` must give `op(y, z) ∈ X`, so the
/// section `{z : op(y, z) ∈ X}` contains `Gₘ`.
pub fn check_chain_idempotence(
    field: &FrChainField,
    op: &OpDef,
    sets: &[ChainNormalForm],
    window: usize,
) -> Result<ChainIdempotenceReport> {
    if op.arity() != 2 || !field.sig.contains(op) {
        return Err(Error::Precondition(format!(
            "`{}` must be a binary operation of the chain's signature",
            op.name()
        )));
    }
    let mut report = ChainIdempotenceReport {
        sets: 0,
        pairs_checked: 0,
        violations: Vec::new(),
    };
    for x in sets {
        let Some(n) = fr_chain_member(field, x)? else {
            continue;
        };
        report.sets += 1;
        let mut by_end: BTreeMap<usize, BTreeSet<u64>> = BTreeMap::new();
        for end in n + 1..=n + window {
            let head = field.seq.tail(n).take(end - n)?;
            by_end.insert(end, fr_enumerate(&head, &field.sig, head.len()));
        }
        for (&m, ys) in &by_end {
            let later = field.seq.tail(m).take(window)?;
            let zs = fr_enumerate(&later, &field.sig, later.len());
            for &y in ys {
                for &z in &zs {
                    report.pairs_checked += 1;
                    let v = op.apply(&[y, z]);
                    if !x.member(field, v)? {
                        report.violations.push(format!("{}({y}, {z}) = {v} ∉ {x}", op.name()));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Turns a finite or cofinite literal into a normal form.
pub fn normal_form_of(s: &SymSet) -> Result<ChainNormalForm> {
    if s.dim() != 1 {
        return Err(Error::Dimension("normal forms are for subsets of ω".into()));
    }
    let nf = ChainNormalForm::finite(s.support().iter().map(|t| t[0]));
    Ok(if s.is_cofinite() { nf.complemented() } else { nf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::Rule;

    fn powers2_field(depth: usize) -> FrChainField {
        FrChainField::new(StreamSeq::powers(2), Signature::plus(), depth).unwrap()
    }

    fn gen(i: usize) -> SetTerm {
        SetTerm::Gen {
            id: FrChainField::generator_id(i),
            dim: 1,
        }
    }

    fn fin(points: &[u64]) -> SetTerm {
        SetTerm::Lit(SymSet::finite(1, points.iter().map(|&p| vec![p])).unwrap())
    }

    #[test]
    fn field_preconditions() {
        assert!(FrChainField::new(StreamSeq::finite(vec![1, 2]), Signature::plus(), 1).is_err());
        let zero_start = StreamSeq::with_rule(vec![], Rule::Arithmetic { start: 0, step: 1 });
        assert!(FrChainField::new(zero_start, Signature::plus(), 1).is_err());
        let zero = Signature::single(OpDef::const_zero());
        assert!(FrChainField::new(StreamSeq::powers(2), zero, 1).is_err());
    }

    #[test]
    fn chain_membership_examples() {
        let f = powers2_field(4);
        let o = f.oracles();
        assert_eq!(fr_chain_member_term(&f, &gen(3), &o).unwrap(), Verdict::Yes);
        let avoid = SetTerm::compl(fin(&(0..=9).collect::<Vec<_>>()));
        assert_eq!(fr_chain_member_term(&f, &avoid, &o).unwrap(), Verdict::Yes);
        let nf = match normalize(&f, &avoid, &o).unwrap() {
            Normalized::Known(nf) => nf,
            other => panic!("{other:?}"),
        };
        assert_eq!(fr_chain_member(&f, &nf).unwrap(), Some(4));
        assert_eq!(fr_chain_member_term(&f, &fin(&[5]), &o).unwrap(), Verdict::No);
    }

    #[test]
    fn normalize_examples() {
        let f = powers2_field(5);
        let o = f.oracles();
        assert_eq!(
            normalize(&f, &SetTerm::inter(gen(2), gen(5)), &o).unwrap(),
            Normalized::Known(ChainNormalForm::chain(5))
        );
        let t = SetTerm::minus(SetTerm::union(gen(1), fin(&[0])), fin(&[7]));
        let expected = ChainNormalForm {
            chain: Some(1),
            plus: BTreeSet::from([0]),
            minus: BTreeSet::from([]),
            complement: false,
        };
        // 7 = 1 + 2 + 4 uses the entry 1, which is not in a − 1
        assert_eq!(normalize(&f, &t, &o).unwrap(), Normalized::Known(expected));
        let t = SetTerm::minus(SetTerm::union(gen(1), fin(&[0])), fin(&[6]));
        match normalize(&f, &t, &o).unwrap() {
            Normalized::Known(nf) => {
                assert_eq!(nf.minus, BTreeSet::from([6]));
                assert_eq!(nf.plus, BTreeSet::from([0]));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            normalize(&f, &SetTerm::minus(gen(1), gen(3)), &o).unwrap(),
            Normalized::Unknown { .. }
        ));
        assert_eq!(
            normalize(&f, &SetTerm::minus(gen(3), gen(1)), &o).unwrap(),
            Normalized::Known(ChainNormalForm::finite([]))
        );
        let foreign = oracle_with_evens(&o);
        assert!(normalize(&f, &SetTerm::Gen { id: "evens".into(), dim: 1 }, &foreign).is_err());
    }

    fn oracle_with_evens(o: &OracleTable) -> OracleTable {
        let mut o = o.clone();
        let e = GeneratorOracle::multiples(2);
        o.insert(e.id.clone(), e);
        o
    }

    #[test]
    fn normal_forms_agree_with_direct_membership() {
        let f = powers2_field(3);
        let o = f.oracles();
        let terms = [
            SetTerm::union(gen(0), SetTerm::compl(gen(2))),
            SetTerm::inter(SetTerm::compl(fin(&[3, 8])), gen(1)),
            SetTerm::compl(SetTerm::union(gen(3), fin(&[1, 2, 5]))),
            SetTerm::union(SetTerm::inter(gen(2), fin(&[4, 5, 12])), SetTerm::compl(gen(1))),
        ];
        for t in &terms {
            let Normalized::Known(nf) = normalize(&f, t, &o).unwrap() else {
                panic!("{t} has a normal form");
            };
            for x in 0..200 {
                assert_eq!(nf.member(&f, x).unwrap(), term_member(&[x], t, &o).unwrap(), "{x} in {t}");
            }
        }
    }

    #[test]
    fn chain_membership_is_monotone() {
        let f = powers2_field(3);
        let o = f.oracles();
        let small = SetTerm::minus(gen(2), fin(&[4, 8]));
        let big = SetTerm::union(small.clone(), fin(&[1]));
        assert_eq!(fr_chain_member_term(&f, &small, &o).unwrap(), Verdict::Yes);
        assert_eq!(fr_chain_member_term(&f, &big, &o).unwrap(), Verdict::Yes);
        let co = SetTerm::compl(gen(0));
        assert_eq!(fr_chain_member_term(&f, &co, &o).unwrap(), Verdict::No);
    }

    fn brute_sums(a: &[u64]) -> BTreeSet<u64> {
        (1u32..1 << a.len())
            .map(|m| (0..a.len()).filter(|i| m >> i & 1 == 1).map(|i| a[i]).sum())
            .collect()
    }

    #[test]
    fn galvin_cofinite_avoids_small_numbers() {
        let x = SetTerm::compl(fin(&(0..=9).collect::<Vec<_>>()));
        let a = galvin_construct(
            &Ultrafilter::Cofinite,
            &OpDef::plus(),
            &x,
            &OracleTable::new(),
            8,
            &GalvinOptions::default(),
        )
        .unwrap();
        assert_eq!(a.len(), 8);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(brute_sums(&a).iter().all(|&s| s > 9));
    }

    #[test]
    fn galvin_full_set_and_principal() {
        let full = SetTerm::Lit(SymSet::full(1));
        let a = galvin_construct(
            &Ultrafilter::Cofinite,
            &OpDef::plus(),
            &full,
            &OracleTable::new(),
            4,
            &GalvinOptions::default(),
        )
        .unwrap();
        assert_eq!(a, vec![0, 1, 2, 3]);
        let zero = galvin_construct(
            &Ultrafilter::Principal(0),
            &OpDef::plus(),
            &fin(&[0, 4]),
            &OracleTable::new(),
            3,
            &GalvinOptions::default(),
        )
        .unwrap();
        assert_eq!(zero, vec![0, 0, 0]);
        assert!(galvin_construct(
            &Ultrafilter::Principal(1),
            &OpDef::plus(),
            &fin(&[1]),
            &OracleTable::new(),
            3,
            &GalvinOptions::default(),
        )
        .is_err());
        assert!(galvin_construct(
            &Ultrafilter::Cofinite,
            &OpDef::plus(),
            &fin(&[1]),
            &OracleTable::new(),
            3,
            &GalvinOptions::default(),
        )
        .is_err());
    }

    #[test]
    fn galvin_chain_route() {
        let f = Arc::new(powers2_field(3));
        let o = f.oracles();
        let u = Ultrafilter::FrChain(f.clone());
        let a = galvin_construct(&u, &OpDef::plus(), &gen(2), &o, 5, &GalvinOptions::default())
            .unwrap();
        assert_eq!(a, vec![4, 8, 16, 32, 64]);
        for s in brute_sums(&a) {
            assert!(f.in_chain(s, 2).unwrap());
        }
    }

    #[test]
    fn strong_reducibility_examples() {
        let f = Arc::new(powers2_field(3));
        let o = f.oracles();
        let u = Ultrafilter::FrChain(f.clone());
        let r = verify_strongly_reducible(&u, &f.sig, &gen(0), &o, &f.seq, 5, 8).unwrap();
        assert_eq!(r.verdict(), Verdict::Yes);
        let r = verify_strongly_reducible(&Ultrafilter::Cofinite, &f.sig, &gen(0), &o, &f.seq, 3, 6)
            .unwrap();
        assert!(r.homogeneous);
        assert!(r.tails[0].is_unknown());
        assert_eq!(r.tails[1], Verdict::No);
        assert_eq!(r.verdict(), Verdict::No);
        let r = verify_strongly_reducible(&Ultrafilter::Cofinite, &f.sig, &gen(0), &o, &f.seq, 0, 6)
            .unwrap();
        assert_eq!(r.verdict(), Verdict::Yes);
        let r = verify_strongly_reducible(&Ultrafilter::Principal(3), &f.sig, &gen(0), &o, &f.seq, 2, 4)
            .unwrap();
        assert_eq!(r.tails, vec![Verdict::Yes, Verdict::No]);
    }

    #[test]
    fn fr_field_depth_three() {
        let opts = FrFieldOptions {
            plan: SamplingPlan {
                samples: 128,
                ..SamplingPlan::default()
            },
            intersection_pairs: 300,
            ..FrFieldOptions::default()
        };
        let (family, u, report) =
            build_fr_field(StreamSeq::powers(2), Signature::plus(), 3, OracleTable::new(), &opts)
                .unwrap();
        assert!(report.passed(), "{report:#?}");
        assert!(report.normal_forms > 0);
        assert!((0..=3).all(|i| family.oracles.contains_key(&FrChainField::generator_id(i))));
        assert!(matches!(u, Ultrafilter::FrChain(_)));
    }

    #[test]
    fn fr_field_depth_zero() {
        let opts = FrFieldOptions {
            closure_depth: 1,
            ..FrFieldOptions::default()
        };
        let (family, _, report) =
            build_fr_field(StreamSeq::powers(2), Signature::plus(), 0, OracleTable::new(), &opts)
                .unwrap();
        assert!(report.passed(), "{report:#?}");
        assert_eq!(family.oracles.len(), 1);
    }

    #[test]
    fn chain_idempotence_sampled() {
        let f = powers2_field(3);
        let sets = [
            ChainNormalForm::chain(1),
            ChainNormalForm::finite(0..20).complemented(),
            ChainNormalForm {
                chain: Some(2),
                plus: BTreeSet::from([1]),
                minus: BTreeSet::from([4, 12]),
                complement: false,
            },
        ];
        let r = check_chain_idempotence(&f, &OpDef::plus(), &sets, 4).unwrap();
        assert_eq!(r.sets, 3);
        assert!(r.pairs_checked > 0);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
    }
}
