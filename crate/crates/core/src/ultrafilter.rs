//! Ultrafilters on the field of finite and cofinite sets, their tensor
//! products and pushforwards.
//!
//! On that field every ultrafilter is principal or the cofinite one, so an
//! ultrafilter is represented by its classification. A chain ultrafilter
//! (see [`crate::galvin`]) lives on a larger field; restricted to finite and
//! cofinite sets it is the cofinite ultrafilter.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::algebra::{OpDef, Operation, Signature, TermEnumerator};
use crate::error::{Error, Result};
use crate::galvin::{fr_chain_member, normal_form_of, FrChainField};
use crate::sets::{random_symset, Family, Mode, SetTerm, SymSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ultrafilter {
    Principal(u64),
    Cofinite,
    FrChain(Arc<FrChainField>),
}

impl Ultrafilter {
    pub fn is_principal(&self) -> bool {
        matches!(self, Ultrafilter::Principal(_))
    }

    /// Classification of the restriction to finite and cofinite sets.
    pub fn restricted(&self) -> Ultrafilter {
        match self {
            Ultrafilter::FrChain(_) => Ultrafilter::Cofinite,
            other => other.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Ultrafilter::Principal(c) => json!({ "kind": "principal", "point": c }),
            Ultrafilter::Cofinite => json!({ "kind": "cofinite" }),
            Ultrafilter::FrChain(f) => {
                let mut v = f.to_json();
                v["kind"] = json!("fr-chain");
                v
            }
        }
    }

    /// Accepts `{kind: principal, point}`, `{kind: cofinite}`,
    /// `{kind: fr-chain, seq, sig, depth}`, or the strings `cofinite` and
    /// `p<c>`.
    pub fn from_json(v: &Value) -> Result<Self> {
        if let Some(s) = v.as_str() {
            return Self::parse(s);
        }
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Invalid(format!("ultrafilter needs a kind: {v}")))?;
        match kind {
            "principal" => Ok(Ultrafilter::Principal(
                v.get("point")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::Invalid("principal ultrafilter needs a point".into()))?,
            )),
            "cofinite" => Ok(Ultrafilter::Cofinite),
            "fr-chain" => Ok(Ultrafilter::FrChain(Arc::new(FrChainField::from_json(v)?))),
            other => Err(Error::Invalid(format!("unknown ultrafilter kind `{other}`"))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cofinite" | "cof" => Ok(Ultrafilter::Cofinite),
            _ => s
                .strip_prefix('p')
                .and_then(|c| c.parse().ok())
                .map(Ultrafilter::Principal)
                .ok_or_else(|| Error::Invalid(format!("unknown ultrafilter `{s}`"))),
        }
    }
}

impl fmt::Display for Ultrafilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ultrafilter::Principal(c) => write!(f, "P{c}"),
            Ultrafilter::Cofinite => write!(f, "Cof"),
            Ultrafilter::FrChain(_) => write!(f, "FRChain"),
        }
    }
}

fn require_dim(x: &SymSet, d: usize) -> Result<()> {
    if x.dim() == d {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "expected a set of dimension {d}, got {}",
            x.dim()
        )))
    }
}

pub fn uf_member(u: &Ultrafilter, x: &SymSet) -> Result<bool> {
    require_dim(x, 1)?;
    Ok(match u {
        Ultrafilter::Principal(c) => x.member(&[*c])?,
        Ultrafilter::Cofinite => x.is_cofinite(),
        Ultrafilter::FrChain(f) => fr_chain_member(f, &normal_form_of(x)?)?.is_some(),
    })
}

/// `{ā : {b : (ā, b) ∈ X} ∈ U}`
pub fn section_set(x: &SymSet, u: &Ultrafilter) -> Result<SymSet> {
    if x.dim() < 2 {
        return Err(Error::Dimension("section sets need dimension at least 2".into()));
    }
    let d = x.dim() - 1;
    match u {
        Ultrafilter::Principal(c) => SymSet::new(
            d,
            x.mode(),
            x.support()
                .iter()
                .filter(|t| t[d] == *c)
                .map(|t| t[..d].to_vec()),
        ),
        Ultrafilter::Cofinite | Ultrafilter::FrChain(_) => Ok(match x.mode() {
            Mode::Finite => SymSet::empty(d),
            Mode::Cofinite => SymSet::full(d),
        }),
    }
}

/// `X ∈ U₁ ⊗ ⋯ ⊗ Uₙ`, by folding section sets from the last factor.
pub fn tensor_member(factors: &[Ultrafilter], x: &SymSet) -> Result<bool> {
    if factors.is_empty() {
        return Err(Error::Invalid("a tensor product needs at least one factor".into()));
    }
    require_dim(x, factors.len())?;
    let mut y = x.clone();
    for u in factors[1..].iter().rev() {
        y = section_set(&y, u)?;
    }
    uf_member(&factors[0], &y)
}

/// `{ā : {b̄ : (ā, b̄) ∈ X} ∈ V₁ ⊗ ⋯ ⊗ V_k}` in one step, deciding each
/// section by a tensor membership query.
pub fn section_set_k(x: &SymSet, tail: &[Ultrafilter]) -> Result<SymSet> {
    let k = tail.len();
    if k == 0 || k >= x.dim() {
        return Err(Error::Dimension(format!(
            "cannot section {k} coordinates off a set of dimension {}",
            x.dim()
        )));
    }
    let d = x.dim() - k;
    let generic = match x.mode() {
        Mode::Finite => SymSet::empty(k),
        Mode::Cofinite => SymSet::full(k),
    };
    let generic_in = tensor_member(tail, &generic)?;
    let prefixes: BTreeSet<Vec<u64>> = x.support().iter().map(|t| t[..d].to_vec()).collect();
    let mut exceptions = Vec::new();
    for a in prefixes {
        if tensor_member(tail, &x.section(&a)?)? != generic_in {
            exceptions.push(a);
        }
    }
    SymSet::new(d, if generic_in { Mode::Cofinite } else { Mode::Finite }, exceptions)
}

/// Tensor membership with every section decided by a direct membership
/// query on the last factor, independently of [`section_set`].
pub fn tensor_member_pointwise(factors: &[Ultrafilter], x: &SymSet) -> Result<bool> {
    require_dim(x, factors.len())?;
    if factors.len() == 1 {
        return uf_member(&factors[0], x);
    }
    let d = x.dim() - 1;
    let last = &factors[d];
    let generic = match x.mode() {
        Mode::Finite => SymSet::empty(1),
        Mode::Cofinite => SymSet::full(1),
    };
    let generic_in = uf_member(last, &generic)?;
    let prefixes: BTreeSet<Vec<u64>> = x.support().iter().map(|t| t[..d].to_vec()).collect();
    let mut exceptions = Vec::new();
    for a in prefixes {
        if uf_member(last, &x.section(&a)?)? != generic_in {
            exceptions.push(a);
        }
    }
    let w = SymSet::new(d, if generic_in { Mode::Cofinite } else { Mode::Finite }, exceptions)?;
    tensor_member_pointwise(&factors[..d], &w)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushforwardOptions {
    /// Nonprincipal coordinates range over `[0, scan_bound]`, and the
    /// `scan_bound + 1` smallest resulting values are tested.
    pub scan_bound: u64,
}

impl Default for PushforwardOptions {
    fn default() -> Self {
        PushforwardOptions { scan_bound: 256 }
    }
}

/// Classifies `{X : f⁻¹[X] ∈ U₁ ⊗ ⋯ ⊗ U_m}` on finite and cofinite sets.
///
/// With all factors principal the candidate is `f(c̄)`. Otherwise
/// candidates `c` are the values of `f` with principal coordinates fixed and
/// the others ranging over `[0, scan_bound]`; none can succeed, since `f⁻¹{c}`
/// is finite and a finite set is never in a product with a nonprincipal
/// factor, and the result is the cofinite ultrafilter.
pub fn pushforward(op: &dyn Operation, factors: &[Ultrafilter]) -> Result<Ultrafilter> {
    pushforward_with(op, factors, &PushforwardOptions::default())
}

pub fn pushforward_with(
    op: &dyn Operation,
    factors: &[Ultrafilter],
    opts: &PushforwardOptions,
) -> Result<Ultrafilter> {
    if factors.len() != op.arity() {
        return Err(Error::Arity {
            expected: op.arity(),
            got: factors.len(),
        });
    }
    if op.fiber(0).is_none() {
        return Err(Error::Precondition(format!(
            "`{}` is not known to have finite fibers",
            op.describe()
        )));
    }
    let restricted: Vec<Ultrafilter> = factors.iter().map(Ultrafilter::restricted).collect();
    let points: Vec<Option<u64>> = restricted
        .iter()
        .map(|u| match u {
            Ultrafilter::Principal(c) => Some(*c),
            _ => None,
        })
        .collect();
    let principal_candidate = |c: u64| -> Result<bool> {
        let singleton = SymSet::singleton(vec![c]);
        tensor_member(&restricted, &singleton.pre(op, 1)?)
    };
    if let Some(cs) = points.iter().copied().collect::<Option<Vec<u64>>>() {
        let c = op.apply(&cs);
        if principal_candidate(c)? {
            return Ok(Ultrafilter::Principal(c));
        }
        return Err(Error::Inconclusive(format!(
            "the product of principal factors does not contain the fiber over {c}"
        )));
    }
    let mut candidates = BTreeSet::new();
    let free = points.iter().filter(|p| p.is_none()).count();
    let per = if free <= 2 { opts.scan_bound } else { 8 };
    let mut args: Vec<u64> = points.iter().map(|p| p.unwrap_or(0)).collect();
    scan_free(&points, 0, per, &mut args, &mut |a| {
        candidates.insert(op.apply(a));
    });
    for c in candidates.into_iter().take(opts.scan_bound as usize + 1) {
        if principal_candidate(c)? {
            return Ok(Ultrafilter::Principal(c));
        }
    }
    Ok(Ultrafilter::Cofinite)
}

fn scan_free(points: &[Option<u64>], i: usize, bound: u64, args: &mut Vec<u64>, f: &mut dyn FnMut(&[u64])) {
    if i == points.len() {
        f(args);
        return;
    }
    match points[i] {
        Some(c) => {
            args[i] = c;
            scan_free(points, i + 1, bound, args, f);
        }
        None => {
            for v in 0..=bound {
                args[i] = v;
                scan_free(points, i + 1, bound, args, f);
            }
        }
    }
}

/// `f_*(U, …, U) = U` on finite and cofinite sets.
pub fn is_idempotent(op: &dyn Operation, u: &Ultrafilter) -> Result<bool> {
    let factors = vec![u.clone(); op.arity()];
    Ok(pushforward(op, &factors)? == u.restricted())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssociativityReport {
    pub op: String,
    pub triples: usize,
    pub failures: Vec<String>,
}

impl AssociativityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `f_*(f_*(U₁, U₂), U₃) = f_*(U₁, f_*(U₂, U₃))` on every triple.
pub fn check_associativity(op: &OpDef, pool: &[Ultrafilter]) -> Result<AssociativityReport> {
    let flags = op.flags();
    if op.arity() != 2 || !flags.associative || !flags.finite_fibers {
        return Err(Error::Precondition(format!(
            "`{}` must be binary, associative and have finite fibers",
            op.name()
        )));
    }
    let mut report = AssociativityReport {
        op: op.name().to_string(),
        triples: 0,
        failures: Vec::new(),
    };
    let mut memo: Vec<((Ultrafilter, Ultrafilter), Ultrafilter)> = Vec::new();
    let mut push = |x: &Ultrafilter, y: &Ultrafilter| -> Result<Ultrafilter> {
        if let Some((_, r)) = memo.iter().find(|(k, _)| k.0 == *x && k.1 == *y) {
            return Ok(r.clone());
        }
        let r = pushforward(op, &[x.clone(), y.clone()])?;
        memo.push(((x.clone(), y.clone()), r.clone()));
        Ok(r)
    };
    for a in pool {
        for b in pool {
            let ab = push(a, b)?;
            for c in pool {
                report.triples += 1;
                let left = push(&ab, c)?;
                let bc = push(b, c)?;
                let right = push(a, &bc)?;
                if left != right {
                    report.failures.push(format!("({a}, {b}, {c}): {left} vs {right}"));
                }
            }
        }
    }
    Ok(report)
}

/// `{(x̄₁, …, x̄_m) : (h₁(x̄₁), …, h_m(x̄_m)) ∈ X}` for `X ⊆ ω^m`.
pub fn product_preimage(hs: &[&dyn Operation], x: &SymSet) -> Result<SymSet> {
    if hs.len() != x.dim() {
        return Err(Error::Dimension(format!(
            "{} maps for a set of dimension {}",
            hs.len(),
            x.dim()
        )));
    }
    let dim: usize = hs.iter().map(|h| h.arity()).sum();
    let mut support = Vec::new();
    for t in x.support() {
        let mut partial: Vec<Vec<u64>> = vec![Vec::new()];
        for (h, &v) in hs.iter().zip(t) {
            let fiber = h.fiber(v).ok_or_else(|| {
                Error::Precondition(format!("`{}` is not known to have finite fibers", h.describe()))
            })?;
            partial = partial
                .iter()
                .flat_map(|p| {
                    fiber.iter().map(move |f| {
                        let mut q = p.clone();
                        q.extend_from_slice(f);
                        q
                    })
                })
                .collect();
        }
        support.extend(partial);
    }
    SymSet::new(dim, x.mode(), support)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderlyIdempotenceReport {
    pub terms: usize,
    pub identity_checks: usize,
    pub failures: Vec<String>,
}

impl OrderlyIdempotenceReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// For every orderly term `t` of arity ≤ `arity_bound`, checks
/// `t_*(U, …, U) = U`. For `t = f(h₁, …, h_m)` it also checks on
/// `samples_per_term` random sets `X ⊆ ω^m` that
/// `X ∈ h₁_*(U) ⊗ ⋯ ⊗ h_m_*(U)` exactly when the product preimage of `X`
/// belongs to the matching power of `U`.
pub fn orderly_idempotence_check(
    sig: &Signature,
    u: &Ultrafilter,
    arity_bound: usize,
    samples_per_term: usize,
    seed: u64,
) -> Result<OrderlyIdempotenceReport> {
    for op in sig.ops() {
        if !op.flags().finite_fibers {
            return Err(Error::Precondition(format!(
                "`{}` is not known to have finite fibers",
                op.name()
            )));
        }
        if !is_idempotent(op.as_ref(), u)? {
            return Err(Error::Precondition(format!(
                "the ultrafilter is not idempotent for `{}`",
                op.name()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OrderlyIdempotenceReport {
        terms: 0,
        identity_checks: 0,
        failures: Vec::new(),
    };
    let target = u.restricted();
    let mut terms = TermEnumerator::new(sig);
    for m in 1..=arity_bound {
        for t in terms.terms(m, m).iter() {
            report.terms += 1;
            let pushed = pushforward(t, &vec![u.clone(); m])?;
            if pushed != target {
                report.failures.push(format!("{t}: pushforward is {pushed}"));
            }
            let crate::algebra::Term::Apply(_, children) = t else {
                continue;
            };
            let hs: Vec<&dyn Operation> = children.iter().map(|c| c as &dyn Operation).collect();
            let images = children
                .iter()
                .map(|c| pushforward(c, &vec![u.clone(); c.arity()]))
                .collect::<Result<Vec<_>>>()?;
            let power = vec![u.clone(); m];
            for _ in 0..samples_per_term {
                let x = random_symset(&mut rng, children.len(), 8, 4);
                report.identity_checks += 1;
                let left = tensor_member(&images, &x)?;
                let right = tensor_member(&power, &product_preimage(&hs, &x)?)?;
                if left != right {
                    report.failures.push(format!("{t} on {x}: {left} vs {right}"));
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RestrictionReport {
    pub classification: String,
    pub sets: usize,
    pub disagreements: Vec<String>,
}

impl RestrictionReport {
    pub fn passed(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Compares the fine ultrafilter with the classification of its restriction
/// to the coarse family, on membership and on pushforward membership along
/// `op`, over sampled one-dimensional literals shared by both families.
pub fn check_restriction(
    coarse: &Family,
    fine: &Family,
    u_fine: &Ultrafilter,
    op: &OpDef,
    samples: usize,
    seed: u64,
) -> Result<RestrictionReport> {
    check_restriction_against(coarse, fine, u_fine, &u_fine.restricted(), op, samples, seed)
}

/// Like [`check_restriction`] with an explicitly claimed classification.
pub fn check_restriction_against(
    coarse: &Family,
    fine: &Family,
    u_fine: &Ultrafilter,
    claimed: &Ultrafilter,
    op: &OpDef,
    samples: usize,
    seed: u64,
) -> Result<RestrictionReport> {
    if matches!(claimed, Ultrafilter::FrChain(_)) {
        return Err(Error::Invalid(
            "a restriction to finite and cofinite sets is principal or cofinite".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shared: Vec<SymSet> = coarse
        .members
        .iter()
        .filter(|m| fine.contains(m))
        .filter_map(|m| match m {
            SetTerm::Lit(s) if s.dim() == 1 => Some(s.clone()),
            _ => None,
        })
        .take(samples)
        .collect();
    while shared.len() < samples {
        let s = random_symset(&mut rng, 1, 40, 6);
        if coarse.contains(&SetTerm::Lit(s.clone())) && fine.contains(&SetTerm::Lit(s.clone())) {
            shared.push(s);
        } else {
            return Err(Error::Invalid("the families share no literal sets".into()));
        }
    }
    let pushed_coarse = pushforward(op, &[claimed.clone(), claimed.clone()])?;
    let mut report = RestrictionReport {
        classification: claimed.to_string(),
        sets: shared.len(),
        disagreements: Vec::new(),
    };
    for x in &shared {
        let fine_in = uf_member(u_fine, x)?;
        let coarse_in = uf_member(claimed, x)?;
        if fine_in != coarse_in {
            report.disagreements.push(format!("{x}: membership {fine_in} vs {coarse_in}"));
        }
        let pre = x.pre(op, 1)?;
        let fine_push = tensor_member_pointwise(&[u_fine.clone(), u_fine.clone()], &pre)?;
        let coarse_push = uf_member(&pushed_coarse, x)?;
        if fine_push != coarse_push {
            report
                .disagreements
                .push(format!("{x}: pushforward membership {fine_push} vs {coarse_push}"));
        }
    }
    Ok(report)
}

/// A seeded sample of sets, useful for the law checks.
pub fn sample_symsets(seed: u64, count: usize, dim: usize, entry_bound: u64, max_support: usize) -> Vec<SymSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_symset(&mut rng, dim, entry_bound, max_support))
        .collect()
}

/// The standard pool `{Cof, P₀, …, P_k}`.
pub fn standard_pool(k: u64) -> Vec<Ultrafilter> {
    std::iter::once(Ultrafilter::Cofinite)
        .chain((0..=k).map(Ultrafilter::Principal))
        .collect()
}
