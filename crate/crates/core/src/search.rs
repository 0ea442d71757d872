//! Bounded searches for reductions with monochromatic finite-reduction sets,
//! their iterated form over several colorings, and probes for degeneracy.
//!
//! All searches are depth-first over reductions of a finite window of the
//! seed. Entries are blocks of at most `max_block` seed positions; candidates
//! are tried in order of value, smallest first. Results are re-verified by
//! the brute-force oracles in [`crate::verify`] before they are returned.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::algebra::{Signature, Term, TermEnumerator};
use crate::error::{Error, Result};
use crate::reduction::{
    check_witness, compose_witnesses, diagonalize, fr_enumerate, max_leaves, term_values, Block,
    ReductionWitness, Stage, StageLink, StreamSeq,
};
use crate::verify::{brute_force_fr, common_color};

/// A coloring of `[0, bound]` by colors `0, 1, …, k − 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    colors: Vec<u32>,
    palette: u32,
}

impl Coloring {
    pub fn from_table(colors: Vec<u32>) -> Result<Self> {
        if colors.is_empty() {
            return Err(Error::Invalid("a coloring needs a nonempty domain".into()));
        }
        let used: BTreeSet<u32> = colors.iter().copied().collect();
        let palette = used.len() as u32;
        if used.iter().copied().ne(0..palette) {
            return Err(Error::Invalid(format!(
                "color ids must be contiguous from 0, got {used:?}"
            )));
        }
        Ok(Coloring { colors, palette })
    }

    /// `v ↦ v mod m`
    pub fn modulo(m: u64, bound: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("modulus must be positive".into()));
        }
        Self::from_table((0..=bound).map(|v| (v % m) as u32).collect())
    }

    pub fn single(bound: u64) -> Self {
        Self::from_table(vec![0; bound as usize + 1]).expect("one color")
    }

    /// Color 1 on `members`, 0 elsewhere.
    pub fn indicator(members: &BTreeSet<u64>, bound: u64) -> Result<Self> {
        Self::from_table((0..=bound).map(|v| u32::from(members.contains(&v))).collect())
    }

    /// `parity`, `single`, or `mod<k>`.
    pub fn builtin(name: &str, bound: u64) -> Option<Self> {
        match name {
            "parity" => Self::modulo(2, bound).ok(),
            "single" => Some(Self::single(bound)),
            _ => name.strip_prefix("mod")?.parse().ok().and_then(|m| Self::modulo(m, bound).ok()),
        }
    }

    pub fn bound(&self) -> u64 {
        self.colors.len() as u64 - 1
    }

    pub fn palette(&self) -> u32 {
        self.palette
    }

    pub fn color_of(&self, v: u64) -> Option<u32> {
        usize::try_from(v).ok().and_then(|i| self.colors.get(i)).copied()
    }

    pub fn to_json(&self) -> Value {
        json!({ "kind": "table", "colors": self.colors })
    }

    /// Accepts `{kind: mod, modulus, bound}`, `{kind: single, bound}`,
    /// `{kind: indicator, members, bound}` and `{kind: table, colors}`.
    /// `default_bound` fills in a missing bound.
    pub fn from_json(v: &Value, default_bound: u64) -> Result<Self> {
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Invalid(format!("coloring needs a kind: {v}")))?;
        let bound = v.get("bound").and_then(Value::as_u64).unwrap_or(default_bound);
        match kind {
            "mod" => Self::modulo(
                v.get("modulus")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::Invalid("mod coloring needs a modulus".into()))?,
                bound,
            ),
            "single" => Ok(Self::single(bound)),
            "indicator" => {
                let members: BTreeSet<u64> =
                    serde_json::from_value(v.get("members").cloned().unwrap_or_default())?;
                Self::indicator(&members, bound)
            }
            "table" => Self::from_table(serde_json::from_value(
                v.get("colors").cloned().unwrap_or_default(),
            )?),
            other => Err(Error::Invalid(format!("unknown coloring kind `{other}`"))),
        }
    }
}

/// Limits of a search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchBudget {
    /// Length `L` of the reduction sought.
    pub seq_length: usize,
    /// Every finite-reduction value must stay at most this.
    pub value_bound: u64,
    /// Depth of the terms applied to blocks.
    pub term_depth: usize,
    /// Search nodes before giving up.
    pub node_limit: usize,
    /// Seed entries considered.
    pub seed_window: usize,
    /// Largest block of seed entries combined into one entry.
    pub max_block: usize,
    /// Extra length per remaining stage in iterated searches.
    pub stage_slack: usize,
}

impl SearchBudget {
    pub fn new(seq_length: usize, value_bound: u64) -> Self {
        SearchBudget {
            seq_length,
            value_bound,
            term_depth: 3,
            node_limit: 200_000,
            seed_window: 24,
            max_block: 4,
            stage_slack: seq_length,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.seq_length == 0
            || self.value_bound == 0
            || self.term_depth == 0
            || self.node_limit == 0
            || self.seed_window == 0
            || self.max_block == 0
        {
            return Err(Error::Invalid("search budgets must be positive".into()));
        }
        Ok(())
    }
}

/// A verified reduction with a monochromatic finite-reduction set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Found {
    pub values: Vec<u64>,
    pub color: u32,
    /// Certifies `values ⊴` the seed.
    pub witness: ReductionWitness,
    pub fr: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Found),
    /// Every candidate in the bounded search space was tried.
    Exhausted { nodes: usize },
    /// The node limit was reached first.
    BudgetExhausted { nodes: usize },
}

impl SearchOutcome {
    pub fn found(&self) -> Option<&Found> {
        match self {
            SearchOutcome::Found(f) => Some(f),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            SearchOutcome::Found(f) => json!({
                "status": "found",
                "witness": f.values,
                "color": f.color,
                "reduction": f.witness.to_json(),
                "fr": f.fr,
                "verified": true,
            }),
            SearchOutcome::Exhausted { nodes } => json!({ "status": "exhausted", "nodes": nodes }),
            SearchOutcome::BudgetExhausted { nodes } => {
                json!({ "status": "budget-exhausted", "nodes": nodes })
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    value: u64,
    block: Vec<usize>,
    term: Term,
}

enum Flow {
    Done,
    Continue,
    Budget,
}

struct Engine<'a> {
    sig: &'a Signature,
    window: Vec<u64>,
    cands: Vec<Candidate>,
    fr_depth: usize,
    bound: u64,
    node_limit: usize,
    nodes: usize,
}

impl<'a> Engine<'a> {
    fn new(sig: &'a Signature, seed: &StreamSeq, budget: &SearchBudget) -> Result<Self> {
        budget.validate()?;
        let len = seed.known_len().map_or(budget.seed_window, |l| l.min(budget.seed_window));
        let window = seed.take(len)?;
        let block_cap = max_leaves(sig, budget.term_depth).min(budget.max_block).max(1);
        let inflationary = sig.all_inflationary();
        let mut best: BTreeMap<(u64, usize), Vec<usize>> = BTreeMap::new();
        let mut idx = Vec::new();
        let mut visit = |idx: &[usize]| {
            let vals: Vec<u64> = idx.iter().map(|&i| window[i]).collect();
            for v in term_values(&vals, sig, budget.term_depth) {
                if v > budget.value_bound {
                    continue;
                }
                let key = (v, idx[0]);
                let better = best.get(&key).map_or(true, |b| {
                    (idx.last(), idx) < (b.last(), b.as_slice())
                });
                if better {
                    best.insert(key, idx.to_vec());
                }
            }
        };
        subsets(&window, 0, block_cap, inflationary.then_some(budget.value_bound), &mut idx, &mut visit);
        let mut terms = TermEnumerator::new(sig);
        let mut cands = Vec::with_capacity(best.len());
        for ((value, _), block) in best {
            let vals: Vec<u64> = block.iter().map(|&i| window[i]).collect();
            let term = terms
                .terms(vals.len(), budget.term_depth)
                .iter()
                .find(|t| t.eval(&vals).ok() == Some(value))
                .cloned()
                .expect("value came from a term of this arity and depth");
            cands.push(Candidate { value, block, term });
        }
        cands.sort_by(|a, b| (a.value, &a.block).cmp(&(b.value, &b.block)));
        let fr_depth = if sig.all_arities_at_least_two() {
            budget.seq_length
        } else {
            budget.seq_length.max(budget.term_depth)
        };
        Ok(Engine {
            sig,
            window,
            cands,
            fr_depth,
            bound: budget.value_bound,
            node_limit: budget.node_limit,
            nodes: 0,
        })
    }

    fn fr(&self, values: &[u64]) -> BTreeSet<u64> {
        fr_enumerate(values, self.sig, self.fr_depth)
    }

    fn witness(&self, picks: &[usize]) -> ReductionWitness {
        ReductionWitness {
            blocks: picks
                .iter()
                .map(|&c| Block {
                    indices: self.cands[c].block.clone(),
                    term: self.cands[c].term.clone(),
                })
                .collect(),
        }
    }

    /// Depth-first search; `accept` sees each extended prefix and its FR set
    /// and returns whether to descend, `complete` sees full-length results.
    fn dfs(
        &mut self,
        length: usize,
        last: Option<usize>,
        picks: &mut Vec<usize>,
        values: &mut Vec<u64>,
        accept: &mut dyn FnMut(&[u64], &BTreeSet<u64>) -> bool,
        complete: &mut dyn FnMut(&Self, &[usize], &[u64], &BTreeSet<u64>) -> bool,
    ) -> Flow {
        for c in 0..self.cands.len() {
            if last.is_some_and(|l| self.cands[c].block[0] <= l) {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.node_limit {
                return Flow::Budget;
            }
            values.push(self.cands[c].value);
            picks.push(c);
            let fr = self.fr(values);
            if fr.last().is_some_and(|&m| m <= self.bound) && accept(values, &fr) {
                if values.len() == length {
                    if complete(self, picks, values, &fr) {
                        return Flow::Done;
                    }
                } else {
                    let end = *self.cands[c].block.last().expect("nonempty block");
                    match self.dfs(length, Some(end), picks, values, accept, complete) {
                        Flow::Continue => {}
                        other => return other,
                    }
                }
            }
            values.pop();
            picks.pop();
        }
        Flow::Continue
    }
}

fn subsets(
    window: &[u64],
    from: usize,
    cap: usize,
    value_cap: Option<u64>,
    idx: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    for i in from..window.len() {
        if value_cap.is_some_and(|c| window[i] > c) {
            continue;
        }
        idx.push(i);
        visit(idx);
        if idx.len() < cap {
            subsets(window, i + 1, cap, value_cap, idx, visit);
        }
        idx.pop();
    }
}

/// Searches for a reduction of the seed of length `L` whose
/// finite-reduction set stays within the value bound and is monochromatic.
pub fn search_monochromatic(
    sig: &Signature,
    seed: &StreamSeq,
    coloring: &Coloring,
    budget: &SearchBudget,
) -> Result<SearchOutcome> {
    if coloring.bound() < budget.value_bound {
        return Err(Error::Invalid(format!(
            "the coloring covers [0, {}] but the value bound is {}",
            coloring.bound(),
            budget.value_bound
        )));
    }
    let mut engine = Engine::new(sig, seed, budget)?;
    let mut result = None;
    let flow = engine.dfs(
        budget.seq_length,
        None,
        &mut Vec::new(),
        &mut Vec::new(),
        &mut |_, fr| common_color(fr.iter().copied(), |v| coloring.color_of(v)).is_some(),
        &mut |e, picks, values, fr| {
            let color = common_color(fr.iter().copied(), |v| coloring.color_of(v))
                .expect("accepted prefixes are monochromatic");
            result = Some(Found {
                values: values.to_vec(),
                color,
                witness: e.witness(picks),
                fr: fr.clone(),
            });
            true
        },
    );
    let nodes = engine.nodes;
    match flow {
        Flow::Done => {
            let found = result.expect("completion records a result");
            verify_found(sig, &engine.window, &found, engine.fr_depth, coloring)?;
            Ok(SearchOutcome::Found(found))
        }
        Flow::Continue => Ok(SearchOutcome::Exhausted { nodes }),
        Flow::Budget => Ok(SearchOutcome::BudgetExhausted { nodes }),
    }
}

fn verify_found(
    sig: &Signature,
    window: &[u64],
    found: &Found,
    fr_depth: usize,
    coloring: &Coloring,
) -> Result<()> {
    if !check_witness(&found.values, window, &found.witness, sig)? {
        return Err(Error::Invalid("search produced a witness that does not check".into()));
    }
    let brute = brute_force_fr(&found.values, sig, fr_depth)?;
    if brute != found.fr
        || common_color(brute.iter().copied(), |v| coloring.color_of(v)) != Some(found.color)
    {
        return Err(Error::Invalid(
            "search result disagrees with the brute-force oracle".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IteratedFound {
    pub values: Vec<u64>,
    /// The reductions found for each coloring, each a reduction of the
    /// previous one.
    pub stages: Vec<Found>,
    /// Color of `FR(b − n)` under coloring `n`.
    pub colors: Vec<u32>,
    /// Certifies `values ⊴` the seed.
    pub witness: ReductionWitness,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IteratedOutcome {
    Found(IteratedFound),
    Exhausted { stage: usize, nodes: usize },
    BudgetExhausted { stage: usize, nodes: usize },
}

impl IteratedOutcome {
    pub fn found(&self) -> Option<&IteratedFound> {
        match self {
            IteratedOutcome::Found(f) => Some(f),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            IteratedOutcome::Found(f) => json!({
                "status": "found",
                "witness": f.values,
                "colors": f.colors,
                "stages": f.stages.iter().map(|s| &s.values).collect::<Vec<_>>(),
                "reduction": f.witness.to_json(),
                "verified": true,
            }),
            IteratedOutcome::Exhausted { stage, nodes } => {
                json!({ "status": "exhausted", "stage": stage, "nodes": nodes })
            }
            IteratedOutcome::BudgetExhausted { stage, nodes } => {
                json!({ "status": "budget-exhausted", "stage": stage, "nodes": nodes })
            }
        }
    }
}

/// Finds `b` of length `L` such that `FR(b − n)` is monochromatic for
/// coloring `n`, for every `n < k`: stage `n` is a monochromatic reduction
/// of stage `n − 1` of length `L + slack·(k − 1 − n)`, and `b` is the
/// diagonal through the stages.
pub fn search_iterated(
    sig: &Signature,
    seed: &StreamSeq,
    colorings: &[Coloring],
    budget: &SearchBudget,
) -> Result<IteratedOutcome> {
    let k = colorings.len();
    if k == 0 {
        return Err(Error::Invalid("iterated search needs at least one coloring".into()));
    }
    let mut stages: Vec<Found> = Vec::with_capacity(k);
    let mut current = seed.clone();
    for (n, coloring) in colorings.iter().enumerate() {
        let stage_budget = SearchBudget {
            seq_length: budget.seq_length + budget.stage_slack * (k - 1 - n),
            ..budget.clone()
        };
        match search_monochromatic(sig, &current, coloring, &stage_budget)? {
            SearchOutcome::Found(f) => {
                current = StreamSeq::finite(f.values.clone());
                stages.push(f);
            }
            SearchOutcome::Exhausted { nodes } => return Ok(IteratedOutcome::Exhausted { stage: n, nodes }),
            SearchOutcome::BudgetExhausted { nodes } => {
                return Ok(IteratedOutcome::BudgetExhausted { stage: n, nodes })
            }
        }
    }
    let chain: Vec<Stage> = stages
        .iter()
        .enumerate()
        .map(|(n, f)| Stage {
            seq: StreamSeq::finite(f.values.clone()),
            link: if n == 0 {
                StageLink::Root
            } else {
                StageLink::Explicit(f.witness.blocks.clone())
            },
        })
        .collect();
    let diagonal = match diagonalize(&chain, budget.seq_length) {
        Ok(d) => d,
        Err(Error::NeedPrefix { .. }) => {
            return Ok(IteratedOutcome::BudgetExhausted { stage: k, nodes: 0 })
        }
        Err(e) => return Err(e),
    };
    let b = diagonal.values;
    let mut colors = Vec::with_capacity(k);
    for (n, coloring) in colorings.iter().enumerate() {
        let s = n.min(k - 1);
        if !check_witness(&b[n..], &stages[s].values, &diagonal.witnesses[n], sig)? {
            return Err(Error::Invalid(format!("diagonal tail {n} does not reduce to its stage")));
        }
        let depth = b.len() - n;
        let fr = fr_enumerate(&b[n..], sig, depth.max(budget.term_depth));
        let brute = brute_force_fr(&b[n..], sig, depth.max(budget.term_depth))?;
        let color = common_color(fr.iter().copied(), |v| coloring.color_of(v));
        if fr != brute || color.is_none() || color != Some(stages[s].color) {
            return Err(Error::Invalid(format!(
                "diagonal tail {n} is not monochromatic for its coloring"
            )));
        }
        colors.push(color.expect("checked above"));
    }
    let witness = compose_witnesses(&diagonal.witnesses[0], &stages[0].witness)?;
    let window = seed.take(witness.max_index().map_or(0, |m| m + 1))?;
    if !check_witness(&b, &window, &witness, sig)? {
        return Err(Error::Invalid("composed witness does not check against the seed".into()));
    }
    Ok(IteratedOutcome::Found(IteratedFound {
        values: b,
        stages,
        colors,
        witness,
    }))
}

/// Result of [`probe_degeneracy`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegeneracyProbe {
    pub values: Vec<u64>,
    pub witness: ReductionWitness,
    pub fr: BTreeSet<u64>,
    pub cardinality: usize,
    /// Whether the bounded search space was covered before the node limit.
    pub exhaustive: bool,
    pub nodes: usize,
}

impl DegeneracyProbe {
    pub fn to_json(&self) -> Value {
        json!({
            "status": "found",
            "witness": self.values,
            "cardinality": self.cardinality,
            "fr": self.fr,
            "reduction": self.witness.to_json(),
            "exhaustive": self.exhaustive,
            "nodes": self.nodes,
        })
    }
}

/// Branch and bound for a reduction of length `L ≥ 2` with the fewest
/// finite-reduction values. `None` when no reduction fits the budget.
pub fn probe_degeneracy(
    sig: &Signature,
    seed: &StreamSeq,
    budget: &SearchBudget,
) -> Result<Option<DegeneracyProbe>> {
    if budget.seq_length < 2 {
        return Err(Error::Invalid(
            "degeneracy probes need sequences of length at least 2".into(),
        ));
    }
    let mut engine = Engine::new(sig, seed, budget)?;
    let best_size = std::cell::Cell::new(usize::MAX);
    let mut best: Option<(Vec<u64>, ReductionWitness, BTreeSet<u64>)> = None;
    let flow = engine.dfs(
        budget.seq_length,
        None,
        &mut Vec::new(),
        &mut Vec::new(),
        &mut |_, fr| fr.len() < best_size.get(),
        &mut |e, picks, values, fr| {
            best_size.set(fr.len());
            best = Some((values.to_vec(), e.witness(picks), fr.clone()));
            fr.len() == 1
        },
    );
    let nodes = engine.nodes;
    let Some((values, witness, fr)) = best else {
        return Ok(None);
    };
    if !check_witness(&values, &engine.window, &witness, sig)?
        || brute_force_fr(&values, sig, engine.fr_depth)? != fr
    {
        return Err(Error::Invalid("probe result failed re-verification".into()));
    }
    Ok(Some(DegeneracyProbe {
        cardinality: fr.len(),
        values,
        witness,
        fr,
        exhaustive: !matches!(flow, Flow::Budget),
        nodes,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::OpDef;
    use crate::verify::subset_sums;

    fn naturals() -> StreamSeq {
        StreamSeq::positive_naturals()
    }

    #[test]
    fn coloring_validation() {
        assert!(Coloring::from_table(vec![0, 2]).is_err());
        assert!(Coloring::from_table(vec![]).is_err());
        let c = Coloring::modulo(3, 10).unwrap();
        assert_eq!(c.palette(), 3);
        assert_eq!(c.color_of(7), Some(1));
        assert_eq!(c.color_of(11), None);
        let j = json!({"kind": "indicator", "members": [5], "bound": 6});
        let ind = Coloring::from_json(&j, 0).unwrap();
        assert_eq!(ind.color_of(5), Some(1));
        assert_eq!(Coloring::from_json(&ind.to_json(), 0).unwrap(), ind);
        assert_eq!(Coloring::builtin("mod4", 8).unwrap().palette(), 4);
    }

    #[test]
    fn parity_search() {
        let out = search_monochromatic(
            &Signature::plus(),
            &naturals(),
            &Coloring::modulo(2, 200).unwrap(),
            &SearchBudget::new(4, 200),
        )
        .unwrap();
        let f = out.found().expect("found");
        assert_eq!(f.values, vec![2, 4, 6, 8]);
        assert_eq!(f.color, 0);
        assert!(subset_sums(&f.values).iter().all(|s| s % 2 == 0));
    }

    #[test]
    fn mod_three_search() {
        let out = search_monochromatic(
            &Signature::plus(),
            &naturals(),
            &Coloring::modulo(3, 300).unwrap(),
            &SearchBudget::new(4, 300),
        )
        .unwrap();
        let f = out.found().expect("found");
        assert_eq!(f.values.len(), 4);
        assert_eq!(f.color, 0);
        assert!(subset_sums(&f.values).iter().all(|s| s % 3 == 0));
    }

    #[test]
    fn single_color_takes_the_first_entries() {
        let seed = StreamSeq::finite(vec![5, 7, 11, 13, 17]);
        let out = search_monochromatic(
            &Signature::plus(),
            &seed,
            &Coloring::single(100),
            &SearchBudget::new(3, 100),
        )
        .unwrap();
        assert_eq!(out.found().unwrap().values, vec![5, 7, 11]);
    }

    #[test]
    fn impossible_and_budget_outcomes() {
        let seed = StreamSeq::with_rule(vec![], crate::reduction::Rule::Arithmetic { start: 5, step: 1 });
        let ind = Coloring::indicator(&BTreeSet::from([5]), 5).unwrap();
        let out = search_monochromatic(&Signature::plus(), &seed, &ind, &SearchBudget::new(2, 5)).unwrap();
        assert!(matches!(out, SearchOutcome::Exhausted { .. }));
        let tight = SearchBudget {
            node_limit: 3,
            ..SearchBudget::new(4, 300)
        };
        let out = search_monochromatic(
            &Signature::plus(),
            &naturals(),
            &Coloring::modulo(3, 300).unwrap(),
            &tight,
        )
        .unwrap();
        assert_eq!(out, SearchOutcome::BudgetExhausted { nodes: 4 });
        assert!(search_monochromatic(
            &Signature::plus(),
            &naturals(),
            &Coloring::modulo(3, 10).unwrap(),
            &SearchBudget::new(4, 300)
        )
        .is_err());
    }

    #[test]
    fn iterated_search_evens_then_fours() {
        let cols = [Coloring::modulo(2, 300).unwrap(), Coloring::modulo(4, 300).unwrap()];
        let out = search_iterated(&Signature::plus(), &naturals(), &cols, &SearchBudget::new(4, 300))
            .unwrap();
        let f = out.found().expect("found");
        assert_eq!(f.values, vec![2, 4, 8, 12]);
        assert!(subset_sums(&f.values).iter().all(|s| s % 2 == 0));
        assert!(subset_sums(&f.values[1..]).iter().all(|s| s % 4 == 0));
    }

    #[test]
    fn iterated_single_stage_matches_plain_search() {
        let col = Coloring::modulo(3, 300).unwrap();
        let budget = SearchBudget::new(4, 300);
        let plain = search_monochromatic(&Signature::plus(), &naturals(), &col, &budget).unwrap();
        let it = search_iterated(&Signature::plus(), &naturals(), &[col], &budget).unwrap();
        assert_eq!(it.found().unwrap().values, plain.found().unwrap().values);
    }

    #[test]
    fn degeneracy_probes() {
        let zero = Signature::single(OpDef::const_zero());
        let p = probe_degeneracy(&zero, &naturals(), &SearchBudget::new(4, 1000))
            .unwrap()
            .unwrap();
        assert_eq!(p.cardinality, 1);
        assert_eq!(p.values, vec![0, 0, 0, 0]);
        let p = probe_degeneracy(
            &Signature::plus(),
            &StreamSeq::powers(2),
            &SearchBudget {
                node_limit: 20_000,
                ..SearchBudget::new(4, 64)
            },
        )
        .unwrap()
        .unwrap();
        assert_eq!(p.cardinality, 15);
        assert!(probe_degeneracy(&zero, &naturals(), &SearchBudget::new(1, 10)).is_err());
    }

    #[test]
    fn searches_are_deterministic() {
        let col = Coloring::modulo(3, 300).unwrap();
        let budget = SearchBudget::new(4, 300);
        let a = search_monochromatic(&Signature::plus(), &naturals(), &col, &budget).unwrap();
        let b = search_monochromatic(&Signature::plus(), &naturals(), &col, &budget).unwrap();
        assert_eq!(a, b);
    }
}
