//! Brute-force oracles used to re-check search results. They enumerate
//! subsets and terms directly and share no code with the interval dynamic
//! programme behind [`crate::reduction::fr_enumerate`].

use std::collections::BTreeSet;

use crate::algebra::{Signature, TermEnumerator};
use crate::error::{Error, Result};

/// Largest sequence the subset enumeration accepts.
pub const MAX_BRUTE_LEN: usize = 16;

/// Values of every orderly term of depth ≤ `max_depth` on every nonempty
/// subsequence of `b`.
pub fn brute_force_fr(b: &[u64], sig: &Signature, max_depth: usize) -> Result<BTreeSet<u64>> {
    if b.len() > MAX_BRUTE_LEN {
        return Err(Error::Invalid(format!(
            "brute force is limited to sequences of length {MAX_BRUTE_LEN}"
        )));
    }
    let mut terms = TermEnumerator::new(sig);
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << b.len()) {
        let sub: Vec<u64> = (0..b.len()).filter(|i| mask >> i & 1 == 1).map(|i| b[i]).collect();
        for t in terms.terms(sub.len(), max_depth).iter() {
            out.insert(t.eval(&sub)?);
        }
    }
    Ok(out)
}

/// Sums of the nonempty subsets of `b`, one entry per subset.
pub fn subset_sums(b: &[u64]) -> Vec<u64> {
    assert!(b.len() <= MAX_BRUTE_LEN, "subset enumeration limit");
    (1u32..(1 << b.len()))
        .map(|mask| {
            (0..b.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| b[i])
                .sum()
        })
        .collect()
}

/// The common color of `values`, or `None` when they are not monochromatic
/// or some value has no color.
pub fn common_color(
    values: impl IntoIterator<Item = u64>,
    color_of: impl Fn(u64) -> Option<u32>,
) -> Option<u32> {
    let mut color = None;
    for v in values {
        let c = color_of(v)?;
        match color {
            None => color = Some(c),
            Some(k) if k != c => return None,
            Some(_) => {}
        }
    }
    color
}
