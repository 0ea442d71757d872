//! Loading flag values: inline JSON, a path to a JSON file, or a built-in name.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

use ramsey_core::algebra::{OpDef, OpSpec, Signature};
use ramsey_core::reduction::StreamSeq;
use ramsey_core::search::Coloring;
use ramsey_core::sets::{oracle_table, GeneratorOracle, OracleTable, SetTerm, SymSet};
use ramsey_core::ultrafilter::Ultrafilter;

pub fn load(arg: &str) -> Result<Value> {
    let trimmed = arg.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let path = Path::new(trimmed);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {trimmed}"))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing {trimmed}"));
    }
    Ok(Value::String(trimmed.to_string()))
}

pub fn signature(arg: &str) -> Result<Signature> {
    match load(arg)? {
        Value::String(s) => Signature::builtin(&s).ok_or_else(|| anyhow!("unknown signature `{s}`")),
        v => Ok(Signature::from_json(&v)?),
    }
}

pub fn op(arg: &str) -> Result<OpDef> {
    match load(arg)? {
        Value::String(s) => OpDef::builtin(&s).ok_or_else(|| anyhow!("unknown operation `{s}`")),
        v => {
            let spec: OpSpec = serde_json::from_value(v)?;
            Ok(OpDef::from_spec(&spec)?)
        }
    }
}

pub fn sequence(arg: &str) -> Result<StreamSeq> {
    match load(arg)? {
        Value::String(s) => StreamSeq::builtin(&s).ok_or_else(|| anyhow!("unknown sequence `{s}`")),
        v => Ok(StreamSeq::from_json(&v)?),
    }
}

pub fn values(arg: &str) -> Result<Vec<u64>> {
    serde_json::from_value(load(arg)?).with_context(|| format!("expected an array of naturals: {arg}"))
}

pub fn coloring(arg: &str, bound: u64) -> Result<Coloring> {
    match load(arg)? {
        Value::String(s) => Coloring::builtin(&s, bound).ok_or_else(|| anyhow!("unknown coloring `{s}`")),
        v => Ok(Coloring::from_json(&v, bound)?),
    }
}

pub fn colorings(arg: &str, bound: u64) -> Result<Vec<Coloring>> {
    match load(arg)? {
        Value::Array(items) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => {
                    Coloring::builtin(s, bound).ok_or_else(|| anyhow!("unknown coloring `{s}`"))
                }
                v => Ok(Coloring::from_json(v, bound)?),
            })
            .collect(),
        Value::String(s) => s.split(',').map(|c| coloring(c, bound)).collect(),
        v => bail!("expected a list of colorings, got {v}"),
    }
}

pub fn ultrafilter(arg: &str) -> Result<Ultrafilter> {
    Ok(Ultrafilter::from_json(&load(arg)?)?)
}

/// Built-in generator names, comma separated or as a JSON array.
pub fn generators(arg: &str) -> Result<OracleTable> {
    let names: Vec<String> = match load(arg)? {
        Value::String(s) => s.split(',').map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect(),
        v => serde_json::from_value(v)?,
    };
    let oracles = names
        .iter()
        .map(|n| GeneratorOracle::builtin(n).ok_or_else(|| anyhow!("unknown generator `{n}`")))
        .collect::<Result<Vec<_>>>()?;
    Ok(oracle_table(oracles))
}

/// `a..b` (inclusive), a comma list, or a JSON array.
pub fn points(arg: &str) -> Result<BTreeSet<u64>> {
    let arg = arg.trim();
    if let Some((a, b)) = arg.split_once("..") {
        let a: u64 = a.trim().parse().context("range start")?;
        let b: u64 = b.trim().trim_start_matches('=').parse().context("range end")?;
        return Ok((a..=b).collect());
    }
    if arg.starts_with('[') {
        return Ok(serde_json::from_str(arg)?);
    }
    arg.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().with_context(|| format!("bad point `{s}`")))
        .collect()
}

pub fn set_term(arg: &str, sig: &Signature, oracles: &OracleTable) -> Result<SetTerm> {
    Ok(SetTerm::from_json(&load(arg)?, sig, oracles)?)
}

pub fn symset(v: &Value) -> Result<SymSet> {
    Ok(SymSet::from_json(v)?)
}

pub fn dims(arg: &str) -> Result<BTreeSet<usize>> {
    arg.split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad dimension `{s}`")))
        .collect()
}
