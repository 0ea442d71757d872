//! Ultrafilter expressions for `uf eval`.
//!
//! ```text
//! expr := "cofinite" | "p<c>" | {"kind": …}
//!       | {"principal": c} | {"cofinite": _}
//!       | {"pushforward": {"op": op, "args": [expr, …]}}
//!       | {"tensor": [expr, …]}
//!       | {"member": {"set": symset, "in": expr}}
//! ```

use anyhow::{anyhow, bail, Result};
use serde_json::{json, Value};

use ramsey_core::ultrafilter::{pushforward, tensor_member, uf_member, Ultrafilter};

use crate::input;

pub enum Evaluated {
    Uf(Ultrafilter),
    Tensor(Vec<Ultrafilter>),
    Bool(bool),
}

impl Evaluated {
    pub fn to_json(&self) -> Value {
        match self {
            Evaluated::Uf(u) => u.to_json(),
            Evaluated::Tensor(fs) => json!({ "tensor": fs.iter().map(Ultrafilter::to_json).collect::<Vec<_>>() }),
            Evaluated::Bool(b) => json!(b),
        }
    }
}

fn describe(fs: &[Ultrafilter]) -> String {
    fs.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ⊗ ")
}

pub fn eval(v: &Value, trace: &mut Vec<String>) -> Result<Evaluated> {
    if v.is_string() || v.get("kind").is_some() {
        return Ok(Evaluated::Uf(Ultrafilter::from_json(v)?));
    }
    let obj = v.as_object().ok_or_else(|| anyhow!("bad expression {v}"))?;
    if obj.len() != 1 {
        bail!("an expression node has exactly one key: {v}");
    }
    let (key, body) = obj.iter().next().expect("one entry");
    match key.as_str() {
        "principal" => {
            let c = body.as_u64().ok_or_else(|| anyhow!("principal needs a natural"))?;
            Ok(Evaluated::Uf(Ultrafilter::Principal(c)))
        }
        "cofinite" => Ok(Evaluated::Uf(Ultrafilter::Cofinite)),
        "pushforward" => {
            let op = match body.get("op") {
                Some(Value::String(s)) => input::op(s)?,
                Some(o) => input::op(&o.to_string())?,
                None => bail!("pushforward needs an op"),
            };
            let args = body
                .get("args")
                .and_then(Value::as_array)
                .ok_or_else(|| anyhow!("pushforward needs args"))?;
            let factors = args
                .iter()
                .map(|a| match eval(a, trace)? {
                    Evaluated::Uf(u) => Ok(u),
                    _ => bail!("pushforward arguments must be ultrafilters"),
                })
                .collect::<Result<Vec<_>>>()?;
            let out = pushforward(&op, &factors)?;
            trace.push(format!("{}_*({}) = {out}", op.name(), describe(&factors)));
            Ok(Evaluated::Uf(out))
        }
        "tensor" => {
            let factors = body
                .as_array()
                .ok_or_else(|| anyhow!("tensor needs a list"))?
                .iter()
                .map(|a| match eval(a, trace)? {
                    Evaluated::Uf(u) => Ok(u),
                    _ => bail!("tensor factors must be ultrafilters"),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Evaluated::Tensor(factors))
        }
        "member" => {
            let set = input::symset(body.get("set").ok_or_else(|| anyhow!("member needs a set"))?)?;
            let target = eval(body.get("in").ok_or_else(|| anyhow!("member needs `in`"))?, trace)?;
            let (answer, name) = match &target {
                Evaluated::Uf(u) => (uf_member(u, &set)?, u.to_string()),
                Evaluated::Tensor(fs) => (tensor_member(fs, &set)?, describe(fs)),
                Evaluated::Bool(_) => bail!("membership needs an ultrafilter or tensor product"),
            };
            trace.push(format!("{set} {} {name}", if answer { "∈" } else { "∉" }));
            Ok(Evaluated::Bool(answer))
        }
        other => bail!("unknown expression node `{other}`"),
    }
}
