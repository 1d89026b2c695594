//! Scenario files: schema checks and the typed form consumed by [`crate::run`].

use std::fmt;
use std::path::Path;

use dcap_core::Prime;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// An operation the driver can run, with the `params` keys it accepts.
#[derive(Debug)]
pub struct OpInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [&'static str],
    pub takes_module: bool,
}

pub const OPERATIONS: &[OpInfo] = &[
    OpInfo { name: "derham", summary: "de Rham pushforward to a point across the ladder", params: &[], takes_module: true },
    OpInfo { name: "strictness", summary: "preimage-norm profile of the top de Rham differential", params: &["caps"], takes_module: true },
    OpInfo { name: "limit_cokernel", summary: "limit cokernel classes of chosen forms", params: &["forms"], takes_module: true },
    OpInfo { name: "cech_disk", summary: "Cech complex of a built-in covering of the disk", params: &["covering", "sheaf_rank"], takes_module: false },
    OpInfo { name: "kashiwara", summary: "i_+ followed by i^nat on fiber modules", params: &["fiber_dims", "d_caps"], takes_module: false },
    OpInfo { name: "i_plus", summary: "closed pushforward M (x) K{d} of a fiber module", params: &["fiber_dim", "d_cap"], takes_module: false },
    OpInfo { name: "i_nat", summary: "restriction ker(y.) of a connection module", params: &[], takes_module: true },
    OpInfo { name: "f_shriek", summary: "point pullback against projection-then-point pullback", params: &["point"], takes_module: true },
    OpInfo { name: "division", summary: "coordinate division identity with level drop on sampled operators", params: &["samples", "level", "seed"], takes_module: false },
    OpInfo { name: "spencer", summary: "truncated Spencer complex and its rank counts", params: &["nvars", "level"], takes_module: false },
    OpInfo { name: "side_change", summary: "left to right module and back", params: &["samples", "seed"], takes_module: true },
    OpInfo { name: "dual", summary: "duality of rank-one modules, twice, against the O-dual", params: &["samples", "level", "seed"], takes_module: true },
    OpInfo { name: "tensor", summary: "tensor product over O of two connection modules", params: &["right", "samples", "seed"], takes_module: true },
    OpInfo { name: "roos", summary: "constructive Mittag-Leffler preimage on the weighted K{x} tower", params: &["stages", "dim", "samples", "seed"], takes_module: false },
    OpInfo { name: "prenuclear", summary: "pre-nuclearity check on the K{x} tower", params: &["stages", "dim", "lowered", "samples"], takes_module: false },
    OpInfo { name: "coadmissible", summary: "base-change check along a tower of level presentations", params: &["perturb_stage"], takes_module: true },
];

pub fn operation(name: &str) -> Option<&'static OpInfo> {
    OPERATIONS.iter().find(|o| o.name == name)
}

pub fn operation_names() -> Vec<String> {
    OPERATIONS.iter().map(|o| o.name.to_string()).collect()
}

const TOP_KEYS: &[&str] = &["name", "op", "functor", "field", "caps", "module", "params", "out"];
const FIELD_KEYS: &[&str] = &["p", "deg_cap", "op_cap", "levels", "ladder"];

/// One schema problem, located by a dotted field path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// `p`, the caps, the level count and the cap ladder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub p: u64,
    pub deg_cap: usize,
    pub op_cap: usize,
    pub levels: u32,
    pub ladder: Vec<usize>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig { p: 5, deg_cap: 32, op_cap: 16, levels: 4, ladder: vec![32, 64, 128] }
    }
}

impl FieldConfig {
    pub fn prime(&self) -> CliResult<Prime> {
        Ok(Prime::new(self.p)?)
    }
}

/// Command-line values that replace the corresponding `field` entries.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub p: Option<u64>,
    pub deg_cap: Option<usize>,
    pub op_cap: Option<usize>,
    pub levels: Option<u32>,
    pub ladder: Option<Vec<usize>>,
}

impl Overrides {
    pub fn apply(&self, v: &mut Value) {
        let Some(obj) = v.as_object_mut() else { return };
        let key = if obj.contains_key("caps") && !obj.contains_key("field") { "caps" } else { "field" };
        let field = obj.entry(key).or_insert_with(|| Value::Object(Map::new()));
        let Some(field) = field.as_object_mut() else { return };
        if let Some(p) = self.p {
            field.insert("p".into(), p.into());
        }
        if let Some(d) = self.deg_cap {
            field.insert("deg_cap".into(), d.into());
        }
        if let Some(d) = self.op_cap {
            field.insert("op_cap".into(), d.into());
        }
        if let Some(n) = self.levels {
            field.insert("levels".into(), n.into());
        }
        if let Some(l) = &self.ladder {
            field.insert("ladder".into(), l.clone().into());
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: Option<String>,
    pub op: &'static OpInfo,
    pub field: FieldConfig,
    pub module: Option<Value>,
    pub params: Map<String, Value>,
    pub out: Option<String>,
    /// the scenario as read, after overrides
    pub source: Value,
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn op_key(obj: &Map<String, Value>) -> Option<(&'static str, &Value)> {
    ["op", "functor"].into_iter().find_map(|k| obj.get(k).map(|v| (k, v)))
}

fn positive(obj: &Map<String, Value>, key: &str, path: &str, out: &mut Vec<Diagnostic>) {
    if let Some(v) = obj.get(key) {
        match v.as_u64() {
            Some(n) if n > 0 => {}
            _ => out.push(Diagnostic::new(format!("{path}.{key}"), "must be a positive integer")),
        }
    }
}

fn check_field(v: &Value, path: &str, out: &mut Vec<Diagnostic>) {
    let Some(obj) = v.as_object() else {
        out.push(Diagnostic::new(path, "must be an object"));
        return;
    };
    for k in obj.keys().filter(|k| !FIELD_KEYS.contains(&k.as_str())) {
        out.push(Diagnostic::new(format!("{path}.{k}"), format!("unknown key; allowed: {}", FIELD_KEYS.join(", "))));
    }
    if let Some(p) = obj.get("p") {
        match p.as_u64() {
            Some(n) if Prime::new(n).is_ok() => {}
            _ => out.push(Diagnostic::new(format!("{path}.p"), "must be a prime")),
        }
    }
    positive(obj, "deg_cap", path, out);
    positive(obj, "op_cap", path, out);
    if let Some(l) = obj.get("levels") {
        if l.as_u64().is_none_or(|n| n > u32::MAX as u64) {
            out.push(Diagnostic::new(format!("{path}.levels"), "must be a non-negative integer"));
        }
    }
    if let Some(l) = obj.get("ladder") {
        match l.as_array() {
            None => out.push(Diagnostic::new(format!("{path}.ladder"), "must be an array of caps")),
            Some(a) => {
                let caps: Vec<Option<u64>> = a.iter().map(Value::as_u64).collect();
                if a.is_empty() {
                    out.push(Diagnostic::new(format!("{path}.ladder"), "must not be empty"));
                } else if caps.iter().any(|c| c.is_none_or(|c| c == 0)) {
                    out.push(Diagnostic::new(format!("{path}.ladder"), "caps must be positive integers"));
                } else if caps.windows(2).any(|w| w[0] >= w[1]) {
                    out.push(Diagnostic::new(format!("{path}.ladder"), "must be strictly increasing"));
                }
            }
        }
    }
}

fn check_module(v: &Value, path: &str, out: &mut Vec<Diagnostic>) {
    let Some(obj) = v.as_object() else {
        out.push(Diagnostic::new(path, "must be an object"));
        return;
    };
    if let Some(c) = obj.get("cyclic") {
        if !c.is_string() {
            out.push(Diagnostic::new(format!("{path}.cyclic"), "must be an operator string"));
        }
        if obj.get("level").is_some_and(|l| l.as_u64().is_none()) {
            out.push(Diagnostic::new(format!("{path}.level"), "must be a non-negative integer"));
        }
        return;
    }
    match obj.get("rank").and_then(Value::as_u64) {
        Some(r) if r > 0 => {}
        _ => out.push(Diagnostic::new(format!("{path}.rank"), "must be a positive integer")),
    }
    if let Some(vars) = obj.get("vars") {
        let ok = vars.as_u64().is_some_and(|n| n > 0)
            || vars.as_array().is_some_and(|a| !a.is_empty() && a.iter().all(Value::is_string));
        if !ok {
            out.push(Diagnostic::new(format!("{path}.vars"), "must be a positive count or a list of names"));
        }
    }
    if let Some(theta) = obj.get("theta") {
        let ok = theta
            .as_array()
            .is_some_and(|a| a.iter().all(|m| m.as_array().is_some_and(|m| m.iter().all(Value::is_string))));
        if !ok {
            out.push(Diagnostic::new(format!("{path}.theta"), "must be a list of per-variable lists of series strings"));
        }
    }
}

/// Schema check without computation. An empty list means the file is valid.
pub fn validate(v: &Value) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let Some(obj) = v.as_object() else {
        out.push(Diagnostic::new("$", "scenario must be a JSON object"));
        return out;
    };
    for k in obj.keys().filter(|k| !TOP_KEYS.contains(&k.as_str())) {
        out.push(Diagnostic::new(k.clone(), format!("unknown key; allowed: {}", TOP_KEYS.join(", "))));
    }
    let op = match op_key(obj) {
        None => {
            out.push(Diagnostic::new("op", "missing operation name"));
            None
        }
        Some((key, name)) => match name.as_str() {
            None => {
                out.push(Diagnostic::new(key, "must be a string"));
                None
            }
            Some(n) => match operation(n) {
                Some(info) => Some(info),
                None => {
                    out.push(Diagnostic::new(
                        key,
                        format!("unknown operation {n:?}; allowed: {}", operation_names().join(", ")),
                    ));
                    None
                }
            },
        },
    };
    if obj.contains_key("op") && obj.contains_key("functor") {
        out.push(Diagnostic::new("functor", "give either op or functor, not both"));
    }
    if obj.contains_key("field") && obj.contains_key("caps") {
        out.push(Diagnostic::new("caps", "give either field or caps, not both"));
    }
    for key in ["field", "caps"] {
        if let Some(f) = obj.get(key) {
            check_field(f, key, &mut out);
        }
    }
    if let Some(n) = obj.get("name") {
        if !n.is_string() {
            out.push(Diagnostic::new("name", "must be a string"));
        }
    }
    if let Some(o) = obj.get("out") {
        if !o.is_string() {
            out.push(Diagnostic::new("out", "must be a path string"));
        }
    }
    if let Some(m) = obj.get("module") {
        if op.is_some_and(|o| !o.takes_module) {
            out.push(Diagnostic::new("module", format!("operation {:?} takes no module", op.unwrap().name)));
        }
        check_module(m, "module", &mut out);
    }
    match obj.get("params") {
        None => {}
        Some(Value::Object(p)) => {
            if let Some(info) = op {
                for k in p.keys().filter(|k| !info.params.contains(&k.as_str())) {
                    let allowed = if info.params.is_empty() { "none".to_string() } else { info.params.join(", ") };
                    out.push(Diagnostic::new(format!("params.{k}"), format!("not a parameter of {}; allowed: {allowed}", info.name)));
                }
                if info.name == "tensor" {
                    if let Some(r) = p.get("right") {
                        check_module(r, "params.right", &mut out);
                    }
                }
            }
        }
        Some(_) => out.push(Diagnostic::new("params", "must be an object")),
    }
    out
}

impl Scenario {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Scenario> {
        let mut v = read_json(path)?;
        overrides.apply(&mut v);
        Scenario::from_value(v)
    }

    pub fn from_value(v: Value) -> CliResult<Scenario> {
        let diags = validate(&v);
        if !diags.is_empty() {
            let unknown = v.as_object().and_then(op_key).and_then(|(_, n)| n.as_str()).filter(|n| operation(n).is_none());
            if let Some(name) = unknown {
                return Err(CliError::UnknownOperation { name: name.to_string(), allowed: operation_names() });
            }
            return Err(CliError::Invalid(diags));
        }
        let obj = v.as_object().expect("validated");
        let (_, name) = op_key(obj).expect("validated");
        let op = operation(name.as_str().expect("validated")).expect("validated");
        let mut field = FieldConfig::default();
        if let Some(f) = obj.get("field").or_else(|| obj.get("caps")).and_then(Value::as_object) {
            let u = |k: &str| f.get(k).and_then(Value::as_u64);
            if let Some(p) = u("p") {
                field.p = p;
            }
            if let Some(d) = u("deg_cap") {
                field.deg_cap = d as usize;
            }
            if let Some(d) = u("op_cap") {
                field.op_cap = d as usize;
            }
            if let Some(n) = u("levels") {
                field.levels = n as u32;
            }
            if let Some(l) = f.get("ladder").and_then(Value::as_array) {
                field.ladder = l.iter().filter_map(Value::as_u64).map(|c| c as usize).collect();
            }
        }
        Ok(Scenario {
            name: obj.get("name").and_then(Value::as_str).map(str::to_string),
            op,
            field,
            module: obj.get("module").cloned(),
            params: obj.get("params").and_then(Value::as_object).cloned().unwrap_or_default(),
            out: obj.get("out").and_then(Value::as_str).map(str::to_string),
            source: v,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn valid_file_is_silent() {
        let v = json!({"op": "derham", "field": {"p": 5, "ladder": [32, 64]}, "module": {"rank": 1}});
        assert!(validate(&v).is_empty());
    }

    #[test]
    fn ladder_order_names_the_field() {
        let d = validate(&json!({"op": "derham", "field": {"ladder": [64, 32]}}));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "field.ladder");
    }

    #[test]
    fn unknown_functor_lists_the_allowed_set() {
        let d = validate(&json!({"functor": "pushforward"}));
        assert_eq!(d[0].field, "functor");
        assert!(d[0].message.contains("derham, strictness"));
    }

    #[test]
    fn overrides_replace_field_entries() {
        let mut v = json!({"op": "derham", "caps": {"p": 7}});
        Overrides { p: Some(3), ladder: Some(vec![8, 16]), ..Default::default() }.apply(&mut v);
        let s = Scenario::from_value(v).unwrap();
        assert_eq!(s.field.p, 3);
        assert_eq!(s.field.ladder, vec![8, 16]);
    }
}
