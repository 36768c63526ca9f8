//! Verification reports: named checks with a status, a residual description
//! and a witness on failure. Serialized as JSON with sorted keys.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    NotEvaluable,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub residual: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl Check {
    pub fn pass(name: impl Into<String>) -> Self {
        Check { name: name.into(), status: Status::Pass, residual: "0".into(), witness: None }
    }

    pub fn fail(name: impl Into<String>, residual: impl Into<String>, witness: impl Into<String>) -> Self {
        Check { name: name.into(), status: Status::Fail, residual: residual.into(), witness: Some(witness.into()) }
    }

    pub fn not_evaluable(name: impl Into<String>, why: impl Into<String>) -> Self {
        Check { name: name.into(), status: Status::NotEvaluable, residual: why.into(), witness: None }
    }

    /// Pass when `ok`, otherwise fail with the given residual and witness.
    pub fn expect(name: impl Into<String>, ok: bool, residual: impl FnOnce() -> (String, String)) -> Self {
        if ok {
            Check::pass(name)
        } else {
            let (r, w) = residual();
            Check::fail(name, r, w)
        }
    }
}

/// Folds many instances of one check into one line: the worst status wins and
/// the first failure supplies the residual and witness.
#[derive(Debug, Clone)]
pub struct Tally {
    name: String,
    instances: usize,
    worst: Option<Check>,
}

impl Tally {
    pub fn new(name: impl Into<String>) -> Self {
        Tally { name: name.into(), instances: 0, worst: None }
    }

    pub fn record(&mut self, c: Check) {
        self.instances += 1;
        let replace = match &self.worst {
            None => true,
            Some(w) => c.status > w.status,
        };
        if replace {
            self.worst = Some(c);
        }
    }

    pub fn finish(self) -> Check {
        match self.worst {
            None => Check::not_evaluable(self.name, "no instances"),
            Some(w) if w.status == Status::Pass => Check::pass(format!("{} [{}]", self.name, self.instances)),
            Some(w) => Check {
                name: format!("{} [{}]", self.name, self.instances),
                status: w.status,
                residual: w.residual,
                witness: w.witness.map(|x| format!("{}: {}", w.name, x)).or(Some(w.name)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report { command: command.into(), parameters: BTreeMap::new(), checks: Vec::new(), seed: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn param(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), v.into());
        self
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Appends the checks of `other`, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
    }

    pub fn all_pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.status == Status::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status != Status::Pass)
    }

    pub fn find(&self, prefix: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name.starts_with(prefix))
    }

    /// Pretty JSON. Objects go through `serde_json::Value`, whose maps are
    /// ordered, so keys come out sorted and the text is reproducible.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report is serializable");
        let mut s = serde_json::to_string_pretty(&v).expect("value is serializable");
        s.push('\n');
        s
    }
}
