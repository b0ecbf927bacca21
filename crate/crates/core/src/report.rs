//! Machine-readable run reports.

use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    /// How value is compared with threshold: "<", ">" or "==".
    pub relation: &'static str,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < threshold,
            value,
            threshold,
            relation: "<",
        }
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value > threshold,
            value,
            threshold,
            relation: ">",
        }
    }

    pub fn equal(name: impl Into<String>, value: f64, expected: f64) -> Self {
        Self {
            name: name.into(),
            passed: value == expected,
            value,
            threshold: expected,
            relation: "==",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool_version: String,
    pub command: String,
    pub config_digest: Option<String>,
    pub seed: u64,
    pub sections: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    /// Wall-clock seconds per phase; the only non-deterministic part.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_digest: None,
            seed,
            sections: BTreeMap::new(),
            checks: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn section<T: Serialize>(&mut self, name: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or_else(|e| Value::String(e.to_string()));
        self.sections.insert(name.to_string(), v);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are serializable")
    }

    /// The report without its timings, for reproducibility comparisons.
    pub fn deterministic_json(&self) -> String {
        let mut r = self.clone();
        r.timings.clear();
        r.to_json()
    }

    pub fn summary(&self) -> String {
        let mut s = format!("neckglue {} {}\n", self.tool_version, self.command);
        if let Some(d) = &self.config_digest {
            s.push_str(&format!("config {}\n", &d[..16.min(d.len())]));
        }
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {}: {:e} {} {:e}\n",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.value,
                c.relation,
                c.threshold
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        s.push_str(&format!("{} checks, {failed} failed\n", self.checks.len()));
        s
    }
}
