//! Run reports: headline metrics and one pass/fail entry per assertion.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    /// Acceptance criterion this assertion implements, if any.
    pub criterion: Option<u8>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub files: Vec<String>,
    pub metrics: Map<String, Value>,
    pub assertions: Vec<Assertion>,
    pub runtime_seconds: f64,
}

impl RunReport {
    pub fn new(config: ScenarioConfig) -> Self {
        Self {
            config,
            files: Vec::new(),
            metrics: Map::new(),
            assertions: Vec::new(),
            runtime_seconds: 0.0,
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }

    /// Records an assertion. Names must be unique within a report.
    pub fn assert(&mut self, name: &str, criterion: Option<u8>, passed: bool, detail: impl Into<String>) {
        assert!(
            self.assertions.iter().all(|a| a.name != name),
            "assertion '{name}' recorded twice"
        );
        self.assertions.push(Assertion {
            name: name.to_string(),
            criterion,
            passed,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// JSON numbers cannot hold NaN or infinities; those become strings.
pub fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(x.to_string()), Value::Number)
}

pub fn numbers(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| number(x)).collect())
}
