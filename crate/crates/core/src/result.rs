use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::geometry::Pose;

/// The counting algorithms a caller can select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Naive,
    PrimalDual,
    Canonical,
    /// Brute-force evaluation at every naive grid vertex. Desk-scale inputs only.
    Oracle,
}

impl Method {
    pub const SOLVERS: [Method; 3] = [Method::Naive, Method::PrimalDual, Method::Canonical];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::PrimalDual => "primal-dual",
            Method::Canonical => "canonical",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "naive" => Ok(Method::Naive),
            "primal-dual" | "primal_dual" | "pd" => Ok(Method::PrimalDual),
            "canonical" => Ok(Method::Canonical),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::InvalidConfig(format!(
                "unknown method '{other}' (expected naive, primal-dual, canonical or oracle)"
            ))),
        }
    }
}

/// One reported grid vertex and its approximate incidence count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub pose: Pose,
    pub count: u64,
}

/// Ranked candidate poses plus diagnostics of the run that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceResult {
    pub method: Method,
    /// The requested epsilon.
    pub epsilon: f64,
    /// The epsilon actually used after any snapping.
    pub effective_epsilon: f64,
    /// Best first; ties ordered by grid index.
    pub candidates: Vec<Candidate>,
    pub counters: BTreeMap<String, u64>,
    pub parameters: BTreeMap<String, f64>,
}

impl IncidenceResult {
    pub fn new(method: Method, epsilon: f64, effective_epsilon: f64) -> Self {
        Self {
            method,
            epsilon,
            effective_epsilon,
            candidates: Vec::new(),
            counters: BTreeMap::new(),
            parameters: BTreeMap::new(),
        }
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.candidates.first()
    }

    pub fn counter(&mut self, key: &str, value: u64) {
        self.counters.insert(key.to_string(), value);
    }

    pub fn parameter(&mut self, key: &str, value: f64) {
        self.parameters.insert(key.to_string(), value);
    }
}
