//! Defect reports shared by the consistency and Markov checkers.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Where the worst defect of a scan was found.
///
/// Boundary conditions are listed as one state per site in site order, with
/// `null` for the sites the identity quantifies over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A two-site identity at sites `t`, `s` with states `x, u ∈ X^t`,
    /// `y, v ∈ X^s` and common boundary `z` on `Λ \ {t, s}`.
    Pair {
        t: String,
        s: String,
        x: usize,
        u: usize,
        y: usize,
        v: usize,
        z: Vec<Option<usize>>,
    },
    /// The cocycle identity `Δ(x,u) = Δ(x,α) + Δ(α,u)` at one `(t, z)`.
    Cocycle {
        t: String,
        x: usize,
        u: usize,
        alpha: usize,
        z: Vec<Option<usize>>,
    },
    /// A one-site quantity that should not depend on the states outside
    /// `t ∪ ∂t`: compared at `boundary` and at `reference`.
    Locality {
        t: String,
        x: usize,
        u: Option<usize>,
        boundary: Vec<Option<usize>>,
        reference: Vec<Option<usize>>,
    },
    /// A single `(t, z)` table.
    Table {
        t: String,
        z: Vec<Option<usize>>,
    },
}

/// Result of an exhaustive identity scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    pub witness: Option<Witness>,
    /// Number of identity instances evaluated.
    pub checked: u64,
}

impl ConsistencyReport {
    pub(crate) fn from_worst(worst: Worst, tolerance: f64) -> Self {
        ConsistencyReport {
            consistent: worst.defect <= tolerance,
            max_violation: worst.defect,
            tolerance,
            witness: worst.witness,
            checked: worst.checked,
        }
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "verdict: {}",
            if self.consistent { "consistent" } else { "inconsistent" }
        )?;
        writeln!(f, "max violation: {:e} (tolerance {:e})", self.max_violation, self.tolerance)?;
        writeln!(f, "identities checked: {}", self.checked)?;
        if let Some(w) = &self.witness {
            writeln!(f, "worst witness: {}", serde_json::to_string(w).unwrap_or_default())?;
        }
        Ok(())
    }
}

/// Running maximum of a defect scan with a deterministic tie-break.
#[derive(Clone, Debug, Default)]
pub(crate) struct Worst {
    pub defect: f64,
    /// Scan position of the witness; ties keep the earliest.
    pub key: u64,
    pub witness: Option<Witness>,
    pub checked: u64,
}

impl Worst {
    pub fn consider(&mut self, defect: f64, key: u64, make: impl FnOnce() -> Witness) {
        self.checked += 1;
        // NaN defects count as infinitely bad.
        let defect = if defect.is_nan() { f64::INFINITY } else { defect };
        if self.witness.is_none() || defect > self.defect || (defect == self.defect && key < self.key) {
            self.defect = defect;
            self.key = key;
            self.witness = Some(make());
        }
    }

    /// Associative, commutative merge, so parallel reductions are reproducible.
    pub fn merge(mut self, other: Worst) -> Worst {
        let checked = self.checked + other.checked;
        let take_other = match (&self.witness, &other.witness) {
            (None, _) => true,
            (_, None) => false,
            _ => other.defect > self.defect || (other.defect == self.defect && other.key < self.key),
        };
        if take_other {
            self = other;
        }
        self.checked = checked;
        self
    }
}
