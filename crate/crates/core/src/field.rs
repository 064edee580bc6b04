//! Dense joint distributions, marginals, conditionals and positivity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::onepoint::OnePointSystem;
use crate::space::{ConfigSpace, Configuration, SiteSet};

/// Largest deviation of a table sum from 1 that is silently renormalized.
pub const RENORMALIZE_LIMIT: f64 = 1e-6;

/// Positivity class of a field or of a one-point system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Positivity {
    Positive,
    WeaklyPositive,
    Neither,
}

/// Positivity class together with the per-site positivity points `Θ_t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub class: Positivity,
    pub positivity_points: Vec<Vec<usize>>,
}

impl PositivityReport {
    pub(crate) fn from_points(all_positive: bool, points: Vec<Vec<usize>>) -> Self {
        let class = if all_positive {
            Positivity::Positive
        } else if points.iter().all(|p| !p.is_empty()) {
            Positivity::WeaklyPositive
        } else {
            Positivity::Neither
        };
        PositivityReport {
            class,
            positivity_points: points,
        }
    }
}

/// A probability distribution `P_Λ` on `X^Λ`, stored densely in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomField {
    space: ConfigSpace,
    probs: Vec<f64>,
}

impl RandomField {
    /// Validates and, if the sum is within [`RENORMALIZE_LIMIT`] of 1, renormalizes.
    pub fn new(space: ConfigSpace, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.total() {
            return Err(Error::domain(format!(
                "table has {} entries, space has {} configurations",
                probs.len(),
                space.total()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::domain(format!("invalid probability {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_LIMIT {
            return Err(Error::Normalization { sum });
        }
        Ok(Self::normalized(space, probs))
    }

    /// Builds a field from non-negative weights of any positive total.
    pub fn from_weights(space: ConfigSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.total() {
            return Err(Error::domain("weight table does not match the space"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain("weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Normalization { sum });
        }
        Ok(Self::normalized(space, weights))
    }

    /// Builds a field from unnormalized log-weights; `-inf` encodes zero.
    pub fn from_log_weights(space: ConfigSpace, logw: &[f64]) -> Result<Self> {
        let max = logw
            .iter()
            .copied()
            .filter(|w| w.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() || logw.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::domain("log-weights have no finite maximum"));
        }
        let weights = logw.iter().map(|w| (w - max).exp()).collect();
        Self::from_weights(space, weights)
    }

    fn normalized(space: ConfigSpace, mut probs: Vec<f64>) -> Self {
        // Sums within rounding noise of 1 are left alone so that parsing a
        // serialized field reproduces it bit for bit.
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > probs.len() as f64 * f64::EPSILON {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        RandomField { space, probs }
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, idx: usize) -> f64 {
        self.probs[idx]
    }

    /// Probability of a full configuration.
    pub fn prob_of(&self, x: &Configuration) -> Result<f64> {
        Ok(self.probs[self.space.index_of(x)?])
    }

    pub fn is_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub(crate) fn require_positive(&self, what: &str) -> Result<()> {
        if self.is_positive() {
            Ok(())
        } else {
            Err(Error::NotPositive(format!("{what} needs a strictly positive field")))
        }
    }

    /// The marginal `P_V` as a field on the subspace `V`.
    ///
    /// For `V = ∅` this is the one-point table `[1]`.
    pub fn marginal(&self, set: SiteSet) -> Result<RandomField> {
        let sub = self.space.subspace(set)?;
        let mut table = vec![0.0; sub.total()];
        for (idx, p) in self.probs.iter().enumerate() {
            table[self.space.project(idx, set)] += p;
        }
        Ok(RandomField::normalized(sub, table))
    }

    /// The conditional distribution `Q_V^z` on `X^V` given `z` on a disjoint set.
    pub fn conditional(&self, set: SiteSet, z: &Configuration) -> Result<RandomField> {
        self.space.check_set(set)?;
        self.space.check_config(z)?;
        if !set.is_disjoint(z.domain()) {
            return Err(Error::domain("conditioned sites overlap the boundary condition"));
        }
        let sub = self.space.subspace(set)?;
        let mut table = vec![0.0; sub.total()];
        let cond = z.domain();
        let target = self.space.sub_index(z);
        for (idx, p) in self.probs.iter().enumerate() {
            if self.space.project(idx, cond) == target {
                table[self.space.project(idx, set)] += p;
            }
        }
        let mass: f64 = table.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ConditioningOnNull);
        }
        table.iter_mut().for_each(|p| *p /= mass);
        Ok(RandomField { space: sub, probs: table })
    }

    /// The one-point conditional system `q_t^z(x) = P(xz) / Σ_u P(uz)`.
    pub fn one_point_system(&self) -> Result<OnePointSystem> {
        let space = &self.space;
        let mut tables = Vec::with_capacity(space.n_sites());
        for t in 0..space.n_sites() {
            let card = space.card(t);
            let mut table = vec![0.0; space.total()];
            for z in 0..space.boundary_count(t) {
                let row = &mut table[z * card..(z + 1) * card];
                for (x, slot) in row.iter_mut().enumerate() {
                    *slot = self.probs[space.join(t, x, z)];
                }
                let mass: f64 = row.iter().sum();
                if mass <= 0.0 {
                    return Err(Error::UndefinedConditional {
                        site: space.site_name(t).to_string(),
                        boundary: space.boundary(t, z).values().to_vec(),
                    });
                }
                row.iter_mut().for_each(|q| *q /= mass);
            }
            tables.push(table);
        }
        OnePointSystem::new(space.clone(), tables)
    }

    /// Positivity class and the sets `Θ_t = {θ : P(θ z) > 0 for all z}`.
    pub fn classify_positivity(&self) -> PositivityReport {
        let space = &self.space;
        let points = (0..space.n_sites())
            .map(|t| {
                (0..space.card(t))
                    .filter(|&a| {
                        (0..space.boundary_count(t)).all(|z| self.probs[space.join(t, a, z)] > 0.0)
                    })
                    .collect()
            })
            .collect();
        PositivityReport::from_points(self.is_positive(), points)
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &RandomField) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::domain("fields live on different spaces"));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `true` iff every entry differs by at most `tol`.
    pub fn field_equal(&self, other: &RandomField, tol: f64) -> Result<bool> {
        Ok(self.max_abs_diff(other)? <= tol)
    }
}
