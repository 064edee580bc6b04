//! Interaction potentials and the Gibbs fields and systems they generate.
//!
//! Sign convention: `P(x) ∝ exp{−H_Λ(x)}` with `H_Λ(x) = Σ_{∅≠V⊆Λ} Φ_V(x_V)`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::energy::{system_from_energies, OnePointHamiltonian};
use crate::error::{Error, Result};
use crate::field::RandomField;
use crate::onepoint::OnePointSystem;
use crate::space::{ConfigSpace, Configuration, SiteSet};

/// Extracted terms whose sup-norm falls below this are dropped.
pub const DROP_BELOW: f64 = 1e-12;

/// A family `{Φ_V}` of functions on `X^V`; absent sets are identically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    space: ConfigSpace,
    terms: BTreeMap<SiteSet, Vec<f64>>,
    vacuum: Option<Vec<usize>>,
}

impl Potential {
    /// The zero potential.
    pub fn new(space: ConfigSpace) -> Self {
        Potential {
            space,
            terms: BTreeMap::new(),
            vacuum: None,
        }
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    /// Terms keyed by site set; tables are in the canonical order of `X^V`.
    pub fn terms(&self) -> &BTreeMap<SiteSet, Vec<f64>> {
        &self.terms
    }

    pub fn term(&self, set: SiteSet) -> Option<&[f64]> {
        self.terms.get(&set).map(Vec::as_slice)
    }

    /// The vacuum `θ`, when every term vanishes as soon as some `x_t = θ_t`.
    pub fn vacuum(&self) -> Option<&[usize]> {
        self.vacuum.as_deref()
    }

    /// Adds `table` to `Φ_V`.
    pub fn add_term(&mut self, set: SiteSet, table: Vec<f64>) -> Result<()> {
        self.space.check_set(set)?;
        if set.is_empty() {
            return Err(Error::domain("potential terms need a nonempty site set"));
        }
        if table.len() != self.space.count(set) {
            return Err(Error::domain(format!(
                "term on {:?} has {} entries, expected {}",
                self.space.names(set),
                table.len(),
                self.space.count(set)
            )));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("potential values must be finite"));
        }
        match self.terms.get_mut(&set) {
            Some(existing) => existing.iter_mut().zip(&table).for_each(|(a, b)| *a += b),
            None => {
                self.terms.insert(set, table);
            }
        }
        if let Some(theta) = self.vacuum.take() {
            if self.is_vacuum_for(&theta) {
                self.vacuum = Some(theta);
            }
        }
        Ok(())
    }

    /// Builder form of [`Potential::add_term`].
    pub fn with_term(mut self, set: SiteSet, table: Vec<f64>) -> Result<Self> {
        self.add_term(set, table)?;
        Ok(self)
    }

    /// Whether every term is exactly zero wherever some `x_t = θ_t`.
    pub fn is_vacuum_for(&self, theta: &[usize]) -> bool {
        theta.len() == self.space.n_sites()
            && self.terms.iter().all(|(&set, table)| {
                let sub = self.space.subspace(set).expect("validated set");
                let sites: Vec<usize> = set.iter().collect();
                table.iter().enumerate().all(|(i, &v)| {
                    let touches = sites.iter().enumerate().any(|(k, &t)| sub.state_at(i, k) == theta[t]);
                    !touches || v == 0.0
                })
            })
    }

    /// Flags the potential as vacuum-normalized with respect to `θ`.
    pub fn mark_vacuum(&mut self, theta: Vec<usize>) -> Result<()> {
        if !self.is_vacuum_for(&theta) {
            return Err(Error::domain(format!("potential is not a vacuum potential for {theta:?}")));
        }
        self.vacuum = Some(theta);
        Ok(())
    }

    /// `Φ_V(x_V)` for the full configuration `idx`.
    pub fn term_at(&self, set: SiteSet, idx: usize) -> f64 {
        self.terms
            .get(&set)
            .map_or(0.0, |table| table[self.space.project(idx, set)])
    }

    /// `H_V(x_V) = Σ_{∅≠W⊆V} Φ_W(x_W)` for the full configuration `idx`.
    pub fn energy_on(&self, set: SiteSet, idx: usize) -> f64 {
        self.terms
            .iter()
            .filter(|(w, _)| w.is_subset(set))
            .map(|(&w, table)| table[self.space.project(idx, w)])
            .sum()
    }

    /// `H_Λ` at every configuration, in canonical order.
    pub fn global_energies(&self) -> Vec<f64> {
        let all = self.space.all();
        (0..self.space.total())
            .into_par_iter()
            .map(|idx| self.energy_on(all, idx))
            .collect()
    }
}

/// `H_Λ(x) = Σ_{∅≠V⊆Λ} Φ_V(x_V)`.
pub fn hamiltonian_global(phi: &Potential, x: &Configuration) -> Result<f64> {
    let idx = phi.space.index_of(x)?;
    Ok(phi.energy_on(phi.space.all(), idx))
}

/// `H_t^z(x) = Σ_{J⊆Λ\{t}} Φ_{t∪J}(x z_J)`.
pub fn hamiltonian_onepoint(phi: &Potential) -> OnePointHamiltonian {
    let space = phi.space.clone();
    let by_site: Vec<Vec<(SiteSet, &Vec<f64>)>> = (0..space.n_sites())
        .map(|t| {
            phi.terms
                .iter()
                .filter(|(set, _)| set.contains(t))
                .map(|(&set, table)| (set, table))
                .collect()
        })
        .collect();
    OnePointHamiltonian::from_fn(space.clone(), |t, z, x| {
        let idx = space.join(t, x, z);
        by_site[t]
            .iter()
            .map(|(set, table)| table[space.project(idx, *set)])
            .sum()
    })
    .expect("finite potential gives a finite Hamiltonian")
}

/// The Gibbs system `q_t^z ∝ exp{−H_t^z}` of a potential.
pub fn gibbs_system(phi: &Potential) -> OnePointSystem {
    system_from_energies(&hamiltonian_onepoint(phi)).expect("Gibbs tables are valid")
}

/// The Gibbs field `P(x) = exp{−H_Λ(x)} / Σ_α exp{−H_Λ(α)}`.
pub fn field_from_global(phi: &Potential) -> Result<RandomField> {
    let logw: Vec<f64> = phi.global_energies().into_iter().map(|h| -h).collect();
    RandomField::from_log_weights(phi.space.clone(), &logw)
}

/// Vacuum potential of a positive field by Möbius inversion:
/// `Φ_V(x_V) = −Σ_{J⊆V} (−1)^{|V\J|} ln P(x_J θ_{Λ\J})`.
///
/// Entries with some `x_t = θ_t` are set to exact zero, terms below
/// [`DROP_BELOW`] are omitted, and `H_Λ(x) = ln P(θ) − ln P(x)`.
pub fn extract_potential_mobius(p: &RandomField, theta: &[usize]) -> Result<Potential> {
    p.require_positive("Möbius extraction")?;
    let space = p.space().clone();
    if theta.len() != space.n_sites() || theta.iter().zip(space.cards()).any(|(a, c)| a >= c) {
        return Err(Error::domain(format!("{theta:?} is not a configuration of the space")));
    }
    let logp: Vec<f64> = p.probs().iter().map(|v| v.ln()).collect();
    let base = space.index(theta);
    // sites with a single state always sit at the vacuum
    let active = SiteSet::from_indices((0..space.n_sites()).filter(|&t| space.card(t) > 1));
    let sets: Vec<SiteSet> = active.subsets().filter(|s| !s.is_empty()).collect();
    let terms: Vec<(SiteSet, Vec<f64>)> = sets
        .into_par_iter()
        .filter_map(|set| {
            let sites: Vec<usize> = set.iter().collect();
            let sub = space.subspace(set).expect("subset of the space");
            let subsets: Vec<SiteSet> = set.subsets().collect();
            let table: Vec<f64> = (0..sub.total())
                .map(|i| {
                    let states: Vec<usize> = (0..sites.len()).map(|k| sub.state_at(i, k)).collect();
                    if sites.iter().zip(&states).any(|(&t, &x)| x == theta[t]) {
                        return 0.0;
                    }
                    let sum: f64 = subsets
                        .iter()
                        .map(|j| {
                            let idx = sites
                                .iter()
                                .zip(&states)
                                .filter(|(t, _)| j.contains(**t))
                                .fold(base, |acc, (&t, &x)| space.with_state(acc, t, x));
                            let sign = if (set.len() - j.len()) % 2 == 0 { 1.0 } else { -1.0 };
                            sign * logp[idx]
                        })
                        .sum();
                    -sum
                })
                .collect();
            let sup = table.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (sup >= DROP_BELOW).then_some((set, table))
        })
        .collect();
    Ok(Potential {
        space,
        terms: terms.into_iter().collect(),
        vacuum: Some(theta.to_vec()),
    })
}
