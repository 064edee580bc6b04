//! Neighborhood systems and the Markov property of positive fields.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{delta_from_hamiltonian, system_from_delta, TransitionEnergyField};
use crate::error::{Error, Result};
use crate::field::RandomField;
use crate::onepoint::masked_states;
use crate::potential::{hamiltonian_onepoint, Potential};
use crate::reconstruct::{reconstruct_positive, Reconstruction};
use crate::report::{Witness, Worst};
use crate::space::{ConfigSpace, SiteSet};

/// A symmetric, irreflexive family of neighbor sets `∂t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborhoodSystem {
    neighbors: Vec<SiteSet>,
}

impl NeighborhoodSystem {
    pub fn new(neighbors: Vec<SiteSet>) -> Result<Self> {
        let n = neighbors.len();
        for (t, nb) in neighbors.iter().enumerate() {
            if nb.contains(t) {
                return Err(Error::domain(format!("site {t} is listed as its own neighbor")));
            }
            if !nb.is_subset(SiteSet::first(n)) {
                return Err(Error::domain(format!("neighbors of site {t} fall outside the {n} sites")));
            }
            if let Some(s) = nb.iter().find(|&s| !neighbors[s].contains(t)) {
                return Err(Error::domain(format!("neighborhood is not symmetric: {s} ∈ ∂{t} but {t} ∉ ∂{s}")));
            }
        }
        Ok(NeighborhoodSystem { neighbors })
    }

    /// The system with the given undirected edges.
    pub fn from_edges(n_sites: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![SiteSet::empty(); n_sites];
        for &(a, b) in edges {
            if a >= n_sites || b >= n_sites {
                return Err(Error::domain(format!("edge ({a}, {b}) falls outside the {n_sites} sites")));
            }
            neighbors[a] = neighbors[a].with(b);
            neighbors[b] = neighbors[b].with(a);
        }
        Self::new(neighbors)
    }

    /// No site has a neighbor.
    pub fn empty(n_sites: usize) -> Self {
        NeighborhoodSystem {
            neighbors: vec![SiteSet::empty(); n_sites],
        }
    }

    /// `∂t = Λ \ {t}` for every site.
    pub fn complete(n_sites: usize) -> Self {
        let all = SiteSet::first(n_sites);
        NeighborhoodSystem {
            neighbors: (0..n_sites).map(|t| all.without(t)).collect(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, site: usize) -> SiteSet {
        self.neighbors[site]
    }

    pub fn all_neighbors(&self) -> &[SiteSet] {
        &self.neighbors
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].contains(b)
    }

    /// Edges `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, nb)| nb.iter().filter(move |&b| b > a).map(move |b| (a, b)))
            .collect()
    }

    pub fn without_edge(&self, a: usize, b: usize) -> Self {
        let mut neighbors = self.neighbors.clone();
        neighbors[a] = neighbors[a].without(b);
        neighbors[b] = neighbors[b].without(a);
        NeighborhoodSystem { neighbors }
    }

    /// Whether `∂t ⊆ ∂′t` for every site.
    pub fn is_refined_by(&self, other: &NeighborhoodSystem) -> bool {
        self.n_sites() == other.n_sites()
            && self.neighbors.iter().zip(&other.neighbors).all(|(a, b)| a.is_subset(*b))
    }

    /// Whether every pair of distinct sites in `set` are neighbors.
    pub fn is_clique(&self, set: SiteSet) -> bool {
        set.iter().all(|t| set.without(t).is_subset(self.neighbors[t]))
    }

    fn check_space(&self, space: &ConfigSpace) -> Result<()> {
        if self.n_sites() != space.n_sites() {
            return Err(Error::domain(format!(
                "neighborhood system has {} sites, the space has {}",
                self.n_sites(),
                space.n_sites()
            )));
        }
        Ok(())
    }
}

/// Verdict of a Markov scan with its worst locality defect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub markov: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    pub witness: Option<Witness>,
    pub checked: u64,
}

impl MarkovReport {
    fn from_worst(worst: Worst, tolerance: f64) -> Self {
        MarkovReport {
            markov: worst.defect <= tolerance,
            max_violation: worst.defect,
            tolerance,
            witness: worst.witness,
            checked: worst.checked,
        }
    }
}

impl fmt::Display for MarkovReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {}", if self.markov { "markov" } else { "not markov" })?;
        writeln!(f, "max violation: {:e} (tolerance {:e})", self.max_violation, self.tolerance)?;
        writeln!(f, "comparisons: {}", self.checked)?;
        if let Some(w) = &self.witness {
            writeln!(f, "worst witness: {}", serde_json::to_string(w).unwrap_or_default())?;
        }
        Ok(())
    }
}

/// `ln Q_t(x | z)` at every full configuration, per site.
fn log_conditionals(p: &RandomField) -> Vec<Vec<f64>> {
    let space = p.space();
    let logp: Vec<f64> = p.probs().iter().map(|v| v.ln()).collect();
    (0..space.n_sites())
        .map(|t| {
            let card = space.card(t);
            let mut out = vec![0.0; space.total()];
            for z in 0..space.boundary_count(t) {
                let norm: f64 = (0..card).map(|x| p.prob(space.join(t, x, z))).sum::<f64>().ln();
                for x in 0..card {
                    let idx = space.join(t, x, z);
                    out[idx] = logp[idx] - norm;
                }
            }
            out
        })
        .collect()
}

/// `idx` with every site of `outside` reset to state 0.
fn reference(space: &ConfigSpace, idx: usize, outside: SiteSet) -> usize {
    outside.iter().fold(idx, |acc, s| space.with_state(acc, s, 0))
}

fn locality_witness(space: &ConfigSpace, t: usize, x: usize, u: Option<usize>, idx: usize, other: usize) -> Witness {
    let hide = SiteSet::single(t);
    Witness::Locality {
        t: space.site_name(t).to_string(),
        x,
        u,
        boundary: masked_states(space, idx, hide),
        reference: masked_states(space, other, hide),
    }
}

/// Whether each `Q_t^z` depends on `z` only through `z_{∂t}`, in log space.
///
/// Every boundary is compared with the one whose states outside `t ∪ ∂t`
/// are all zero.
pub fn is_markov(p: &RandomField, nbhd: &NeighborhoodSystem, tol: f64) -> Result<MarkovReport> {
    p.require_positive("the Markov check")?;
    let space = p.space();
    nbhd.check_space(space)?;
    let lq = log_conditionals(p);
    let total = space.total();
    let worst = (0..space.n_sites())
        .into_par_iter()
        .map(|t| {
            let outside = space.all().difference(nbhd.neighbors(t).with(t));
            let mut worst = Worst::default();
            for idx in 0..total {
                let r = reference(space, idx, outside);
                if r == idx {
                    continue;
                }
                let key = (t * total + idx) as u64;
                worst.consider((lq[t][idx] - lq[t][r]).abs(), key, || {
                    locality_witness(space, t, space.state_at(idx, t), None, idx, r)
                });
            }
            worst
        })
        .reduce(Worst::default, Worst::merge);
    Ok(MarkovReport::from_worst(worst, tol))
}

/// [`is_markov`] over all pairs of boundaries that agree on `∂t`.
///
/// Quadratic in the number of configurations; meant for small instances.
pub fn is_markov_exhaustive(p: &RandomField, nbhd: &NeighborhoodSystem, tol: f64) -> Result<MarkovReport> {
    p.require_positive("the Markov check")?;
    let space = p.space();
    nbhd.check_space(space)?;
    let lq = log_conditionals(p);
    let total = space.total();
    let mut worst = Worst::default();
    for (t, lq_t) in lq.iter().enumerate() {
        let keep = nbhd.neighbors(t).with(t);
        for a in 0..total {
            for b in (a + 1)..total {
                if space.project(a, keep) != space.project(b, keep) {
                    continue;
                }
                let key = ((t * total + a) * total + b) as u64;
                worst.consider((lq_t[a] - lq_t[b]).abs(), key, || {
                    locality_witness(space, t, space.state_at(a, t), None, a, b)
                });
            }
        }
    }
    Ok(MarkovReport::from_worst(worst, tol))
}

/// Whether every `Δ_t^z(x,u)` depends on `z` only through `z_{∂t}`.
pub fn is_delta_markov(delta: &TransitionEnergyField, nbhd: &NeighborhoodSystem, tol: f64) -> Result<MarkovReport> {
    delta.require_consistent()?;
    let space = delta.space();
    nbhd.check_space(space)?;
    let total = space.total();
    let worst = (0..space.n_sites())
        .into_par_iter()
        .map(|t| {
            let card = space.card(t);
            let outside = space.all().difference(nbhd.neighbors(t).with(t));
            let mut worst = Worst::default();
            // the state at t is irrelevant to Δ_t, so visit x = 0 only
            for idx in (0..total).filter(|&i| space.state_at(i, t) == 0) {
                let r = reference(space, idx, outside);
                if r == idx {
                    continue;
                }
                for x in 0..card {
                    for u in 0..card {
                        let key = (((t * total + idx) * card + x) * card + u) as u64;
                        let d = delta.delta_at(t, idx, x, u) - delta.delta_at(t, r, x, u);
                        worst.consider(d.abs(), key, || locality_witness(space, t, x, Some(u), idx, r));
                    }
                }
            }
            worst
        })
        .reduce(Worst::default, Worst::merge);
    Ok(MarkovReport::from_worst(worst, tol))
}

/// The smallest symmetric system whose neighborhoods contain every site
/// some conditional visibly depends on.
///
/// `s` enters `D_t` when changing `z_s` moves some `ln Q_t^z(x)` by more
/// than `tol`; the result is `∂t = D_t ∪ {s : t ∈ D_s}`.
pub fn minimal_neighborhoods(p: &RandomField, tol: f64) -> Result<NeighborhoodSystem> {
    p.require_positive("the dependence scan")?;
    let space = p.space();
    let lq = log_conditionals(p);
    let n = space.n_sites();
    let depends: Vec<SiteSet> = (0..n)
        .into_par_iter()
        .map(|t| {
            let mut d = SiteSet::empty();
            for s in (0..n).filter(|&s| s != t) {
                let varies = (0..space.total()).any(|idx| {
                    let r = space.with_state(idx, s, 0);
                    (lq[t][idx] - lq[t][r]).abs() > tol
                });
                if varies {
                    d = d.with(s);
                }
            }
            d
        })
        .collect();
    let neighbors = (0..n)
        .map(|t| {
            let back = SiteSet::from_indices((0..n).filter(|&s| depends[s].contains(t)));
            depends[t].union(back)
        })
        .collect();
    NeighborhoodSystem::new(neighbors)
}

/// The Gibbs field of a nearest-neighbor potential, built through its
/// transition energies `Δ_t^z(x,u) = Σ_{J⊆Λ\{t}} (Φ_{t∪J}(u z_J) − Φ_{t∪J}(x z_J))`.
///
/// Every term must sit on a clique of `nbhd`.
pub fn hc_field_from_pair_potential(phi: &Potential, nbhd: &NeighborhoodSystem) -> Result<RandomField> {
    let space = phi.space();
    nbhd.check_space(space)?;
    if let Some(set) = phi.terms().keys().find(|&&set| !nbhd.is_clique(set)) {
        return Err(Error::Support {
            sites: space.names(*set),
        });
    }
    let delta = delta_from_hamiltonian(&hamiltonian_onepoint(phi))?;
    let q = system_from_delta(&delta)?;
    reconstruct_positive(&q, &Reconstruction::default().unverified())
}
