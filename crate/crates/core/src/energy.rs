//! Transition energy fields and one-point Hamiltonians.
//!
//! Internal convention: `Δ_t^z(x,u) = ln q_t^z(x) − ln q_t^z(u)` and
//! `q_t^z ∝ exp{−H_t^z}`, so that `Δ_t^z(x,u) = H_t^z(u) − H_t^z(x)`.
//! The Hamiltonian read off a field by [`hamiltonian_from_field`] is
//! `ln P(xz)/P(θ_t z)`, which pairs with `q ∝ exp{+H}` instead; see
//! [`Convention`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::RandomField;
use crate::onepoint::{masked_states, pair_units, pair_witness, OnePointSystem, DEFAULT_TOL};
use crate::report::{ConsistencyReport, Witness, Worst};
use crate::space::{ConfigSpace, SiteSet};

/// How a one-point Hamiltonian relates to the conditional distributions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Convention {
    /// `q ∝ exp{−H}`, `Δ(x,u) = H(u) − H(x)`.
    #[default]
    Energy,
    /// `q ∝ exp{+H}`, as for `H = ln P(xz)/P(θ_t z)`.
    LogProbability,
}

/// The family `Δ_t^z(x,u)` stored as a full `(x,u)` matrix per `(t, z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionEnergyField {
    space: ConfigSpace,
    /// Per site, flat `[z][x][u]`.
    deltas: Vec<Vec<f64>>,
}

impl TransitionEnergyField {
    pub fn new(space: ConfigSpace, deltas: Vec<Vec<f64>>) -> Result<Self> {
        if deltas.len() != space.n_sites() {
            return Err(Error::domain("one delta table per site is required"));
        }
        for (t, d) in deltas.iter().enumerate() {
            if d.len() != space.total() * space.card(t) {
                return Err(Error::domain(format!(
                    "delta table of site `{}` has {} entries, expected {}",
                    space.site_name(t),
                    d.len(),
                    space.total() * space.card(t)
                )));
            }
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("transition energies must be finite"));
            }
        }
        Ok(TransitionEnergyField { space, deltas })
    }

    /// Builds a field from a function of `(t, z, x, u)`.
    pub fn from_fn(space: ConfigSpace, f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let deltas = (0..space.n_sites())
            .map(|t| {
                let card = space.card(t);
                let mut d = Vec::with_capacity(space.total() * card);
                for z in 0..space.boundary_count(t) {
                    for x in 0..card {
                        for u in 0..card {
                            d.push(f(t, z, x, u));
                        }
                    }
                }
                d
            })
            .collect();
        TransitionEnergyField::new(space, deltas)
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.deltas
    }

    /// `Δ_t^z(x,u)`.
    pub fn delta(&self, site: usize, z: usize, x: usize, u: usize) -> f64 {
        let c = self.space.card(site);
        self.deltas[site][(z * c + x) * c + u]
    }

    /// `Δ_t` at the boundary of the full configuration `idx`.
    pub fn delta_at(&self, site: usize, idx: usize, x: usize, u: usize) -> f64 {
        self.delta(site, self.space.split(site, idx).1, x, u)
    }

    /// Exhaustive defect scan of `Δ(x,x) = 0`, the cocycle identity and the
    /// two-site commutation identity.
    pub fn check(&self, tol: f64) -> ConsistencyReport {
        let space = &self.space;
        let n_sites = space.n_sites();
        let cocycle = (0..n_sites)
            .flat_map(|t| (0..space.boundary_count(t)).map(move |z| (t, z)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .enumerate()
            .map(|(unit, (t, z))| {
                let card = space.card(t);
                let mut worst = Worst::default();
                let witness = |x, u, alpha| Witness::Cocycle {
                    t: space.site_name(t).to_string(),
                    x,
                    u,
                    alpha,
                    z: masked_states(space, space.join(t, 0, z), SiteSet::single(t)),
                };
                for x in 0..card {
                    worst.consider(self.delta(t, z, x, x).abs(), unit as u64, || witness(x, x, x));
                    for u in 0..card {
                        for a in 0..card {
                            let d = self.delta(t, z, x, u) - self.delta(t, z, x, a) - self.delta(t, z, a, u);
                            worst.consider(d.abs(), unit as u64, || witness(x, u, a));
                        }
                    }
                }
                worst
            })
            .reduce(Worst::default, Worst::merge);
        let offset = cocycle_units(space);
        let commutation = pair_units(space)
            .into_par_iter()
            .map(|(unit, t, s, w)| {
                let (st, ss) = (space.stride(t), space.stride(s));
                let c = |a: usize, b: usize| w + a * st + b * ss;
                let mut worst = Worst::default();
                for x in 0..space.card(t) {
                    for u in 0..space.card(t) {
                        for y in 0..space.card(s) {
                            for v in 0..space.card(s) {
                                // Δ_t^{zy}(x,u) + Δ_s^{zu}(y,v) = Δ_s^{zx}(y,v) + Δ_t^{zv}(x,u)
                                let lhs = self.delta_at(t, c(0, y), x, u) + self.delta_at(s, c(u, 0), y, v);
                                let rhs = self.delta_at(s, c(x, 0), y, v) + self.delta_at(t, c(0, v), x, u);
                                worst.consider((lhs - rhs).abs(), offset + unit, || {
                                    pair_witness(space, t, s, w, [x, u, y, v])
                                });
                            }
                        }
                    }
                }
                worst
            })
            .reduce(Worst::default, Worst::merge);
        ConsistencyReport::from_worst(cocycle.merge(commutation), tol)
    }

    pub(crate) fn require_consistent(&self) -> Result<()> {
        let report = self.check(DEFAULT_TOL);
        if report.consistent {
            Ok(())
        } else {
            Err(Error::Inconsistent(Box::new(report)))
        }
    }
}

fn cocycle_units(space: &ConfigSpace) -> u64 {
    (0..space.n_sites()).map(|t| space.boundary_count(t) as u64).sum()
}

/// A one-point Hamiltonian `H_t^z(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OnePointHamiltonian {
    space: ConfigSpace,
    /// Per site, flat `[z][x]`.
    values: Vec<Vec<f64>>,
}

impl OnePointHamiltonian {
    pub fn new(space: ConfigSpace, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != space.n_sites() || values.iter().any(|v| v.len() != space.total()) {
            return Err(Error::domain("Hamiltonian tables do not match the space"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("Hamiltonian values must be finite"));
        }
        Ok(OnePointHamiltonian { space, values })
    }

    pub fn from_fn(space: ConfigSpace, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let values = (0..space.n_sites())
            .map(|t| {
                (0..space.boundary_count(t))
                    .flat_map(|z| (0..space.card(t)).map(move |x| (z, x)))
                    .map(|(z, x)| f(t, z, x))
                    .collect()
            })
            .collect();
        OnePointHamiltonian::new(space, values)
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// `H_t^z(x)`.
    pub fn value(&self, site: usize, z: usize, x: usize) -> f64 {
        self.values[site][z * self.space.card(site) + x]
    }

    /// `H_t` at the full configuration `idx`.
    pub fn value_at(&self, site: usize, idx: usize) -> f64 {
        let (x, z) = self.space.split(site, idx);
        self.value(site, z, x)
    }

    /// `−H`.
    pub fn negated(&self) -> Self {
        OnePointHamiltonian {
            space: self.space.clone(),
            values: self.values.iter().map(|v| v.iter().map(|h| -h).collect()).collect(),
        }
    }

    /// Rewrites a Hamiltonian given in `convention` into the [`Convention::Energy`] form.
    pub fn to_energy(&self, convention: Convention) -> Self {
        match convention {
            Convention::Energy => self.clone(),
            Convention::LogProbability => self.negated(),
        }
    }

    /// `H + c(t, z)`: a gauge shift by a function of the boundary condition only.
    pub fn shifted(&self, c: impl Fn(usize, usize) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(t, v)| {
                let card = self.space.card(t);
                v.iter().enumerate().map(|(i, h)| h + c(t, i / card)).collect()
            })
            .collect();
        OnePointHamiltonian {
            space: self.space.clone(),
            values,
        }
    }

    /// Defect scan of the additive four-term identity
    /// `H_t^{zy}(x) + H_s^{zx}(v) + H_t^{zv}(u) + H_s^{zu}(y) = H_t^{zy}(u) + H_s^{zu}(v) + H_t^{zv}(x) + H_s^{zx}(y)`.
    pub fn check(&self, tol: f64) -> ConsistencyReport {
        let space = &self.space;
        let by_config: Vec<Vec<f64>> = (0..space.n_sites())
            .map(|t| (0..space.total()).map(|w| self.value_at(t, w)).collect())
            .collect();
        let worst = pair_units(space)
            .into_par_iter()
            .map(|(unit, t, s, w)| {
                let (ht, hs) = (&by_config[t], &by_config[s]);
                let (st, ss) = (space.stride(t), space.stride(s));
                let c = |a: usize, b: usize| w + a * st + b * ss;
                let mut worst = Worst::default();
                for x in 0..space.card(t) {
                    for u in 0..space.card(t) {
                        for y in 0..space.card(s) {
                            for v in 0..space.card(s) {
                                let lhs = ht[c(x, y)] + hs[c(x, v)] + ht[c(u, v)] + hs[c(u, y)];
                                let rhs = ht[c(u, y)] + hs[c(u, v)] + ht[c(x, v)] + hs[c(x, y)];
                                worst.consider((lhs - rhs).abs(), unit, || {
                                    pair_witness(space, t, s, w, [x, u, y, v])
                                });
                            }
                        }
                    }
                }
                worst
            })
            .reduce(Worst::default, Worst::merge);
        ConsistencyReport::from_worst(worst, tol)
    }

    pub(crate) fn require_consistent(&self) -> Result<()> {
        let report = self.check(DEFAULT_TOL);
        if report.consistent {
            Ok(())
        } else {
            Err(Error::Inconsistent(Box::new(report)))
        }
    }
}

/// Exhaustive check of a transition energy field.
pub fn check_delta(delta: &TransitionEnergyField, tol: f64) -> ConsistencyReport {
    delta.check(tol)
}

/// Exhaustive check of a one-point Hamiltonian.
pub fn check_hamiltonian(h: &OnePointHamiltonian, tol: f64) -> ConsistencyReport {
    h.check(tol)
}

/// `Δ_t^z(x,u) = ln(q_t^z(x) / q_t^z(u))`.
pub fn delta_from_system(q: &OnePointSystem) -> Result<TransitionEnergyField> {
    q.require_positive("transition energies")?;
    let space = q.space().clone();
    TransitionEnergyField::from_fn(space, |t, z, x, u| (q.q(t, z, x) / q.q(t, z, u)).ln())
}

/// Gibbs form `q_t^z(x) = exp{Δ_t^z(x,u)} / Σ_α exp{Δ_t^z(α,u)}` with reference `u = 0`.
pub fn system_from_delta(delta: &TransitionEnergyField) -> Result<OnePointSystem> {
    delta.require_consistent()?;
    system_from_delta_with_reference(delta, |_, _| 0)
}

/// [`system_from_delta`] with an explicit reference state per `(t, z)`, unchecked.
pub fn system_from_delta_with_reference(
    delta: &TransitionEnergyField,
    reference: impl Fn(usize, usize) -> usize,
) -> Result<OnePointSystem> {
    let space = delta.space();
    let tables = (0..space.n_sites())
        .map(|t| {
            let card = space.card(t);
            let mut table = Vec::with_capacity(space.total());
            for z in 0..space.boundary_count(t) {
                let u = reference(t, z);
                let energies: Vec<f64> = (0..card).map(|x| delta.delta(t, z, x, u)).collect();
                table.extend(softmax(&energies));
            }
            table
        })
        .collect();
    OnePointSystem::new(space.clone(), tables)
}

/// `Δ_t^z(x,u) = ln(P(xz) / P(uz))`, read directly from the field.
pub fn delta_from_field(p: &RandomField) -> Result<TransitionEnergyField> {
    p.require_positive("transition energies")?;
    let space = p.space().clone();
    let logp: Vec<f64> = p.probs().iter().map(|v| v.ln()).collect();
    let s = space.clone();
    TransitionEnergyField::from_fn(space, move |t, z, x, u| logp[s.join(t, x, z)] - logp[s.join(t, u, z)])
}

/// `H_t^z(x) = ln(P(xz) / P(θ_t z))` for a fixed configuration `θ`.
///
/// This Hamiltonian follows [`Convention::LogProbability`]; convert with
/// [`OnePointHamiltonian::to_energy`] before [`system_from_hamiltonian`].
pub fn hamiltonian_from_field(p: &RandomField, theta: &[usize]) -> Result<OnePointHamiltonian> {
    p.require_positive("the field Hamiltonian")?;
    let space = p.space().clone();
    if theta.len() != space.n_sites() || theta.iter().zip(space.cards()).any(|(a, c)| a >= c) {
        return Err(Error::domain(format!("{theta:?} is not a configuration of the space")));
    }
    let logp: Vec<f64> = p.probs().iter().map(|v| v.ln()).collect();
    let s = space.clone();
    OnePointHamiltonian::from_fn(space, move |t, z, x| {
        logp[s.join(t, x, z)] - logp[s.join(t, theta[t], z)]
    })
}

/// `Δ_t^z(x,u) = H_t^z(u) − H_t^z(x)`.
pub fn delta_from_hamiltonian(h: &OnePointHamiltonian) -> Result<TransitionEnergyField> {
    h.require_consistent()?;
    TransitionEnergyField::from_fn(h.space().clone(), |t, z, x, u| h.value(t, z, u) - h.value(t, z, x))
}

/// Reference state `r_t^z` fixing the additive gauge of a Hamiltonian.
#[derive(Clone, Debug, Default)]
pub enum Gauge {
    /// `r_t^z = 0` everywhere.
    #[default]
    Zero,
    /// Per site, one reference state per boundary index.
    Reference(Vec<Vec<usize>>),
}

impl Gauge {
    fn state(&self, site: usize, z: usize) -> usize {
        match self {
            Gauge::Zero => 0,
            Gauge::Reference(r) => r[site][z],
        }
    }
}

/// `H_t^z(x) = Δ_t^z(r_t^z, x)`, so that `H_t^z(r_t^z) = 0` and
/// `H_t^z(u) − H_t^z(x) = Δ_t^z(x,u)`.
pub fn hamiltonian_from_delta(delta: &TransitionEnergyField, gauge: &Gauge) -> Result<OnePointHamiltonian> {
    delta.require_consistent()?;
    let space = delta.space();
    if let Gauge::Reference(r) = gauge {
        let ok = r.len() == space.n_sites()
            && r.iter().enumerate().all(|(t, row)| {
                row.len() == space.boundary_count(t) && row.iter().all(|&a| a < space.card(t))
            });
        if !ok {
            return Err(Error::domain("gauge does not match the space"));
        }
    }
    OnePointHamiltonian::from_fn(space.clone(), |t, z, x| delta.delta(t, z, gauge.state(t, z), x))
}

/// `q_t^z(x) = exp{−H_t^z(x)} / Σ_α exp{−H_t^z(α)}`.
pub fn system_from_hamiltonian(h: &OnePointHamiltonian) -> Result<OnePointSystem> {
    h.require_consistent()?;
    system_from_energies(h)
}

/// [`system_from_hamiltonian`] for a Hamiltonian given in `convention`.
pub fn system_from_hamiltonian_with(h: &OnePointHamiltonian, convention: Convention) -> Result<OnePointSystem> {
    system_from_hamiltonian(&h.to_energy(convention))
}

pub(crate) fn system_from_energies(h: &OnePointHamiltonian) -> Result<OnePointSystem> {
    let space = h.space();
    let tables = (0..space.n_sites())
        .map(|t| {
            let card = space.card(t);
            h.values[t]
                .chunks_exact(card)
                .flat_map(|row| softmax(&row.iter().map(|e| -e).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    OnePointSystem::new(space.clone(), tables)
}

/// Normalized `exp` of `v`, shifted by its maximum.
fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|x| x / sum).collect()
}
