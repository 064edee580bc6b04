//! One-point conditional distribution systems and their consistency checks.
//!
//! A system holds, for every site `t` and boundary condition `z` on
//! `Λ \ {t}`, a distribution `q_t^z` on `X^t`. Tables are stored per site as
//! a flat `[z][x]` array, `z` in the canonical order of `X^{Λ\{t}}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Positivity, PositivityReport, RENORMALIZE_LIMIT};
use crate::report::{ConsistencyReport, Witness, Worst};
use crate::space::{ConfigSpace, SiteSet};

/// Default tolerance of the consistency and Markov checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Per-site positivity points `Θ_t = {a : q_t^z(a) > 0 for all z}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositivityPointSet {
    pub points: Vec<Vec<usize>>,
}

impl PositivityPointSet {
    pub fn is_weakly_positive(&self) -> bool {
        self.points.iter().all(|p| !p.is_empty())
    }

    pub fn contains(&self, site: usize, state: usize) -> bool {
        self.points[site].contains(&state)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnePointSystem {
    space: ConfigSpace,
    tables: Vec<Vec<f64>>,
    positivity: PositivityReport,
}

impl OnePointSystem {
    /// Validates the tables; rows whose sum drifts from 1 by at most
    /// [`RENORMALIZE_LIMIT`] are renormalized, larger drifts are rejected.
    pub fn new(space: ConfigSpace, mut tables: Vec<Vec<f64>>) -> Result<Self> {
        if tables.len() != space.n_sites() {
            return Err(Error::domain(format!(
                "{} site tables for {} sites",
                tables.len(),
                space.n_sites()
            )));
        }
        for (t, table) in tables.iter_mut().enumerate() {
            let card = space.card(t);
            if table.len() != space.total() {
                return Err(Error::domain(format!(
                    "table of site `{}` has {} entries, expected {}",
                    space.site_name(t),
                    table.len(),
                    space.total()
                )));
            }
            for (z, row) in table.chunks_exact_mut(card).enumerate() {
                if row.iter().any(|q| !q.is_finite() || *q < 0.0) {
                    return Err(Error::domain(format!(
                        "invalid probability at site `{}`, boundary {z}",
                        space.site_name(t)
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > RENORMALIZE_LIMIT {
                    return Err(Error::Normalization { sum });
                }
                if (sum - 1.0).abs() > card as f64 * f64::EPSILON {
                    row.iter_mut().for_each(|q| *q /= sum);
                }
            }
        }
        let positivity = classify(&space, &tables);
        Ok(OnePointSystem {
            space,
            tables,
            positivity,
        })
    }

    /// The system with every `q_t^z` uniform.
    pub fn uniform(space: ConfigSpace) -> Self {
        let tables = (0..space.n_sites())
            .map(|t| vec![1.0 / space.card(t) as f64; space.total()])
            .collect();
        OnePointSystem::new(space, tables).expect("uniform tables are valid")
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    pub fn into_tables(self) -> Vec<Vec<f64>> {
        self.tables
    }

    /// The flat `[z][x]` table of `site`.
    pub fn table(&self, site: usize) -> &[f64] {
        &self.tables[site]
    }

    /// The distribution `q_t^z`.
    pub fn row(&self, site: usize, z: usize) -> &[f64] {
        let card = self.space.card(site);
        &self.tables[site][z * card..(z + 1) * card]
    }

    /// `q_t^z(x)`.
    pub fn q(&self, site: usize, z: usize, x: usize) -> f64 {
        self.tables[site][z * self.space.card(site) + x]
    }

    /// `q_t^{w_{Λ\{t}}}(w_t)` for a full configuration index `w`.
    pub fn q_at(&self, site: usize, idx: usize) -> f64 {
        let (x, z) = self.space.split(site, idx);
        self.q(site, z, x)
    }

    /// For each site, `q_t` evaluated at every full configuration, in canonical order.
    pub(crate) fn by_config(&self, f: impl Fn(f64) -> f64 + Sync) -> Vec<Vec<f64>> {
        (0..self.space.n_sites())
            .map(|t| (0..self.space.total()).map(|w| f(self.q_at(t, w))).collect())
            .collect()
    }

    pub fn positivity(&self) -> Positivity {
        self.positivity.class
    }

    pub fn is_positive(&self) -> bool {
        self.positivity.class == Positivity::Positive
    }

    pub(crate) fn require_positive(&self, what: &str) -> Result<()> {
        if self.is_positive() {
            Ok(())
        } else {
            Err(Error::NotPositive(format!(
                "{what} needs a strictly positive system; use the weakly positive variant"
            )))
        }
    }

    /// Exact per-site positivity points.
    pub fn find_positivity_points(&self) -> PositivityPointSet {
        PositivityPointSet {
            points: self.positivity.positivity_points.clone(),
        }
    }

    /// A state that is a positivity point at every site (smallest if several).
    pub fn is_vacuum_system(&self) -> Result<Option<usize>> {
        let cards = self.space.cards();
        if cards.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::domain("vacuum states need equal state spaces at every site"));
        }
        let card = cards.first().copied().unwrap_or(0);
        Ok((0..card).find(|a| self.positivity.positivity_points.iter().all(|p| p.contains(a))))
    }

    pub(crate) fn check_theta(&self, theta: &[usize]) -> Result<()> {
        if theta.len() != self.space.n_sites() {
            return Err(Error::domain("one positivity point per site is required"));
        }
        for (t, &a) in theta.iter().enumerate() {
            if !self.positivity.positivity_points[t].contains(&a) {
                return Err(Error::InvalidPositivityPoint {
                    site: self.space.site_name(t).to_string(),
                    state: a,
                });
            }
        }
        Ok(())
    }

    /// Checks, in log space, the eight-factor identity
    /// `q_t^{zy}(x) q_s^{zx}(v) q_t^{zv}(u) q_s^{zu}(y) = q_t^{zy}(u) q_s^{zu}(v) q_t^{zv}(x) q_s^{zx}(y)`
    /// for all site pairs, states and boundaries.
    pub fn check_consistency_positive(&self, tol: f64) -> Result<ConsistencyReport> {
        self.require_positive("the consistency check")?;
        let logq = self.by_config(f64::ln);
        let space = &self.space;
        let worst = pair_units(space)
            .into_par_iter()
            .map(|(unit, t, s, w)| {
                let (lt, ls) = (&logq[t], &logq[s]);
                let (st, ss) = (space.stride(t), space.stride(s));
                let c = |a: usize, b: usize| w + a * st + b * ss;
                let defect = |x: usize, u: usize, y: usize, v: usize| {
                    let lhs = lt[c(x, y)] + ls[c(x, v)] + lt[c(u, v)] + ls[c(u, y)];
                    let rhs = lt[c(u, y)] + ls[c(u, v)] + lt[c(x, v)] + ls[c(x, y)];
                    (lhs - rhs).abs()
                };
                let (ct, cs) = (space.card(t), space.card(s));
                if unit == 0 {
                    // Slices x = u or y = v share every factor.
                    for x in 0..ct {
                        for y in 0..cs {
                            assert!(defect(x, x, y, (y + 1) % cs) <= 1e-12);
                            assert!(defect(x, (x + 1) % ct, y, y) <= 1e-12);
                        }
                    }
                }
                let mut worst = Worst::default();
                for x in 0..ct {
                    for u in (0..ct).filter(|&u| u != x) {
                        for y in 0..cs {
                            for v in (0..cs).filter(|&v| v != y) {
                                let d = defect(x, u, y, v);
                                debug_assert!({
                                    // same identity read with the roles of t and s exchanged
                                    let lhs = ls[c(x, y)] + lt[c(u, y)] + ls[c(u, v)] + lt[c(x, v)];
                                    let rhs = ls[c(x, v)] + lt[c(u, v)] + ls[c(u, y)] + lt[c(x, y)];
                                    ((lhs - rhs).abs() - d).abs() <= 1e-12 * (1.0 + d)
                                });
                                worst.consider(d, unit, || {
                                    pair_witness(space, t, s, w, [x, u, y, v])
                                });
                            }
                        }
                    }
                }
                worst
            })
            .reduce(Worst::default, Worst::merge);
        Ok(ConsistencyReport::from_worst(worst, tol))
    }

    /// Checks the weakly positive consistency identity with positivity points `theta`:
    /// `q_t^{zy}(x) q_s^{zx}(θ_s) q_t^{zθ_s}(θ_t) q_s^{zθ_t}(y) = q_s^{zx}(y) q_t^{zy}(θ_t) q_s^{zθ_t}(θ_s) q_t^{zθ_s}(x)`.
    ///
    /// Products are compared in linear space with relative defect
    /// `|lhs − rhs| / max(lhs, rhs, 1e-300)`.
    pub fn check_consistency_weak(&self, theta: &[usize], tol: f64) -> Result<ConsistencyReport> {
        self.check_theta(theta)?;
        let q = self.by_config(|v| v);
        let space = &self.space;
        let worst = pair_units(space)
            .into_par_iter()
            .map(|(unit, t, s, w)| {
                let (qt, qs) = (&q[t], &q[s]);
                let (st, ss) = (space.stride(t), space.stride(s));
                let c = |a: usize, b: usize| w + a * st + b * ss;
                let (tt, ts) = (theta[t], theta[s]);
                let mut worst = Worst::default();
                for x in 0..space.card(t) {
                    for y in 0..space.card(s) {
                        let lhs = qt[c(x, y)] * qs[c(x, ts)] * qt[c(tt, ts)] * qs[c(tt, y)];
                        let rhs = qs[c(x, y)] * qt[c(tt, y)] * qs[c(tt, ts)] * qt[c(x, ts)];
                        let d = (lhs - rhs).abs() / lhs.max(rhs).max(1e-300);
                        worst.consider(d, unit, || pair_witness(space, t, s, w, [x, tt, y, ts]));
                    }
                }
                worst
            })
            .reduce(Worst::default, Worst::merge);
        Ok(ConsistencyReport::from_worst(worst, tol))
    }
}

/// Work units `(unit, t, s, w)` of a pair sweep: `t < s` and `w` a full
/// configuration with `w_t = w_s = 0`, which fixes `z` on `Λ \ {t, s}`.
pub(crate) fn pair_units(space: &ConfigSpace) -> Vec<(u64, usize, usize, usize)> {
    let n = space.n_sites();
    let mut units = Vec::new();
    for t in 0..n {
        for s in t + 1..n {
            for w in 0..space.total() {
                if space.state_at(w, t) == 0 && space.state_at(w, s) == 0 {
                    units.push((units.len() as u64, t, s, w));
                }
            }
        }
    }
    units
}

pub(crate) fn masked_states(space: &ConfigSpace, idx: usize, hide: SiteSet) -> Vec<Option<usize>> {
    (0..space.n_sites())
        .map(|i| (!hide.contains(i)).then(|| space.state_at(idx, i)))
        .collect()
}

pub(crate) fn pair_witness(space: &ConfigSpace, t: usize, s: usize, w: usize, xuyv: [usize; 4]) -> Witness {
    let [x, u, y, v] = xuyv;
    Witness::Pair {
        t: space.site_name(t).to_string(),
        s: space.site_name(s).to_string(),
        x,
        u,
        y,
        v,
        z: masked_states(space, w, SiteSet::single(t).with(s)),
    }
}

fn classify(space: &ConfigSpace, tables: &[Vec<f64>]) -> PositivityReport {
    let all_positive = tables.iter().all(|t| t.iter().all(|&q| q > 0.0));
    let points = tables
        .iter()
        .enumerate()
        .map(|(t, table)| {
            let card = space.card(t);
            (0..card)
                .filter(|&a| table.chunks_exact(card).all(|row| row[a] > 0.0))
                .collect()
        })
        .collect();
    PositivityReport::from_points(all_positive, points)
}
