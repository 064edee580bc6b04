//! Instance generators and a single-site heat-bath sampler.
//!
//! Binary models map state 0 to spin −1 and state 1 to spin +1.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RandomField;
use crate::markov::NeighborhoodSystem;
use crate::onepoint::OnePointSystem;
use crate::potential::Potential;
use crate::space::{ConfigSpace, SiteSet};

/// Identifier of the generator behind every seeded routine.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Marginals of valid input distributions may drift this far from 1.
const MARGINAL_TOL: f64 = 1e-9;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn spin(state: usize) -> f64 {
    if state == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Ising potential on an arbitrary graph over binary sites:
/// `Φ_{st} = −β·s_s·s_t` on edges and `Φ_t = −h·s_t`.
pub fn ising_graph<S: AsRef<str>>(
    names: &[S],
    edges: &[(usize, usize)],
    beta: f64,
    h: f64,
) -> Result<(Potential, NeighborhoodSystem)> {
    if !beta.is_finite() || !h.is_finite() {
        return Err(Error::domain("coupling and field must be finite"));
    }
    let space = ConfigSpace::new(names.iter().map(|s| s.as_ref().to_string()), vec![2; names.len()])?;
    let nbhd = NeighborhoodSystem::from_edges(names.len(), edges)?;
    let mut phi = Potential::new(space);
    if h != 0.0 {
        for t in 0..names.len() {
            phi.add_term(SiteSet::single(t), vec![h, -h])?;
        }
    }
    if beta != 0.0 {
        for (a, b) in nbhd.edges() {
            let table = (0..4).map(|i| -beta * spin(i / 2) * spin(i % 2)).collect();
            phi.add_term(SiteSet::single(a).with(b), table)?;
        }
    }
    Ok((phi, nbhd))
}

/// Ising model on a `rows × cols` grid with sites `r{i}c{j}` in raster order.
pub fn ising_potential(rows: usize, cols: usize, beta: f64, h: f64) -> Result<(Potential, NeighborhoodSystem)> {
    let n = rows.saturating_mul(cols);
    if n == 0 {
        return Err(Error::domain("the grid needs at least one site"));
    }
    if n > crate::space::MAX_SITES {
        return Err(Error::SpaceTooLarge {
            configs: 1u128.checked_shl(n.min(127) as u32).unwrap_or(u128::MAX),
            cap: crate::space::config_cap(),
        });
    }
    let names: Vec<String> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| format!("r{i}c{j}")))
        .collect();
    let mut edges = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let t = i * cols + j;
            if j + 1 < cols {
                edges.push((t, t + 1));
            }
            if i + 1 < rows {
                edges.push((t, t + cols));
            }
        }
    }
    ising_graph(&names, &edges, beta, h)
}

/// Ising model on the path `names[0] – names[1] – …`.
pub fn ising_chain<S: AsRef<str>>(names: &[S], beta: f64, h: f64) -> Result<(Potential, NeighborhoodSystem)> {
    let edges: Vec<(usize, usize)> = (1..names.len()).map(|t| (t - 1, t)).collect();
    ising_graph(names, &edges, beta, h)
}

/// `P(x) = ∏_t p_t(x_t)`.
pub fn product_field(space: ConfigSpace, marginals: &[Vec<f64>]) -> Result<RandomField> {
    if marginals.len() != space.n_sites() {
        return Err(Error::domain("one marginal per site is required"));
    }
    for (t, m) in marginals.iter().enumerate() {
        let sum: f64 = m.iter().sum();
        if m.len() != space.card(t)
            || m.iter().any(|v| !v.is_finite() || *v < 0.0)
            || (sum - 1.0).abs() > MARGINAL_TOL
        {
            return Err(Error::domain(format!(
                "marginal of site `{}` is not a distribution on {} states",
                space.site_name(t),
                space.card(t)
            )));
        }
    }
    let probs = (0..space.total())
        .map(|idx| (0..space.n_sites()).map(|t| marginals[t][space.state_at(idx, t)]).product())
        .collect();
    RandomField::new(space, probs)
}

/// Strictly positive field with log-weights drawn uniformly from `[−1.5, 1.5]`.
pub fn random_positive_field(space: &ConfigSpace, seed: u64) -> RandomField {
    let mut rng = rng(seed);
    let dist = Uniform::new_inclusive(-1.5, 1.5);
    let logw: Vec<f64> = (0..space.total()).map(|_| dist.sample(&mut rng)).collect();
    RandomField::from_log_weights(space.clone(), &logw).expect("finite weights")
}

/// Conditionals of [`random_positive_field`].
pub fn random_consistent_system(space: &ConfigSpace, seed: u64) -> OnePointSystem {
    random_positive_field(space, seed)
        .one_point_system()
        .expect("positive fields have every conditional")
}

/// Potential with a term on every nonempty `V` with `|V| ≤ max_order`,
/// entries uniform in `[−1, 1]`.
pub fn random_potential(space: &ConfigSpace, max_order: usize, seed: u64) -> Result<Potential> {
    let mut rng = rng(seed);
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    let mut sets: Vec<SiteSet> = space
        .all()
        .subsets()
        .filter(|s| !s.is_empty() && s.len() <= max_order)
        .collect();
    sets.sort_by_key(|s| (s.len(), s.bits()));
    let mut phi = Potential::new(space.clone());
    for set in sets {
        let table = (0..space.count(set)).map(|_| dist.sample(&mut rng)).collect();
        phi.add_term(set, table)?;
    }
    Ok(phi)
}

/// Multiplies `q_t^z(x)` by `factor` and renormalizes that table.
pub fn perturb_entry(q: &OnePointSystem, site: usize, z: usize, x: usize, factor: f64) -> Result<OnePointSystem> {
    let space = q.space();
    if !(factor.is_finite() && factor > 0.0) || factor == 1.0 {
        return Err(Error::domain(format!("perturbation factor {factor} must be positive and differ from 1")));
    }
    if site >= space.n_sites() || z >= space.boundary_count(site) || x >= space.card(site) {
        return Err(Error::domain(format!("no entry ({site}, {z}, {x}) in the system")));
    }
    let card = space.card(site);
    if card < 2 {
        return Err(Error::domain("a single-state table cannot be perturbed"));
    }
    let mut tables = q.tables().to_vec();
    let row = &mut tables[site][z * card..(z + 1) * card];
    row[x] *= factor;
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= sum);
    OnePointSystem::new(space.clone(), tables)
}

/// [`perturb_entry`] at state 0.
pub fn perturb_system(q: &OnePointSystem, site: usize, z: usize, factor: f64) -> Result<OnePointSystem> {
    perturb_entry(q, site, z, 0, factor)
}

/// Random field vanishing exactly on the configurations with no component
/// equal to `θ`; weakly positive with `θ_t` a positivity point of every site.
pub fn vacuum_field(space: &ConfigSpace, seed: u64, theta: &[usize]) -> Result<RandomField> {
    if theta.len() != space.n_sites() || theta.iter().zip(space.cards()).any(|(a, c)| a >= c) {
        return Err(Error::domain(format!("{theta:?} is not a configuration of the space")));
    }
    let base = random_positive_field(space, seed);
    let weights = base
        .probs()
        .iter()
        .enumerate()
        .map(|(idx, &p)| {
            let touches = (0..space.n_sites()).any(|t| space.state_at(idx, t) == theta[t]);
            if touches {
                p
            } else {
                0.0
            }
        })
        .collect();
    RandomField::from_weights(space.clone(), weights)
}

/// Visit frequencies of a heat-bath chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub algorithm: String,
    pub seed: u64,
    pub sweeps: u64,
    pub burn_in: u64,
    /// Per site, the fraction of recorded sweeps spent in each state.
    pub marginals: Vec<Vec<f64>>,
    /// Fraction of recorded sweeps ending at each configuration, in canonical order.
    pub joint: Vec<f64>,
}

/// `k_t(x → x′)`: probability that updating site `t` moves configuration
/// `from` to `to`, i.e. `q_t^z(x′_t)` when they agree off `t` and 0 otherwise.
pub fn heat_bath_kernel(q: &OnePointSystem, site: usize, from: usize, to: usize) -> f64 {
    let space = q.space();
    let (_, z_from) = space.split(site, from);
    let (x_to, z_to) = space.split(site, to);
    if z_from == z_to {
        q.q(site, z_from, x_to)
    } else {
        0.0
    }
}

/// Heat-bath Gibbs sampler: each sweep redraws every site in site order
/// from `q_t` at the current boundary, starting from the all-zero
/// configuration. The configuration after each of the `sweeps` sweeps
/// following `burn_in` is recorded.
pub fn gibbs_sample(q: &OnePointSystem, sweeps: u64, burn_in: u64, seed: u64) -> Result<SampleResult> {
    q.require_positive("the Gibbs sampler")?;
    if sweeps == 0 {
        return Err(Error::domain("at least one sweep must be recorded"));
    }
    let space = q.space();
    let mut rng = rng(seed);
    let mut idx = 0usize;
    let mut counts = vec![0u64; space.total()];
    for sweep in 0..burn_in + sweeps {
        for t in 0..space.n_sites() {
            let (_, z) = space.split(t, idx);
            let row = q.row(t, z);
            let r: f64 = rng.gen();
            let mut acc = 0.0;
            let mut x = row.len() - 1;
            for (a, &p) in row.iter().enumerate() {
                acc += p;
                if r < acc {
                    x = a;
                    break;
                }
            }
            idx = space.join(t, x, z);
        }
        if sweep >= burn_in {
            counts[idx] += 1;
        }
    }
    let n = sweeps as f64;
    let joint: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let marginals = (0..space.n_sites())
        .map(|t| {
            let mut m = vec![0.0; space.card(t)];
            for (i, &p) in joint.iter().enumerate() {
                m[space.state_at(i, t)] += p;
            }
            m
        })
        .collect();
    Ok(SampleResult {
        algorithm: RNG_ALGORITHM.to_string(),
        seed,
        sweeps,
        burn_in,
        marginals,
        joint,
    })
}

/// `½ Σ |a − b|`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
