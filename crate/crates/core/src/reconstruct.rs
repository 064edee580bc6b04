//! Reconstruction of the unique compatible field from a consistent one-point system.
//!
//! With an enumeration `t_1, …, t_n` of the sites and a base configuration
//! `u`, the unnormalized log-weight of `x` is
//!
//! ```text
//! Σ_j ln q_{t_j}^{(xu)_j}(x_j) − ln q_{t_j}^{(xu)_j}(u_j),   (xu)_j = x_1…x_{j−1} u_{j+1}…u_n
//! ```
//!
//! For a consistent system the normalized result depends on neither the
//! enumeration nor `u`. Weights are accumulated in log space and normalized
//! with a max shift.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::RandomField;
use crate::onepoint::{OnePointSystem, DEFAULT_TOL};
use crate::space::ConfigSpace;

/// Maximum entrywise deviation tolerated between reconstructions.
pub const INVARIANCE_TOL: f64 = 1e-10;

/// Values below this are clamped to exact zero in weakly positive reconstructions.
pub const ZERO_CLAMP: f64 = 1e-300;

/// Enumeration, base configuration and verification settings.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// Site enumeration `t_1, …, t_n`; `None` is the space order.
    pub order: Option<Vec<usize>>,
    /// Base configuration `u` as one state per site; `None` is all zeros.
    pub base: Option<Vec<usize>>,
    /// Run the consistency check first.
    pub verify: bool,
    pub tol: f64,
}

impl Default for Reconstruction {
    fn default() -> Self {
        Reconstruction {
            order: None,
            base: None,
            verify: true,
            tol: DEFAULT_TOL,
        }
    }
}

impl Reconstruction {
    pub fn with_order(mut self, order: Vec<usize>) -> Self {
        self.order = Some(order);
        self
    }

    pub fn with_base(mut self, base: Vec<usize>) -> Self {
        self.base = Some(base);
        self
    }

    pub fn unverified(mut self) -> Self {
        self.verify = false;
        self
    }

    fn order(&self, space: &ConfigSpace) -> Result<Vec<usize>> {
        let order = self
            .order
            .clone()
            .unwrap_or_else(|| (0..space.n_sites()).collect());
        check_order(space, &order)?;
        Ok(order)
    }

    fn base(&self, space: &ConfigSpace) -> Result<Vec<usize>> {
        let base = self.base.clone().unwrap_or_else(|| vec![0; space.n_sites()]);
        check_states(space, &base)?;
        Ok(base)
    }
}

fn check_order(space: &ConfigSpace, order: &[usize]) -> Result<()> {
    let mut seen = vec![false; space.n_sites()];
    for &t in order {
        if t >= seen.len() || std::mem::replace(&mut seen[t], true) {
            return Err(Error::domain(format!("{order:?} is not an enumeration of the sites")));
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(())
    } else {
        Err(Error::domain(format!("{order:?} is not an enumeration of the sites")))
    }
}

fn check_states(space: &ConfigSpace, states: &[usize]) -> Result<()> {
    if states.len() != space.n_sites() || states.iter().zip(space.cards()).any(|(x, c)| x >= c) {
        return Err(Error::domain(format!("{states:?} is not a configuration of the space")));
    }
    Ok(())
}

/// `Σ_j ln q_{t_j}(x_j | (xu)_j) − ln q_{t_j}(u_j | (xu)_j)` for full indices `x`, `u`.
///
/// `logq[t][w]` is `ln q_t` at the full configuration `w`.
fn log_weight(space: &ConfigSpace, logq: &[Vec<f64>], order: &[usize], x: usize, u: usize) -> f64 {
    let mut cur = u;
    let mut acc = 0.0;
    for &t in order {
        let xt = space.state_at(x, t);
        let at_x = space.with_state(cur, t, xt);
        // cur has u_t at t and (xu)_j elsewhere
        acc += logq[t][at_x] - logq[t][cur];
        cur = at_x;
    }
    acc
}

/// [`log_weight`] for systems with zeros: numerators may be `-inf`, the
/// denominators sit at positivity points and must stay finite.
fn log_weight_weak(space: &ConfigSpace, logq: &[Vec<f64>], order: &[usize], x: usize, u: usize) -> f64 {
    let mut cur = u;
    let mut acc = 0.0;
    for &t in order {
        let at_x = space.with_state(cur, t, space.state_at(x, t));
        assert!(logq[t][cur].is_finite(), "zero denominator at a positivity point");
        acc += logq[t][at_x] - logq[t][cur];
        cur = at_x;
    }
    acc
}

/// Unnormalized log-weights of every configuration for the given enumeration and base.
pub fn log_weights(q: &OnePointSystem, order: &[usize], base: &[usize]) -> Result<Vec<f64>> {
    q.require_positive("reconstruction")?;
    let space = q.space();
    check_order(space, order)?;
    check_states(space, base)?;
    let logq = q.by_config(f64::ln);
    let u = space.index(base);
    Ok((0..space.total())
        .into_par_iter()
        .map(|x| log_weight(space, &logq, order, x, u))
        .collect())
}

fn verify_positive(q: &OnePointSystem, opts: &Reconstruction) -> Result<()> {
    q.require_positive("reconstruction")?;
    if opts.verify {
        let report = q.check_consistency_positive(opts.tol)?;
        if !report.consistent {
            return Err(Error::Inconsistent(Box::new(report)));
        }
    }
    Ok(())
}

/// The unique positive field compatible with a consistent positive system.
///
/// Without verification an inconsistent system still yields a normalized
/// table, but one that depends on the enumeration and base configuration.
pub fn reconstruct_positive(q: &OnePointSystem, opts: &Reconstruction) -> Result<RandomField> {
    verify_positive(q, opts)?;
    let space = q.space();
    let logw = log_weights(q, &opts.order(space)?, &opts.base(space)?)?;
    RandomField::from_log_weights(space.clone(), &logw)
}

/// The dual form `P(x) = (Σ_α Π_j q^{(αx)_j}(α_j) / q^{(αx)_j}(x_j))^{−1}`,
/// which uses `x` itself as the base configuration.
///
/// The table is renormalized at the end, which is a no-op for consistent input.
pub fn reconstruct_alternate(q: &OnePointSystem, opts: &Reconstruction) -> Result<RandomField> {
    verify_positive(q, opts)?;
    let space = q.space();
    let order = opts.order(space)?;
    let logq = q.by_config(f64::ln);
    let n = space.total();
    let logp: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|x| {
            let terms: Vec<f64> = (0..n).map(|a| log_weight(space, &logq, &order, a, x)).collect();
            -log_sum_exp(&terms)
        })
        .collect();
    RandomField::from_log_weights(space.clone(), &logp)
}

/// The unique weakly positive field compatible with a weakly positive system,
/// built with the positivity points `theta` as base configuration.
pub fn reconstruct_weak(q: &OnePointSystem, theta: &[usize], opts: &Reconstruction) -> Result<RandomField> {
    q.check_theta(theta)?;
    if opts.verify {
        let report = q.check_consistency_weak(theta, opts.tol)?;
        if !report.consistent {
            return Err(Error::Inconsistent(Box::new(report)));
        }
    }
    let space = q.space();
    let order = opts.order(space)?;
    let logq = q.by_config(f64::ln);
    let u = space.index(theta);
    let logw: Vec<f64> = (0..space.total())
        .into_par_iter()
        .map(|x| log_weight_weak(space, &logq, &order, x, u))
        .collect();
    let field = RandomField::from_log_weights(space.clone(), &logw)?;
    if field.probs().iter().all(|&p| p == 0.0 || p >= ZERO_CLAMP) {
        return Ok(field);
    }
    let clamped = field
        .probs()
        .iter()
        .map(|&p| if p < ZERO_CLAMP { 0.0 } else { p })
        .collect();
    RandomField::from_weights(space.clone(), clamped)
}

/// Outcome of [`verify_invariance`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InvarianceReport {
    /// Largest entrywise spread `max − min` across all reconstructions.
    pub max_deviation: f64,
    /// Number of (enumeration, base) pairs reconstructed.
    pub reconstructions: usize,
}

/// Every permutation of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot successor");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// The (enumeration, base) pairs exercised by [`verify_invariance`]:
/// `trials` random pairs, plus every enumeration (each with the zero base and
/// one random base) when `|Λ| ≤ 4`.
pub fn invariance_plan(space: &ConfigSpace, trials: usize, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = space.n_sites();
    let random_base = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        space.cards().iter().map(|&c| rng.gen_range(0..c)).collect()
    };
    let mut plan = Vec::new();
    if n <= 4 {
        for perm in permutations(n) {
            plan.push((perm.clone(), vec![0; n]));
            plan.push((perm, random_base(&mut rng)));
        }
    }
    for _ in 0..trials {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        plan.push((order, random_base(&mut rng)));
    }
    plan
}

/// Reconstructs under many enumerations and base configurations and measures the spread.
///
/// The input is not checked for consistency; an inconsistent system shows up
/// as a deviation above [`INVARIANCE_TOL`] and an [`Error::InvarianceFailure`].
pub fn verify_invariance(q: &OnePointSystem, trials: usize, seed: u64) -> Result<InvarianceReport> {
    let plan = invariance_plan(q.space(), trials, seed);
    invariance_over(q, &plan)
}

/// [`verify_invariance`] over an explicit list of (enumeration, base) pairs.
pub fn invariance_over(q: &OnePointSystem, plan: &[(Vec<usize>, Vec<usize>)]) -> Result<InvarianceReport> {
    q.require_positive("invariance verification")?;
    let fields = plan
        .iter()
        .map(|(order, base)| {
            let opts = Reconstruction::default()
                .with_order(order.clone())
                .with_base(base.clone())
                .unverified();
            reconstruct_positive(q, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = (0..q.space().total())
        .map(|i| {
            let (lo, hi) = fields.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
                (lo.min(f.prob(i)), hi.max(f.prob(i)))
            });
            hi - lo
        })
        .fold(0.0, f64::max);
    if max_deviation > INVARIANCE_TOL {
        return Err(Error::InvarianceFailure {
            deviation: max_deviation,
        });
    }
    Ok(InvarianceReport {
        max_deviation,
        reconstructions: fields.len(),
    })
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Positivity;
    use crate::models;

    fn opts() -> Reconstruction {
        Reconstruction::default()
    }

    #[test]
    fn uniform_system_gives_uniform_field() {
        let space = ConfigSpace::new(["a", "b", "c"], [2, 3, 2]).unwrap();
        let q = OnePointSystem::uniform(space.clone());
        for p in [
            reconstruct_positive(&q, &opts()).unwrap(),
            reconstruct_alternate(&q, &opts()).unwrap(),
        ] {
            assert!(p.probs().iter().all(|&v| (v - 1.0 / 12.0).abs() < 1e-15));
        }
    }

    #[test]
    fn product_system_gives_product_field() {
        let space = ConfigSpace::new(["a", "b"], [2, 2]).unwrap();
        let p0 = models::product_field(space, &[vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        let q = p0.one_point_system().unwrap();
        let p = reconstruct_positive(&q, &opts()).unwrap();
        assert!((p.prob(3) - 0.375).abs() < 1e-15);
        let alt = reconstruct_alternate(&q, &opts()).unwrap();
        for (a, b) in p.probs().iter().zip([0.125, 0.125, 0.375, 0.375]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(alt.field_equal(&p, 1e-15).unwrap());
    }

    #[test]
    fn ternary_round_trip() {
        let space = ConfigSpace::uniform(3, 3).unwrap();
        for seed in 0..4 {
            let p0 = models::random_positive_field(&space, seed);
            let q = p0.one_point_system().unwrap();
            let p = reconstruct_positive(&q, &opts()).unwrap();
            assert!(p.field_equal(&p0, 1e-10).unwrap());
            let alt = reconstruct_alternate(&q, &opts().with_order(vec![2, 0, 1])).unwrap();
            assert!(alt.field_equal(&p, 1e-10).unwrap());
        }
    }

    #[test]
    fn inconsistent_system_is_rejected_when_verifying() {
        let space = ConfigSpace::uniform(3, 2).unwrap();
        let q = models::random_positive_field(&space, 1).one_point_system().unwrap();
        let bad = models::perturb_system(&q, 0, 0, 1.01).unwrap();
        assert!(matches!(reconstruct_positive(&bad, &opts()), Err(Error::Inconsistent(_))));
        // unverified: still a normalized table
        let p = reconstruct_positive(&bad, &opts().unverified()).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_entries_are_a_positivity_error() {
        let space = ConfigSpace::uniform(2, 2).unwrap();
        let q = models::vacuum_field(&space, 0, &[0, 0]).unwrap().one_point_system().unwrap();
        assert!(matches!(reconstruct_positive(&q, &opts()), Err(Error::NotPositive(_))));
    }

    #[test]
    fn bad_orders_and_bases_are_rejected() {
        let q = OnePointSystem::uniform(ConfigSpace::uniform(3, 2).unwrap());
        assert!(reconstruct_positive(&q, &opts().with_order(vec![0, 0, 1])).is_err());
        assert!(reconstruct_positive(&q, &opts().with_order(vec![0, 1])).is_err());
        assert!(reconstruct_positive(&q, &opts().with_base(vec![0, 2, 0])).is_err());
    }

    #[test]
    fn weak_reconstruction_cases() {
        // strictly positive input: same as the positive formula at u = θ
        let space = ConfigSpace::new(["a", "b", "c"], [2, 3, 2]).unwrap();
        let q = models::random_positive_field(&space, 5).one_point_system().unwrap();
        let theta = vec![1, 2, 0];
        let w = reconstruct_weak(&q, &theta, &opts()).unwrap();
        let p = reconstruct_positive(&q, &opts()).unwrap();
        assert!(w.field_equal(&p, 1e-10).unwrap());

        // vacuum field recovered from its own conditionals
        let p0 = models::vacuum_field(&space, 5, &[0, 0, 0]).unwrap();
        let qv = p0.one_point_system().unwrap();
        let rec = reconstruct_weak(&qv, &[0, 0, 0], &opts()).unwrap();
        assert!(rec.field_equal(&p0, 1e-10).unwrap());
        assert_eq!(rec.classify_positivity().class, Positivity::WeaklyPositive);

        // single site: P = q_t^∅
        let one = ConfigSpace::new(["a"], [3]).unwrap();
        let q1 = OnePointSystem::new(one, vec![vec![0.0, 0.25, 0.75]]).unwrap();
        let p1 = reconstruct_weak(&q1, &[2], &opts()).unwrap();
        assert_eq!(p1.prob(0), 0.0);
        assert!((p1.prob(1) - 0.25).abs() < 1e-15 && (p1.prob(2) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn weak_reconstruction_rejects_bad_theta() {
        let space = ConfigSpace::uniform(2, 2).unwrap();
        let q = models::vacuum_field(&space, 0, &[0, 0]).unwrap().one_point_system().unwrap();
        assert!(matches!(
            reconstruct_weak(&q, &[1, 1], &opts()),
            Err(Error::InvalidPositivityPoint { .. })
        ));
    }

    #[test]
    fn invariance_examples() {
        let space = ConfigSpace::new(["a", "b", "c"], [2, 3, 2]).unwrap();
        let q = models::random_positive_field(&space, 12).one_point_system().unwrap();
        let r = verify_invariance(&q, 4, 1).unwrap();
        assert!(r.max_deviation <= 1e-10);
        assert_eq!(r.reconstructions, 6 * 2 + 4);

        let single = models::random_positive_field(&ConfigSpace::new(["a"], [3]).unwrap(), 1);
        let r = verify_invariance(&single.one_point_system().unwrap(), 3, 1).unwrap();
        assert_eq!(r.max_deviation, 0.0);

        let bad = models::perturb_system(&q, 1, 0, 1.01).unwrap();
        match verify_invariance(&bad, 4, 1) {
            Err(Error::InvarianceFailure { deviation }) => assert!(deviation > 1e-6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(0), vec![Vec::<usize>::new()]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(3)[5], vec![2, 1, 0]);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
