use finfield::energy::{
    delta_from_field, delta_from_system, hamiltonian_from_delta, hamiltonian_from_field, system_from_delta,
    system_from_hamiltonian, system_from_hamiltonian_with, Convention, Gauge,
};
use finfield::markov::{hc_field_from_pair_potential, is_delta_markov, is_markov, minimal_neighborhoods};
use finfield::models;
use finfield::potential::{extract_potential_mobius, field_from_global, gibbs_system, hamiltonian_onepoint};
use finfield::reconstruct::{reconstruct_alternate, reconstruct_positive, reconstruct_weak, verify_invariance};
use finfield::{ConfigSpace, NeighborhoodSystem, OnePointSystem, Potential, Reconstruction, SiteSet};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=3, 1..=4)
}

fn space_of(cards: &[usize]) -> ConfigSpace {
    ConfigSpace::new((0..cards.len()).map(|i| format!("s{i}")), cards.to_vec()).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn tables_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| max_diff(x, y)).fold(0.0, f64::max)
}

/// Neighborhood system from the bits of `mask` over the pairs of `n` sites.
fn nbhd_from_mask(n: usize, mask: u32) -> NeighborhoodSystem {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
    let edges: Vec<(usize, usize)> = pairs
        .into_iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, e)| e)
        .collect();
    NeighborhoodSystem::from_edges(n, &edges).unwrap()
}

/// Random potential whose terms sit on the edges and singletons of `ns`.
fn pair_potential(space: &ConfigSpace, ns: &NeighborhoodSystem, seed: u64) -> Potential {
    let full = models::random_potential(space, 2, seed).unwrap();
    let mut phi = Potential::new(space.clone());
    for (&set, table) in full.terms() {
        if ns.is_clique(set) {
            phi.add_term(set, table.clone()).unwrap();
        }
    }
    phi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_join_and_enumeration(cards in shape(), pick in any::<u64>()) {
        let space = space_of(&cards);
        let idx = (pick % space.total() as u64) as usize;
        for t in 0..space.n_sites() {
            let (x, z) = space.split(t, idx);
            prop_assert_eq!(space.join(t, x, z), idx);
            prop_assert_eq!(x, space.state_at(idx, t));
        }
        prop_assert_eq!(space.index(&space.states(idx)), idx);
        let all = space.enumerate(space.all()).unwrap();
        prop_assert_eq!(all.len(), space.total());
        prop_assert_eq!(space.index_of(&all[idx]).unwrap(), idx);
    }

    #[test]
    fn field_system_round_trip(cards in shape(), seed in any::<u64>()) {
        let space = space_of(&cards);
        let p = models::random_positive_field(&space, seed);
        let q = p.one_point_system().unwrap();
        prop_assert!(q.check_consistency_positive(1e-9).unwrap().consistent);
        let back = reconstruct_positive(&q, &Reconstruction::default()).unwrap();
        prop_assert!(back.max_abs_diff(&p).unwrap() <= 1e-10);
        let alt = reconstruct_alternate(&q, &Reconstruction::default()).unwrap();
        prop_assert!(alt.max_abs_diff(&p).unwrap() <= 1e-10);
        let again = back.one_point_system().unwrap();
        prop_assert!(tables_diff(again.tables(), q.tables()) <= 1e-12);
    }

    #[test]
    fn reconstruction_is_invariant(cards in shape(), seed in any::<u64>()) {
        let space = space_of(&cards);
        let q = models::random_consistent_system(&space, seed);
        let report = verify_invariance(&q, 5, seed).unwrap();
        prop_assert!(report.max_deviation <= 1e-10);
    }

    #[test]
    fn perturbations_are_detected(cards in prop::collection::vec(2usize..=3, 2..=4), seed in any::<u64>(), pick in any::<u64>()) {
        let space = space_of(&cards);
        let q = models::random_consistent_system(&space, seed);
        let t = (pick % space.n_sites() as u64) as usize;
        let z = ((pick >> 8) % space.boundary_count(t) as u64) as usize;
        let bad = models::perturb_system(&q, t, z, 1.01).unwrap();
        let report = bad.check_consistency_positive(1e-6).unwrap();
        prop_assert!(!report.consistent);
        prop_assert!(report.witness.is_some());
    }

    #[test]
    fn weak_round_trip(cards in shape(), seed in any::<u64>(), pick in any::<u64>()) {
        let space = space_of(&cards);
        let theta: Vec<usize> = cards.iter().enumerate().map(|(i, &c)| ((pick >> (4 * i)) % c as u64) as usize).collect();
        let p = models::vacuum_field(&space, seed, &theta).unwrap();
        let q = p.one_point_system().unwrap();
        prop_assert!(q.check_consistency_weak(&theta, 1e-9).unwrap().consistent);
        let back = reconstruct_weak(&q, &theta, &Reconstruction::default()).unwrap();
        prop_assert!(back.max_abs_diff(&p).unwrap() <= 1e-10);
        let class = p.classify_positivity();
        for (t, points) in class.positivity_points.iter().enumerate() {
            prop_assert!(points.contains(&theta[t]));
        }
    }

    #[test]
    fn delta_bijection(cards in shape(), seed in any::<u64>()) {
        let space = space_of(&cards);
        let q = models::random_consistent_system(&space, seed);
        let delta = delta_from_system(&q).unwrap();
        prop_assert!(delta.check(1e-12).consistent);
        let q2 = system_from_delta(&delta).unwrap();
        prop_assert!(tables_diff(q2.tables(), q.tables()) <= 1e-12);
        let delta2 = delta_from_system(&q2).unwrap();
        prop_assert!(tables_diff(delta2.tables(), delta.tables()) <= 1e-12);
    }

    #[test]
    fn gibbs_forms_and_gauges(cards in shape(), seed in any::<u64>(), shift_seed in any::<u64>()) {
        let space = space_of(&cards);
        let p = models::random_positive_field(&space, seed);
        let q = p.one_point_system().unwrap();
        let via_delta = system_from_delta(&delta_from_field(&p).unwrap()).unwrap();
        prop_assert!(tables_diff(via_delta.tables(), q.tables()) <= 1e-10);
        let h = hamiltonian_from_field(&p, &vec![0; cards.len()]).unwrap();
        let via_h = system_from_hamiltonian_with(&h, Convention::LogProbability).unwrap();
        prop_assert!(tables_diff(via_h.tables(), q.tables()) <= 1e-10);

        let energy = hamiltonian_from_delta(&delta_from_system(&q).unwrap(), &Gauge::Zero).unwrap();
        let base = system_from_hamiltonian(&energy).unwrap();
        let shifted = energy.shifted(|t, z| ((shift_seed ^ (t as u64 * 7919 + z as u64)) % 1000) as f64 / 100.0 - 5.0);
        let moved = system_from_hamiltonian(&shifted).unwrap();
        prop_assert!(tables_diff(moved.tables(), base.tables()) <= 1e-12);
    }

    #[test]
    fn potential_pipeline(cards in shape(), seed in any::<u64>(), order in 1usize..=4) {
        let space = space_of(&cards);
        let phi = models::random_potential(&space, order, seed).unwrap();
        let p = field_from_global(&phi).unwrap();
        let q = gibbs_system(&phi);
        prop_assert!(tables_diff(p.one_point_system().unwrap().tables(), q.tables()) <= 1e-10);
        let h = hamiltonian_onepoint(&phi);
        for t in 0..space.n_sites() {
            let rest = space.all().without(t);
            for idx in 0..space.total() {
                let tele = phi.energy_on(space.all(), idx) - phi.energy_on(rest, idx);
                prop_assert!((h.value_at(t, idx) - tele).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn mobius_round_trip(cards in shape(), seed in any::<u64>(), pick in any::<u64>()) {
        let space = space_of(&cards);
        let p = models::random_positive_field(&space, seed);
        let theta: Vec<usize> = cards.iter().enumerate().map(|(i, &c)| ((pick >> (4 * i)) % c as u64) as usize).collect();
        let phi = extract_potential_mobius(&p, &theta).unwrap();
        prop_assert!(phi.is_vacuum_for(&theta));
        prop_assert!(field_from_global(&phi).unwrap().max_abs_diff(&p).unwrap() <= 1e-10);
    }

    #[test]
    fn markov_criteria_agree(cards in shape(), seed in any::<u64>(), mask in any::<u32>(), markov_instance in any::<bool>()) {
        let space = space_of(&cards);
        let n = space.n_sites();
        let ns = nbhd_from_mask(n, mask);
        let p = if markov_instance {
            hc_field_from_pair_potential(&pair_potential(&space, &ns, seed), &ns).unwrap()
        } else {
            models::random_positive_field(&space, seed)
        };
        // test against the generating system and a second unrelated one
        for other in [ns.clone(), nbhd_from_mask(n, mask.rotate_left(7))] {
            let a = is_markov(&p, &other, 1e-9).unwrap().markov;
            let b = is_delta_markov(&delta_from_field(&p).unwrap(), &other, 1e-9).unwrap().markov;
            prop_assert_eq!(a, b);
        }
        if markov_instance {
            prop_assert!(is_markov(&p, &ns, 1e-9).unwrap().markov);
            prop_assert!(is_delta_markov(&delta_from_field(&p).unwrap(), &ns, 1e-9).unwrap().markov);
            // monotone in the neighborhood system
            prop_assert!(is_markov(&p, &NeighborhoodSystem::complete(n), 1e-9).unwrap().markov);
        }
    }

    #[test]
    fn minimal_neighborhoods_are_minimal(cards in shape(), seed in any::<u64>(), mask in any::<u32>()) {
        let space = space_of(&cards);
        let ns = nbhd_from_mask(space.n_sites(), mask);
        let p = hc_field_from_pair_potential(&pair_potential(&space, &ns, seed), &ns).unwrap();
        let min = minimal_neighborhoods(&p, 1e-9).unwrap();
        prop_assert!(is_markov(&p, &min, 1e-9).unwrap().markov);
        prop_assert!(min.is_refined_by(&ns));
        for (a, b) in min.edges() {
            prop_assert!(!is_markov(&p, &min.without_edge(a, b), 1e-9).unwrap().markov);
        }
    }

    #[test]
    fn generated_systems_are_valid(cards in shape(), seed in any::<u64>()) {
        let space = space_of(&cards);
        let q: OnePointSystem = models::random_consistent_system(&space, seed);
        prop_assert!(q.is_positive());
        let phi = models::random_potential(&space, 2, seed).unwrap();
        prop_assert!(gibbs_system(&phi).check_consistency_positive(1e-9).unwrap().consistent);
        prop_assert!(phi.terms().keys().all(|s| s.len() <= 2 && !s.is_empty()));
        prop_assert!(phi.terms().keys().all(|s| s.is_subset(SiteSet::first(space.n_sites()))));
    }
}
