use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn self_loop(gamma: f64) -> FiniteMdp {
    FiniteMdp::new(1, 1, vec![1.0], gamma, vec![1.0]).unwrap()
}

fn policy_pair(n: usize, na: usize, seed: u64) -> (TabularPolicy, TabularPolicy) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        TabularPolicy::random(n, na, SUPPORT_FLOOR, &mut rng),
        TabularPolicy::random(n, na, SUPPORT_FLOOR, &mut rng),
    )
}

/// Truncated power series `Σ_t γ^t (P_πᵀ)^t ρ₀`, independent of the linear solve.
fn series_state_occupancy(mdp: &FiniteMdp, pi: &TabularPolicy) -> Vec<f64> {
    let n = mdp.n_states();
    let mut dist = mdp.rho0().to_vec();
    let mut total = vec![0.0; n];
    let mut discount = 1.0;
    while discount > 1e-18 {
        for s in 0..n {
            total[s] += discount * dist[s];
        }
        let mut next = vec![0.0; n];
        for s in 0..n {
            for a in 0..mdp.n_actions() {
                for s2 in 0..n {
                    next[s2] += dist[s] * pi.prob(s, a) * mdp.prob(s, a, s2);
                }
            }
        }
        dist = next;
        discount *= mdp.gamma();
    }
    total
}

/// Each KL summed straight from its definition over normalized joints.
fn direct_kls(mdp: &FiniteMdp, pi: &TabularPolicy, expert: &TabularPolicy) -> (f64, f64, f64) {
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let g = mdp.gamma();
    let xp = series_state_occupancy(mdp, pi);
    let xe = series_state_occupancy(mdp, expert);
    let mut kl_sa = 0.0;
    let mut kl_ss = 0.0;
    let mut idd = 0.0;
    for s in 0..n {
        for a in 0..na {
            let p = (1.0 - g) * xp[s] * pi.prob(s, a);
            let q = (1.0 - g) * xe[s] * expert.prob(s, a);
            if p > 0.0 {
                kl_sa += p * (p / q).ln();
            }
        }
        for s2 in 0..n {
            let p: f64 = (0..na).map(|a| (1.0 - g) * xp[s] * pi.prob(s, a) * mdp.prob(s, a, s2)).sum();
            let q: f64 = (0..na).map(|a| (1.0 - g) * xe[s] * expert.prob(s, a) * mdp.prob(s, a, s2)).sum();
            if p > 0.0 {
                kl_ss += p * (p / q).ln();
            }
            for a in 0..na {
                let joint = (1.0 - g) * xp[s] * pi.prob(s, a) * mdp.prob(s, a, s2);
                if joint > 0.0 {
                    let inv_p = pi.prob(s, a) * mdp.prob(s, a, s2)
                        / (0..na).map(|b| pi.prob(s, b) * mdp.prob(s, b, s2)).sum::<f64>();
                    let inv_e = expert.prob(s, a) * mdp.prob(s, a, s2)
                        / (0..na).map(|b| expert.prob(s, b) * mdp.prob(s, b, s2)).sum::<f64>();
                    idd += joint * (inv_p / inv_e).ln();
                }
            }
        }
    }
    (kl_sa, kl_ss, idd)
}

#[test]
fn self_loop_occupancy_is_geometric_sum() {
    let mdp = self_loop(0.9);
    let occ = exact_occupancies(&mdp, &TabularPolicy::uniform(1, 1)).unwrap();
    assert!((occ.sa(0, 0) - 10.0).abs() < 1e-12);
}

#[test]
fn absorbing_chain_splits_mass() {
    let mdp = FiniteMdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], 0.5, vec![1.0, 0.0]).unwrap();
    let occ = exact_occupancies(&mdp, &TabularPolicy::uniform(2, 1)).unwrap();
    let x = occ.state();
    assert!((x[0] - 1.0).abs() < 1e-12);
    assert!((x[1] - 1.0).abs() < 1e-12);
}

#[test]
fn occupancies_match_power_series_and_marginals() {
    for seed in 0..10 {
        let mdp = make_mdp(MdpKind::RandomStochastic, 5, 3, seed).unwrap();
        let (pi, _) = policy_pair(5, 3, seed + 100);
        let occ = exact_occupancies(&mdp, &pi).unwrap();
        let series = series_state_occupancy(&mdp, &pi);
        for (a, b) in occ.state().iter().zip(&series) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((occ.total_mass() - 1.0 / (1.0 - mdp.gamma())).abs() < 1e-9);
        for s in 0..5 {
            for s2 in 0..5 {
                let marg: f64 = (0..3).map(|a| occ.sas(s, a, s2)).sum();
                assert!((marg - occ.ss(s, s2)).abs() < 1e-12);
            }
            for a in 0..3 {
                let row: f64 = (0..5).map(|s2| occ.sas(s, a, s2)).sum();
                assert!((row - occ.sa(s, a)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn monte_carlo_agrees_within_three_standard_errors() {
    let mdp = make_mdp(MdpKind::RandomStochastic, 5, 3, 7).unwrap();
    let (pi, _) = policy_pair(5, 3, 8);
    let exact = exact_occupancies(&mdp, &pi).unwrap();
    // 0.9^140 ≈ 4e-7
    let est = monte_carlo_occupancy(&mdp, &pi, 1_000_000, 140, 11);
    assert!(est.truncation_bound < 1e-5);
    for i in 0..exact.rho_sa.len() {
        let diff = (est.occupancy.rho_sa[i] - exact.rho_sa[i]).abs();
        assert!(
            diff <= 3.0 * est.se_sa[i] + est.truncation_bound,
            "entry {i}: mc {} exact {} se {}",
            est.occupancy.rho_sa[i],
            exact.rho_sa[i],
            est.se_sa[i]
        );
    }
}

#[test]
fn monte_carlo_self_loop_and_truncation_bias() {
    let mdp = self_loop(0.9);
    let pi = TabularPolicy::uniform(1, 1);
    let est = monte_carlo_occupancy(&mdp, &pi, 100_000, 140, 0);
    assert!((est.occupancy.sa(0, 0) - 10.0).abs() < 0.1);

    let short = monte_carlo_occupancy(&mdp, &pi, 1000, 10, 0);
    let bias = 10.0 - short.occupancy.sa(0, 0);
    assert!(bias > 0.0 && bias <= short.truncation_bound + 1e-12);
}

#[test]
fn inverse_density_unique_action_is_indicator() {
    let mdp = make_mdp(MdpKind::UniqueAction, 4, 2, 3).unwrap();
    let (pi, _) = policy_pair(4, 2, 4);
    let table = inverse_dynamics_density(&mdp, &pi).unwrap();
    for s in 0..4 {
        for a in 0..2 {
            let s2 = mdp.next_distribution(s, a).iter().position(|&p| p == 1.0).unwrap();
            assert_eq!(table.get(s, s2, a), Some(1.0));
            assert_eq!(table.get(s, s2, 1 - a), Some(0.0));
        }
    }
}

#[test]
fn inverse_density_shared_target_splits_evenly() {
    // both actions move state 0 to state 1
    let mdp = FiniteMdp::new(2, 2, vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0], 0.9, vec![1.0, 0.0]).unwrap();
    let table = inverse_dynamics_density(&mdp, &TabularPolicy::uniform(2, 2)).unwrap();
    assert_eq!(table.row(0, 1), Some(&[0.5, 0.5][..]));
    assert_eq!(table.row(0, 0), None);
}

#[test]
fn inverse_density_rows_normalize() {
    for seed in 0..20 {
        let mdp = make_mdp(MdpKind::RandomStochastic, 6, 3, seed).unwrap();
        let (pi, _) = policy_pair(6, 3, seed);
        let table = inverse_dynamics_density(&mdp, &pi).unwrap();
        for s in 0..6 {
            for s2 in 0..6 {
                let row = table.row(s, s2).unwrap();
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn identical_policies_have_zero_divergence() {
    let mdp = make_mdp(MdpKind::RandomStochastic, 6, 3, 1).unwrap();
    let (pi, _) = policy_pair(6, 3, 2);
    let r = kl_report(&mdp, &pi, &pi).unwrap();
    assert_eq!((r.kl_sa, r.kl_ss, r.idd, r.residual), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn decomposition_identity_on_random_triples() {
    for seed in 0..50 {
        let mdp = make_mdp(MdpKind::RandomStochastic, 6, 3, seed).unwrap();
        let (pi, expert) = policy_pair(6, 3, 1000 + seed);
        let r = kl_report(&mdp, &pi, &expert).unwrap();
        assert!(r.residual.abs() <= 1e-10, "seed {seed}: residual {}", r.residual);
        let (kl_sa, kl_ss, idd) = direct_kls(&mdp, &pi, &expert);
        assert!((r.kl_sa - kl_sa).abs() <= 1e-10);
        assert!((r.kl_ss - kl_ss).abs() <= 1e-10);
        assert!((r.idd - idd).abs() <= 1e-10);
        assert!(r.kl_sa >= r.kl_ss - 1e-12);
    }
}

#[test]
fn unique_action_dynamics_close_the_gap() {
    for seed in 0..30 {
        let n = 3 + (seed as usize % 5);
        let na = 1 + (seed as usize % n).min(3);
        let mdp = make_mdp(MdpKind::UniqueAction, n, na, seed).unwrap();
        let counts = mdp.inducing_action_counts();
        assert!(counts.iter().all(|&c| c <= 1));
        let (pi, expert) = policy_pair(n, na, seed + 77);
        let r = kl_report(&mdp, &pi, &expert).unwrap();
        assert_eq!(r.idd, 0.0);
        assert!((r.kl_sa - r.kl_ss).abs() <= 1e-10);
    }
}

#[test]
fn multi_action_dynamics_admit_a_gap() {
    for seed in 0..10 {
        let mdp = make_mdp(MdpKind::MultiAction, 3, 2, seed).unwrap();
        assert!(mdp.inducing_action_counts().iter().any(|&c| c >= 2));
        let found = (0..100).any(|k| {
            let (pi, expert) = policy_pair(3, 2, seed * 1000 + k);
            kl_report(&mdp, &pi, &expert).unwrap().idd > 1e-6
        });
        assert!(found, "seed {seed}");
    }
}

#[test]
fn random_stochastic_rows_are_distributions() {
    let mdp = make_mdp(MdpKind::RandomStochastic, 7, 4, 5).unwrap();
    for s in 0..7 {
        for a in 0..4 {
            assert!((mdp.next_distribution(s, a).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn infeasible_shapes_are_rejected() {
    assert!(matches!(make_mdp(MdpKind::UniqueAction, 2, 3, 0), Err(TabularError::InfeasibleShape(_))));
    assert!(matches!(make_mdp(MdpKind::MultiAction, 3, 1, 0), Err(TabularError::InfeasibleShape(_))));
    assert!("bogus".parse::<MdpKind>().is_err());
}

#[test]
fn support_violation_is_reported() {
    let mdp = make_mdp(MdpKind::RandomStochastic, 3, 2, 0).unwrap();
    let learner = TabularPolicy::uniform(3, 2);
    let expert = TabularPolicy::new(3, 2, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
    assert!(matches!(
        kl_report(&mdp, &learner, &expert),
        Err(TabularError::SupportViolation { .. })
    ));
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(FiniteMdp::new(1, 1, vec![0.9], 0.9, vec![1.0]).is_err());
    assert!(FiniteMdp::new(1, 1, vec![1.0], 1.0, vec![1.0]).is_err());
    assert!(FiniteMdp::new(1, 1, vec![1.0], 0.9, vec![0.5]).is_err());
    assert!(TabularPolicy::new(1, 2, vec![0.7, 0.7]).is_err());
    let mdp = self_loop(0.9);
    assert!(exact_occupancies(&mdp, &TabularPolicy::uniform(2, 1)).is_err());
}

#[test]
fn text_format_round_trip() {
    for kind in [MdpKind::UniqueAction, MdpKind::MultiAction, MdpKind::RandomStochastic] {
        let mdp = make_mdp(kind, 5, 2, 9).unwrap();
        let text = write_mdp(&mdp);
        assert_eq!(parse_mdp(&text).unwrap(), mdp);
    }
    let parsed = parse_mdp("# loop\nmdp 1 1 0.5\n0 0 0 1.0\nrho0 1\n").unwrap();
    assert_eq!(parsed.gamma(), 0.5);
    assert!(matches!(parse_mdp("0 0 0 1\n"), Err(TabularError::Parse { line: 1, .. })));
    assert!(parse_mdp("mdp 1 1 0.5\n0 0 3 1.0\nrho0 1\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nonnegativity_and_identity(seed in any::<u64>(), n in 2usize..7, na in 1usize..4) {
        let mdp = make_mdp(MdpKind::RandomStochastic, n, na, seed).unwrap();
        let (pi, expert) = policy_pair(n, na, seed ^ 0x5eed);
        let r = kl_report(&mdp, &pi, &expert).unwrap();
        prop_assert!(r.kl_sa >= r.kl_ss - 1e-12);
        prop_assert!(r.idd >= -1e-12);
        prop_assert!(r.residual.abs() <= 1e-10);
    }

    #[test]
    fn occupancy_mass_and_support_floor(seed in any::<u64>(), n in 1usize..8, na in 1usize..5) {
        let mdp = make_mdp(MdpKind::RandomStochastic, n, na, seed).unwrap();
        let (pi, _) = policy_pair(n, na, seed);
        prop_assert!(pi.min_prob() >= SUPPORT_FLOOR * (1.0 - 1e-9));
        for s in 0..n {
            prop_assert!((pi.row(s).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let occ = exact_occupancies(&mdp, &pi).unwrap();
        prop_assert!(occ.rho_sa.iter().all(|&x| x >= 0.0));
        prop_assert!((occ.total_mass() - 1.0 / (1.0 - mdp.gamma())).abs() <= 1e-9);
    }
}

#[test]
fn verification_suite_passes_and_is_seeded() {
    let a = verify_suite(50, 20, 10, 0).unwrap();
    assert_eq!((a.decomposition_mdps, a.unique_action_pairs), (50, 200));
    assert!(a.passes(1e-10), "{}", a.summary());
    assert_eq!(verify_suite(50, 20, 10, 0).unwrap(), a);
}
