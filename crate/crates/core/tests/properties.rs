use ndarray::Array2;
use num_bigint::BigInt;
use proptest::prelude::*;

use frustra_core::container::Container;
use frustra_core::counting::{
    classify_regime, closed_form_exact, reconstruct_from_slack, solution_count_sequence,
    verify_dominated_sequence, Domination, Regime,
};
use frustra_core::linalg::{self, C64};
use frustra_core::mps::{two_site_imaginary_gate, MpsState, UNBOUNDED_CHI};
use frustra_core::{propagate_solutions, ChainSpec, Field, ProjectorChain, SolverOptions};

fn pair() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=8).prop_flat_map(|d| (Just(d), 1..=d * d))
}

fn field() -> impl Strategy<Value = Field> {
    prop_oneof![Just(Field::Real), Just(Field::Complex)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn recursion_equals_exact_closed_form((d, r) in pair(), n in 0usize..40) {
        let seq = solution_count_sequence(d, r, n).unwrap();
        prop_assert_eq!(&seq[n], &closed_form_exact(d, r, n).unwrap());
    }

    #[test]
    fn counts_stay_positive_exactly_when_unfrustrated((d, r) in pair()) {
        let seq = solution_count_sequence(d, r, 60).unwrap();
        let positive = seq.iter().all(|v| *v > BigInt::from(0));
        prop_assert_eq!(positive, classify_regime(d, r).unwrap() != Regime::Frustrated);
    }

    #[test]
    fn slack_reconstructs_admissible_sequences(
        (d, r) in pair(),
        raw in proptest::collection::vec(0u32..4, 1..12),
    ) {
        prop_assume!(4 * r <= d * d);
        // Build an admissible sequence by subtracting small slacks greedily.
        let mut s = vec![BigInt::from(1)];
        for (n, &u) in raw.iter().enumerate() {
            let n = n + 1;
            let bound = if n == 1 { BigInt::from(d) } else { BigInt::from(d) * &s[n - 1] - BigInt::from(r) * &s[n - 2] };
            if bound < BigInt::from(0) {
                break;
            }
            s.push((&bound - BigInt::from(u)).max(BigInt::from(0)));
        }
        match verify_dominated_sequence(&s, d, r).unwrap() {
            Domination::Admissible { slack, dominated } => {
                prop_assert!(dominated);
                prop_assert!(slack.iter().all(|u| *u >= BigInt::from(0)));
                prop_assert_eq!(reconstruct_from_slack(&slack, d, r).unwrap(), s);
            }
            Domination::Violated { index } => prop_assert!(false, "violated at {}", index),
        }
    }

    #[test]
    fn sampled_projectors_are_orthogonal_projectors(
        (d, r) in (2usize..=5).prop_flat_map(|d| (Just(d), 1..=d * d)),
        seed in any::<u64>(),
        f in field(),
    ) {
        let chain = ProjectorChain::random(ChainSpec::new(3, d, r, seed).unwrap(), f).unwrap();
        for b in &chain.bonds {
            prop_assert!(b.orthonormality_error() < 1e-12);
            let p = b.projector_matrix();
            prop_assert!(linalg::max_abs_diff(p.dot(&p).view(), p.view()) < 1e-12);
            prop_assert!(linalg::max_abs_diff(p.view(), linalg::adjoint(p.view()).view()) < 1e-14);
            let trace: C64 = p.diag().sum();
            prop_assert!((trace.re - r as f64).abs() < 1e-12 && trace.im.abs() < 1e-12);
            if f == Field::Real {
                prop_assert!(b.vectors.iter().all(|z| z.im == 0.0));
            }
        }
    }

    #[test]
    fn gate_inverts_on_the_excited_space(
        (d, r) in (2usize..=4).prop_flat_map(|d| (Just(d), 1..=d * d)),
        seed in any::<u64>(),
        tau in 0.0f64..5.0,
    ) {
        let chain = ProjectorChain::random(ChainSpec::new(2, d, r, seed).unwrap(), Field::Complex).unwrap();
        let p = chain.bonds[0].projector_matrix();
        let g = two_site_imaginary_gate(&chain.bonds[0], tau);
        let expect = Array2::<C64>::eye(d * d) + &p.mapv(|z| z * (tau.exp() - 1.0));
        let inverse = g.dot(&expect);
        prop_assert!(linalg::max_abs_diff(inverse.view(), Array2::<C64>::eye(d * d).view()) < 1e-10 * tau.exp());
    }

    #[test]
    fn chain_container_round_trip_is_bit_exact(
        (d, r) in (2usize..=4).prop_flat_map(|d| (Just(d), 1..=d * d)),
        n in 2usize..6,
        seed in any::<u64>(),
        f in field(),
    ) {
        let chain = ProjectorChain::random(ChainSpec::new(n, d, r, seed).unwrap(), f).unwrap();
        let c = Container::from_chain(&chain);
        let from_bin = Container::from_binary(&c.to_binary().unwrap()).unwrap();
        let from_json = Container::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(&from_bin, &c);
        prop_assert_eq!(&from_json, &c);
        prop_assert_eq!(from_bin.to_chain().unwrap(), chain);
    }

    #[test]
    fn propagation_saturates_the_recursion_generically(
        (d, r) in (2usize..=3).prop_flat_map(|d| (Just(d), 1..=d * d)),
        n in 2usize..6,
        seed in any::<u64>(),
    ) {
        let chain = ProjectorChain::random(ChainSpec::new(n, d, r, seed).unwrap(), Field::Complex).unwrap();
        let stack = propagate_solutions(&chain, SolverOptions::default()).unwrap();
        let counts = solution_count_sequence(d, r, n).unwrap();
        let mut frustrated = false;
        for (s, dn) in stack.s_sequence.iter().zip(&counts) {
            frustrated |= *dn <= BigInt::from(0);
            let expected = if frustrated { BigInt::from(0) } else { dn.clone() };
            prop_assert_eq!(BigInt::from(*s), expected);
        }
    }

    #[test]
    fn vidal_invariants_hold_after_gates(
        seed in any::<u64>(),
        chi in 1usize..6,
        bonds in proptest::collection::vec(0usize..5, 1..12),
        tau in 0.0f64..2.0,
    ) {
        let spec = ChainSpec::new(6, 2, 2, seed).unwrap();
        let chain = ProjectorChain::random(spec, Field::Complex).unwrap();
        let mut state = MpsState::from_product(&vec![ndarray::Array1::from(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]); 6], chi);
        for &k in &bonds {
            let gate = two_site_imaginary_gate(&chain.bonds[k], tau);
            let w = state.apply_gate_and_truncate(k, gate.view(), chi);
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert!(state.weight_invariant_error() < 1e-10);
        }
        state.canonicalize();
        prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-8);
        let full = MpsState::from_dense(&state.to_dense(1 << 10).unwrap(), 2, 6, UNBOUNDED_CHI).unwrap();
        prop_assert!(full.max_bond_dim() <= chi);
    }
}
