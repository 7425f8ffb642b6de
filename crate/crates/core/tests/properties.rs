//! Randomized properties: serialization round-trips, parser robustness,
//! exact conservation identities, intensity sign structure, balance-analysis
//! scale invariance, and simulator determinism.

use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

use crn_multiscale::network::{Network, Reaction, Species, State};
use crn_multiscale::parse::{
    format_network, format_scaling, parse_network, parse_scaling,
};
use crn_multiscale::rng::RngStream;
use crn_multiscale::scaling::{species_timescale, theta_timescale, ScalingSpec};
use crn_multiscale::sim::{simulate_ssa, SsaOptions};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Rate constants that survive text round-trips and keep test paths short.
fn rate_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![
        (1u32..1000).prop_map(|n| n as f64 / 100.0),
        (1u32..100).prop_map(|n| n as f64 * 0.25),
        Just(1.0),
        Just(8.3e-2),
    ]
}

fn reaction_strategy(n_species: usize) -> impl Strategy<Value = Reaction> {
    (
        proptest::collection::vec(0u32..=2, n_species),
        proptest::collection::vec(0u32..=2, n_species),
        rate_strategy(),
    )
        .prop_filter("null reaction", |(nu, nu_prime, _)| nu != nu_prime)
        .prop_map(|(nu, nu_prime, rate)| Reaction::new(nu, nu_prime, rate))
}

prop_compose! {
    fn network_strategy()(n_species in 1usize..=4)(
        reactions in proptest::collection::vec(reaction_strategy(n_species), 1..=6),
        n_species in Just(n_species),
    ) -> Network {
        let species = (0..n_species)
            .map(|i| Species { index: i, name: format!("S{i}") })
            .collect();
        Network::new(species, reactions, 1.0)
    }
}

fn small_nonneg_rational() -> impl Strategy<Value = BigRational> {
    (0i64..=4, 1i64..=3).prop_map(|(n, d)| rat(n, d))
}

fn small_rational() -> impl Strategy<Value = BigRational> {
    (-4i64..=4, 1i64..=3).prop_map(|(n, d)| rat(n, d))
}

fn scaling_strategy(network: &Network) -> impl Strategy<Value = ScalingSpec> {
    let network = network.clone();
    (
        proptest::collection::vec(small_nonneg_rational(), network.n_species()),
        proptest::collection::vec(small_rational(), network.n_reactions()),
        2u32..=1000,
    )
        .prop_map(move |(alpha, beta, n0)| {
            ScalingSpec::new(&network, n0 as f64, alpha, beta)
        })
}

proptest! {
    /// parse(format(network)) reproduces the network exactly: species order,
    /// reaction order, stoichiometry, and bit-identical rates.
    #[test]
    fn network_round_trip(network in network_strategy()) {
        let text = format_network(&network);
        let outcome = parse_network(&text);
        prop_assert!(!outcome.has_errors(), "{:?}", outcome.diagnostics);
        prop_assert_eq!(outcome.value.unwrap(), network);
    }

    /// parse(format(spec)) reproduces the scaling spec exactly, including the
    /// derived normalized rates and reaction exponents.
    #[test]
    fn scaling_round_trip(
        (network, spec) in network_strategy()
            .prop_flat_map(|n| { let s = scaling_strategy(&n); (Just(n), s) })
    ) {
        let text = format_scaling(&spec, &network);
        let outcome = parse_scaling(&text, &network);
        prop_assert!(!outcome.has_errors(), "{:?}", outcome.diagnostics);
        prop_assert_eq!(outcome.value.unwrap(), spec);
    }

    /// The network parser never panics and always ties failure to at least
    /// one located error diagnostic.
    #[test]
    fn parser_never_panics(text in ".*") {
        let outcome = parse_network(&text);
        if outcome.value.is_none() {
            prop_assert!(outcome.has_errors());
        }
    }

    /// The scaling parser never panics on arbitrary input.
    #[test]
    fn scaling_parser_never_panics(text in ".*", network in network_strategy()) {
        let _ = parse_scaling(&text, &network);
    }

    /// Every extracted conservation law annihilates every stoichiometric
    /// change vector exactly, and the mass-action drift numerically.
    #[test]
    fn conservation_laws_are_exact(
        network in network_strategy(),
        z in proptest::collection::vec(0.0f64..10.0, 4),
    ) {
        let laws = network.conservation_laws();
        let kappa: Vec<f64> = network.reactions.iter().map(|r| r.rate_const).collect();
        let rhs = network.classical_ode_rhs(&kappa, &z[..network.n_species()]);
        for law in &laws {
            for zeta in network.zetas() {
                let dot: BigRational = law
                    .theta
                    .iter()
                    .zip(&zeta)
                    .map(|(t, &c)| t * BigRational::from_integer(c.into()))
                    .sum();
                prop_assert!(dot.is_zero());
            }
            let drift: f64 = law
                .theta
                .iter()
                .zip(&rhs)
                .map(|(t, &d)| crn_multiscale::rational::rat_to_f64(t) * d)
                .sum();
            let scale: f64 = rhs.iter().map(|d| d.abs()).sum::<f64>().max(1.0);
            prop_assert!(drift.abs() <= 1e-12 * scale);
        }
    }

    /// Intensities are nonnegative everywhere and vanish exactly when some
    /// species count is below the consumed amount (sweep over small states).
    #[test]
    fn intensity_sign_structure(network in network_strategy()) {
        let n = network.n_species();
        let mut counts = vec![0i64; n];
        loop {
            let state = State::new(counts.clone());
            for (k, reaction) in network.reactions.iter().enumerate() {
                let lambda = network.intensity(k, &state);
                prop_assert!(lambda >= 0.0);
                let starved =
                    reaction.nu.iter().zip(&counts).any(|(&nu, &x)| x < i64::from(nu));
                if starved {
                    prop_assert_eq!(lambda, 0.0);
                } else if reaction.order() > 0 {
                    prop_assert!(lambda > 0.0 || counts.iter().all(|&x| x == 0));
                }
            }
            // Odometer over {0, 1, 2, 3}^n.
            let mut i = 0;
            while i < n && counts[i] == 3 {
                counts[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            counts[i] += 1;
        }
    }

    /// Applying a reaction and then its formal reverse restores the state.
    #[test]
    fn apply_then_reverse_restores(
        network in network_strategy(),
        start in proptest::collection::vec(2i64..=6, 4),
    ) {
        let n = network.n_species();
        let state = State::new(start[..n].to_vec());
        for reaction in &network.reactions {
            let net = Network::new(
                network.species.clone(),
                vec![
                    reaction.clone(),
                    Reaction::new(reaction.nu_prime.clone(), reaction.nu.clone(), 1.0),
                ],
                1.0,
            );
            if let Ok(mid) = net.apply_reaction(&state, 0) {
                let back = net.apply_reaction(&mid, 1).unwrap();
                prop_assert_eq!(back, state.clone());
            }
        }
    }

    /// The collective time scale is invariant under positive rescaling of
    /// theta, and reduces to the species time scale on unit vectors.
    #[test]
    fn timescale_scale_invariance(
        (network, spec) in network_strategy()
            .prop_flat_map(|n| { let s = scaling_strategy(&n); (Just(n), s) }),
        c in (1i64..=7, 1i64..=5),
    ) {
        let n = network.n_species();
        for i in 0..n {
            let mut theta = vec![BigRational::zero(); n];
            theta[i] = rat(1, 1);
            let g1 = theta_timescale(&network, &spec, &theta);
            for t in theta.iter_mut() {
                *t *= rat(c.0, c.1);
            }
            prop_assert_eq!(theta_timescale(&network, &spec, &theta), g1.clone());
            if let Ok(gi) = species_timescale(&network, &spec, i) {
                prop_assert_eq!(g1, crn_multiscale::rational::Ext::Finite(gi));
            }
        }
    }

    /// An SSA path is a pure function of (network, x0, seed, stream).
    #[test]
    fn ssa_is_deterministic(
        network in network_strategy(),
        start in proptest::collection::vec(0i64..=5, 4),
        seed in any::<u64>(),
    ) {
        let x0 = State::new(start[..network.n_species()].to_vec());
        let run = |stream: u64| {
            let mut rng = RngStream::new(seed, stream);
            let opts = SsaOptions { event_cap: 10_000, ..SsaOptions::default() };
            simulate_ssa(&network, &x0, 0.1, &mut rng, &opts)
        };
        match (run(0), run(0)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.events, b.events);
                prop_assert_eq!(a.final_state, b.final_state);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "same stream must give the same outcome"),
        }
    }
}
