use ldslab::lds::{
    closed_form_observation, joint_nondegeneracy_gamma, random_lds, simulate_with_draws, substream, Dims, LdsParams,
    MixtureSpec, NoiseDraws, RandomSystemOptions,
};
use ldslab::moments::flatten_markov;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn dims_strategy() -> impl Strategy<Value = Dims> {
    (1usize..=3, 1usize..=3, 1usize..=3).prop_map(|(m, n, p)| Dims { m, n, p })
}

fn random_mixture(seed: u64, k: usize, dims: Dims) -> MixtureSpec {
    let mut rng = substream(seed, 0);
    let opts = RandomSystemOptions::default();
    MixtureSpec::uniform((0..k).map(|_| random_lds(&mut rng, dims, &opts)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_simulation_matches_closed_form(seed in any::<u64>(), dims in dims_strategy(), len in 1usize..25) {
        let mut rng = substream(seed, 1);
        let params = random_lds(&mut rng, dims, &RandomSystemOptions::default());
        let draws = NoiseDraws::sample(dims, len, 0.0, &mut rng);
        let traj = simulate_with_draws(&params, &draws, None).unwrap();
        for t in 0..len {
            let expected = closed_form_observation(&params, t, &draws).unwrap();
            prop_assert!((traj.y(t) - expected).amax() <= 1e-12);
        }
    }

    #[test]
    fn markov_matrix_blocks_are_markov_parameters(seed in any::<u64>(), dims in dims_strategy(), horizon in 0usize..8) {
        let params = random_lds(&mut substream(seed, 2), dims, &RandomSystemOptions::default());
        let g = params.markov_matrix(horizon);
        for j in 0..=horizon {
            prop_assert_eq!(g.columns(j * dims.p, dims.p).into_owned(), params.markov_parameter(j));
        }
    }

    #[test]
    fn gamma_is_permutation_invariant(seed in any::<u64>(), dims in dims_strategy(), s in 1usize..3) {
        let mix = random_mixture(seed, 3, dims);
        let gamma = joint_nondegeneracy_gamma(&mix, s);
        for perm in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
            let other = joint_nondegeneracy_gamma(&mix.permuted(&perm).unwrap(), s);
            prop_assert!((gamma - other).abs() <= 1e-12 * gamma.max(1.0));
        }
    }

    #[test]
    fn gamma_vanishes_for_duplicates(seed in any::<u64>(), dims in dims_strategy(), s in 1usize..3) {
        let base = random_mixture(seed, 2, dims);
        let dup = MixtureSpec::uniform(vec![
            base.components()[0].clone(),
            base.components()[1].clone(),
            base.components()[0].clone(),
        ]).unwrap();
        prop_assert_eq!(joint_nondegeneracy_gamma(&dup, s), 0.0);
    }

    #[test]
    fn gamma_bounds_every_unit_combination(seed in any::<u64>(), dims in dims_strategy(), s in 1usize..3, k in 1usize..4) {
        let mix = random_mixture(seed, k, dims);
        let gamma = joint_nondegeneracy_gamma(&mix, s);
        let flats: Vec<DVector<f64>> = mix
            .components()
            .iter()
            .map(|c| flatten_markov(&c.markov_matrix(2 * s), dims.p).unwrap())
            .collect();
        let mut rng = substream(seed, 3);
        for _ in 0..20 {
            let c = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let c = &c / c.norm();
            let combo = flats.iter().zip(c.iter()).fold(DVector::zeros(flats[0].len()), |acc, (f, ci)| acc + f * *ci);
            prop_assert!(combo.norm() >= gamma - 1e-10);
        }
    }

    #[test]
    fn observability_prefix(seed in any::<u64>(), dims in dims_strategy(), s in 1usize..4) {
        let params = random_lds(&mut substream(seed, 4), dims, &RandomSystemOptions::default());
        let long = params.observability_matrix(2 * s);
        prop_assert_eq!(long.rows(0, s * dims.m).into_owned(), params.observability_matrix(s));
    }

    #[test]
    fn markov_matrix_is_similarity_invariant(seed in any::<u64>(), dims in dims_strategy()) {
        let mut rng = substream(seed, 5);
        let params = random_lds(&mut rng, dims, &RandomSystemOptions::default());
        let mut t = nalgebra::DMatrix::from_fn(dims.n, dims.n, |_, _| rng.random::<f64>() - 0.5);
        t += nalgebra::DMatrix::identity(dims.n, dims.n) * 2.0;
        let moved: LdsParams = params.transformed(&t).unwrap();
        let diff = (moved.markov_matrix(6) - params.markov_matrix(6)).amax();
        prop_assert!(diff <= 1e-10);
    }
}
