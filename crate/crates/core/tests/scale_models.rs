mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use skewclust::scale::{count_scale_params, solve_scale, Constraint, ScaleModel, ScatterSet};

#[test]
fn parameter_counts_match_table_and_enumeration() {
    for model in ScaleModel::ALL {
        for g in 2..=4 {
            for p in 2..=6 {
                let count = count_scale_params(model, g, p);
                assert_eq!(count, table_one(model, g, p), "{model} g={g} p={p}");
                assert_eq!(count, ScaleParametrization::new(model, g, p).len(), "{model} g={g} p={p}");
            }
        }
    }
}

#[test]
fn printed_eve_count_differs_from_enumeration() {
    // printed: p(p+1)/2 - (G-1)(p-1) = 6 - 2 = 4 for G = 2, p = 3
    let printed = 6 - (2 - 1) * (3 - 1);
    assert_eq!(printed, 4);
    assert_eq!(count_scale_params(ScaleModel::EVE, 2, 3), 8);
}

#[test]
fn every_model_is_no_worse_than_a_generic_optimizer() {
    for model in ScaleModel::ALL {
        let gap = scale_oracle_suite(model, 6, 1000 + model as u64);
        assert!(gap <= 1e-5, "{model}: solver exceeds Nelder–Mead by {gap}");
    }
}

#[test]
fn vev_is_locally_optimal_under_perturbation() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let sizes = vec![20.0, 35.0];
    let scatters: Vec<DMatrix<f64>> = sizes.iter().map(|n| random_spd(3, &mut rng) * *n).collect();
    let set = ScatterSet::new(scatters.clone(), sizes.clone()).unwrap();
    let sol = solve_scale(ScaleModel::VEV, &set).unwrap();
    let param = ScaleParametrization::new(ScaleModel::VEV, 2, 3);
    let base = param.from_solution(&sol);
    let f = |t: &[f64]| scale_objective(&scatters, &sizes, &param.scales(t));
    let at_solution = f(&base);
    for _ in 0..100 {
        let x0: Vec<f64> = base.iter().map(|t| t + rng.random_range(-0.2..0.2)).collect();
        let (_, fx) = nelder_mead(f, &x0, 0.05, 20_000, 1e-14);
        assert!(at_solution <= fx + 1e-6, "{at_solution} vs {fx}");
    }
}

fn random_set(g: usize, p: usize, seed: u64) -> ScatterSet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sizes: Vec<f64> = (0..g).map(|_| rng.random_range(5.0..50.0)).collect();
    let scatters = sizes.iter().map(|n| random_spd(p, &mut rng) * *n).collect();
    ScatterSet::new(scatters, sizes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constraint_pattern_is_exact(seed in any::<u64>(), g in 1usize..4, p in 1usize..5) {
        let set = random_set(g, p, seed);
        for model in ScaleModel::ALL {
            let sol = solve_scale(model, &set).unwrap();
            for i in 0..g {
                let a = &sol.shapes[i];
                prop_assert!((a.iter().map(|x| x.ln()).sum::<f64>()).abs() < 1e-8, "{model}: |A| != 1");
                let rebuilt = &sol.orientations[i] * DMatrix::from_diagonal(a) * sol.orientations[i].transpose() * sol.volumes[i];
                prop_assert!((&rebuilt - &sol.scales[i]).amax() < 1e-10 * sol.scales[i].amax().max(1.0), "{model}: reconstruction");
                if model.volume() == Constraint::Equal {
                    prop_assert_eq!(sol.volumes[i], sol.volumes[0]);
                }
                match model.shape() {
                    Constraint::Equal => prop_assert_eq!(&sol.shapes[i], &sol.shapes[0]),
                    Constraint::Identity => prop_assert!(a.iter().all(|&x| x == 1.0)),
                    Constraint::Varying => {}
                }
                match model.orientation() {
                    Constraint::Equal => prop_assert_eq!(&sol.orientations[i], &sol.orientations[0]),
                    Constraint::Identity => prop_assert_eq!(&sol.orientations[i], &DMatrix::identity(p, p)),
                    Constraint::Varying => {}
                }
            }
        }
    }

    #[test]
    fn less_constrained_models_never_lose(seed in any::<u64>(), g in 1usize..4, p in 2usize..4) {
        let set = random_set(g, p, seed);
        let obj = |m| solve_scale(m, &set).unwrap().objective;
        let vvv = obj(ScaleModel::VVV);
        let eii = obj(ScaleModel::EII);
        for model in ScaleModel::ALL {
            let o = obj(model);
            prop_assert!(vvv <= o + 1e-8 * o.abs().max(1.0), "{model} beats VVV");
            prop_assert!(o <= eii + 1e-8 * eii.abs().max(1.0), "{model} loses to EII");
        }
    }
}
