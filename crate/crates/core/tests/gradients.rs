mod support;

use nlpscope_core::suite::{get_problem, list_problems};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(x0: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| x0.iter().map(|&v| v + rng.random_range(-1.5..1.5)).collect())
        .collect()
}

#[test]
fn every_suite_gradient_matches_central_differences() {
    for summary in list_problems() {
        let p = get_problem::<f64>(&summary.name).unwrap();
        let mut worst: f64 = 0.0;
        for x in random_points(&p.x_init, 100, 7) {
            worst = worst.max(support::fd_gradient_deviation(p.objective.as_ref(), &x, 1e-6));
            for c in p.constraints() {
                worst = worst.max(support::fd_gradient_deviation(c.func.as_ref(), &x, 1e-6));
            }
        }
        assert!(worst < 1e-6, "{}: relative deviation {worst:e}", summary.name);
    }
}

#[test]
fn quadratic_objective_report() {
    let p = get_problem::<f64>("toy_equality").unwrap();
    for x in random_points(&p.x_init, 20, 1) {
        let r = p.check_gradients(&x, 1e-5).unwrap();
        assert!(r.objective < 1e-8, "{}", r.objective);
        // The constraint is linear, so differences are exact up to rounding.
        assert!(r.equalities[0] < 1e-10);
    }
}

#[test]
fn waypoint_report_at_random_points() {
    for name in ["waypoint_T20", "waypoint_T20_attach", "waypoint_T20_d3"] {
        let p = get_problem::<f64>(name).unwrap();
        for x in random_points(&p.x_init, 10, 3) {
            let r = p.check_gradients(&x, 1e-6).unwrap();
            assert!(r.max_deviation() < 1e-6, "{name}: {r:?}");
        }
    }
}

#[test]
fn evaluation_is_pure() {
    let p = get_problem::<f64>("waypoint_T20").unwrap();
    let x = &random_points(&p.x_init, 1, 9)[0];
    let a = p.eval_constraints(x).unwrap();
    let b = p.eval_constraints(x).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert_eq!(p.eval_objective(x).unwrap().0.to_bits(), p.eval_objective(x).unwrap().0.to_bits());
}
