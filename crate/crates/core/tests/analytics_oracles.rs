mod support;

use std::f64::consts::PI;

use nlpscope_core::analytics::{
    default_plane, isobands, path_evolution_projection, pca_basis, polygon_area, progression_remaining, project_to_plane,
    sample_grid, three_point_plane, FunctionKey, Window,
};
use nlpscope_core::model::{ClosureFn, Problem as GenericProblem};
use nlpscope_core::solver::{solve, SolverOptions};
use nlpscope_core::suite::get_problem;
use nlpscope_core::trace::{optimization_trajectory, StepIndex, Trajectory};
use nlpscope_core::{DualState, PlaneSpec, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖x − center‖²` on R^n.
fn radial(center: Vec<f64>) -> Problem {
    let n = center.len();
    let f = ClosureFn::new(move |x: &[f64], g: &mut [f64]| {
        let mut v = 0.0;
        for i in 0..n {
            let d = x[i] - center[i];
            g[i] = 2.0 * d;
            v += d * d;
        }
        v
    });
    GenericProblem::new("radial", vec![n], f.into_arc(), vec![], vec![0.0; n]).unwrap()
}

fn gaussian_cloud(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    // Anisotropic so the leading eigenvalues are well separated.
    (0..m)
        .map(|_| (0..n).map(|j| rng.random_range(-1.0..1.0) * (1.0 + 3.0 / (1.0 + j as f64))).collect())
        .collect()
}

#[test]
fn pca_projector_matches_dense_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (m, n) in [(40, 3), (200, 10), (120, 50), (12, 30)] {
        let pts = gaussian_cloud(&mut rng, m, n);
        for k in [1, 2] {
            let b = pca_basis(&pts, k).unwrap();
            let diff = support::projector(&b.components) - support::pca_projector_oracle(&pts, k);
            let err = support::sym_norm(&diff);
            assert!(err <= 1e-9, "m={m} n={n} k={k}: {err:e}");
        }
    }
}

fn real_trace() -> nlpscope_core::Trace {
    let p = get_problem::<f64>("waypoint_T20_attach").unwrap();
    solve(&p, &p.x_init, &SolverOptions { grow: 1.0, ..Default::default() }).unwrap().trace
}

#[test]
fn path_basis_matches_dense_eigensolver() {
    let p = get_problem::<f64>("waypoint_T20_d12").unwrap();
    let t = solve(&p, &p.x_init, &SolverOptions::default()).unwrap().trace;
    let set = path_evolution_projection(&t, None, None).unwrap();
    let s = optimization_trajectory(&t).unwrap();
    let pooled: Vec<Vec<f64>> = set
        .subsample
        .steps
        .iter()
        .flat_map(|&i| s.points[i].chunks(12).map(<[f64]>::to_vec).collect::<Vec<_>>())
        .collect();
    let diff = support::projector(&set.basis.components) - support::pca_projector_oracle(&pooled, 2);
    assert!(support::sym_norm(&diff) <= 1e-9);
}

#[test]
fn three_point_plane_through_real_steps() {
    let t = real_trace();
    let s = optimization_trajectory(&t).unwrap();
    assert!(s.len() > 600, "{}", s.len());
    let picks = [100, 600, s.len() - 1];
    let pts: Vec<&[f64]> = picks.iter().map(|&i| s.points[i].as_slice()).collect();
    let plane = three_point_plane(pts[0], pts[1], pts[2]).unwrap();
    let scale = pts.iter().map(|p| norm(p)).fold(0.0, f64::max);
    for p in pts {
        let c = project_to_plane(&plane, p);
        assert!(c.dist <= 1e-9 * scale, "{:e}", c.dist);
    }
}

#[test]
fn planar_trajectory_lies_in_default_plane() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 9;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < 2 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(b).for_each(|(a, b)| *a -= d * b);
        }
        let l = norm(&v);
        basis.push(v.into_iter().map(|a| a / l).collect());
    }
    let origin: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let points: Vec<Vec<f64>> = (0..60)
        .map(|i| {
            let a = i as f64 * 0.3;
            let (s, t) = (a.cos() * (1.0 + 0.1 * a), a.sin() * (2.0 - 0.02 * a));
            (0..n).map(|j| origin[j] + s * basis[0][j] + t * basis[1][j]).collect()
        })
        .collect();
    let scale = points.iter().map(|p| norm(p)).fold(0.0, f64::max);
    let traj = Trajectory {
        steps: (0..points.len()).map(|i| StepIndex { i, seq: i as u64 }).collect(),
        points,
    };
    for step in [0, 17, 58] {
        let plane = default_plane(&traj, step).unwrap();
        for p in &traj.points {
            assert!(project_to_plane(&plane, p).dist < 1e-9 * scale);
        }
    }
    let mid = traj.points.len() / 2;
    let plane = three_point_plane(&traj.points[0], &traj.points[mid], traj.points.last().unwrap()).unwrap();
    for p in &traj.points {
        assert!(project_to_plane(&plane, p).dist < 1e-9 * scale);
    }
}

#[test]
fn progression_of_a_real_run() {
    let s = optimization_trajectory(&real_trace()).unwrap();
    let p = progression_remaining(&s);
    let r: Vec<f64> = p.points.iter().map(|p| p.value).collect();
    assert_eq!(r[0], 1.0);
    assert_eq!(*r.last().unwrap(), 0.0);
    assert!(r.windows(2).all(|w| w[1] <= w[0]));
}

fn unit_plane(n: usize, half: f64) -> PlaneSpec {
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    u[0] = 1.0;
    v[1] = 1.0;
    PlaneSpec {
        origin: vec![0.0; n],
        u,
        v,
        window: Window { s_min: -half, s_max: half, t_min: -half, t_max: half },
    }
}

#[test]
fn annulus_band_areas() {
    let p = radial(vec![0.0, 0.0]);
    let field = sample_grid(&p, &unit_plane(2, 1.0), 256, 256, &[FunctionKey::Objective], &DualState::initial(0, 0)).unwrap();
    let radii = [0.2, 0.4, 0.6, 0.8];
    let levels: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let bands = isobands(&field.layout(), &field.fields[0].values, &levels).unwrap();
    for (b, band) in bands.bands.iter().enumerate() {
        let area: f64 = band.polygons.iter().map(|q| polygon_area(q).abs()).sum();
        let exact = PI * (radii[b + 1].powi(2) - radii[b].powi(2));
        assert!((area - exact).abs() <= 0.02 * exact, "band {b}: {area} vs {exact}");
    }
}

#[test]
fn radial_sampling_is_isometric() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 7;
    let origin: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    // Random orthonormal pair.
    let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let lu = norm(&u);
    u.iter_mut().for_each(|a| *a /= lu);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&u).for_each(|(a, b)| *a -= d * b);
    let lv = norm(&v);
    v.iter_mut().for_each(|a| *a /= lv);
    let plane = PlaneSpec {
        origin: origin.clone(),
        u,
        v,
        window: Window { s_min: -1.5, s_max: 2.0, t_min: -0.5, t_max: 1.0 },
    };
    let field = sample_grid(&radial(origin), &plane, 33, 41, &[FunctionKey::Objective], &DualState::initial(0, 0)).unwrap();
    let layout = field.layout();
    for r in 0..field.rows {
        for c in 0..field.cols {
            let (s, t) = layout.node(r, c);
            let got = field.fields[0].values[r * field.cols + c];
            assert!((got - (s * s + t * t)).abs() <= 1e-12, "({s},{t}): {got}");
        }
    }
}
