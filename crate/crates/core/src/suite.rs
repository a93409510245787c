//! Benchmark problems: analytic toys with known optima and synthetic
//! waypoint-path problems with the time structure of motion planning NLPs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClosureFn, ConstraintKind, ConstraintSpec, ModelError, Problem, ProblemMeta};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuiteError {
    #[error("unknown problem `{0}`")]
    NotFound(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("trace header does not match problem `{0}`")]
    HeaderMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Scene description for [`make_waypoint_path`]. Serialized as a flat TOML
/// document (`format_version = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSceneSpec {
    pub format_version: u32,
    #[serde(rename = "T")]
    pub t_count: usize,
    pub d: usize,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_index: Option<usize>,
    #[serde(default = "default_smoothness")]
    pub smoothness_order: u8,
}

fn default_smoothness() -> u8 {
    1
}

pub const SCENE_FORMAT_VERSION: u32 = 1;

impl WaypointSceneSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SuiteError> {
        let spec: Self = toml::from_str(text).map_err(|e| SuiteError::InvalidScene(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scene specs always serialize")
    }

    pub fn validate(&self) -> Result<(), SuiteError> {
        let bad = |m: String| Err(SuiteError::InvalidScene(m));
        if self.format_version != SCENE_FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        if self.t_count < 3 {
            return bad(format!("T must be at least 3, got {}", self.t_count));
        }
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.start.len() != self.d || self.goal.len() != self.d {
            return bad("start and goal must have d components".into());
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if o.center.len() != self.d {
                return bad(format!("obstacle {k} center must have d components"));
            }
            if !(o.radius > 0.0) {
                return bad(format!("obstacle {k} radius must be positive"));
            }
        }
        if let Some(e) = self.event_index {
            if e == 0 || e + 1 >= self.t_count {
                return bad(format!("event_index must lie in (0, T-1), got {e}"));
            }
        }
        if !matches!(self.smoothness_order, 1 | 2) {
            return bad(format!("smoothness_order must be 1 or 2, got {}", self.smoothness_order));
        }
        if self.start.iter().chain(&self.goal).any(|v| !v.is_finite()) {
            return bad("non-finite endpoint".into());
        }
        Ok(())
    }
}

fn sq_norm_problem<S: Scalar>() -> ClosureFn<S> {
    ClosureFn::new(|x: &[S], g: &mut [S]| {
        for (gi, &xi) in g.iter_mut().zip(x) {
            *gi = xi + xi;
        }
        x.iter().map(|&v| v * v).sum()
    })
    .with_hessian(|_, w, h| h.add_diagonal(S::lit(2.0) * w))
}

/// `min ‖x‖²  s.t.  x₁ + x₂ − 1 = 0`, optimum (0.5, 0.5).
pub fn make_toy_equality<S: Scalar>() -> Problem<S> {
    let h = ClosureFn::new(|x: &[S], g: &mut [S]| {
        g[0] = S::one();
        g[1] = S::one();
        x[0] + x[1] - S::one()
    })
    .with_hessian(|_, _, _| {});
    Problem::new(
        "toy_equality",
        vec![2],
        sq_norm_problem().into_arc(),
        vec![ConstraintSpec::new("sum", "sum/0", ConstraintKind::Equality, vec![0], h.into_arc())],
        vec![S::zero(); 2],
    )
    .expect("static problem")
}

/// `min (x − 2)²  s.t.  x − 1 ≤ 0`, optimum x = 1 with multiplier 2.
pub fn make_toy_inequality<S: Scalar>() -> Problem<S> {
    let two = S::lit(2.0);
    let f = ClosureFn::new(move |x: &[S], g: &mut [S]| {
        g[0] = two * (x[0] - two);
        (x[0] - two) * (x[0] - two)
    })
    .with_hessian(move |_, w, h| h[(0, 0)] = h[(0, 0)] + two * w);
    let c = ClosureFn::new(|x: &[S], g: &mut [S]| {
        g[0] = S::one();
        x[0] - S::one()
    })
    .with_hessian(|_, _, _| {});
    Problem::new(
        "toy_inequality",
        vec![1],
        f.into_arc(),
        vec![ConstraintSpec::new("bound", "bound/0", ConstraintKind::Inequality, vec![0], c.into_arc())],
        vec![S::zero()],
    )
    .expect("static problem")
}

/// Rosenbrock restricted to the closed unit disk.
pub fn make_disk_rosenbrock<S: Scalar>() -> Problem<S> {
    let f = ClosureFn::new(|x: &[S], g: &mut [S]| {
        let (a, b) = (x[0], x[1]);
        let r = b - a * a;
        let hundred = S::lit(100.0);
        let two = S::lit(2.0);
        g[0] = -S::lit(400.0) * a * r - two * (S::one() - a);
        g[1] = S::lit(200.0) * r;
        hundred * r * r + (S::one() - a) * (S::one() - a)
    })
    .with_hessian(|x: &[S], w, h| {
        let (a, b) = (x[0], x[1]);
        h[(0, 0)] = h[(0, 0)] + w * (S::lit(1200.0) * a * a - S::lit(400.0) * b + S::lit(2.0));
        let off = w * (-S::lit(400.0) * a);
        h[(0, 1)] = h[(0, 1)] + off;
        h[(1, 0)] = h[(1, 0)] + off;
        h[(1, 1)] = h[(1, 1)] + w * S::lit(200.0);
    });
    let disk = ClosureFn::new(|x: &[S], g: &mut [S]| {
        g[0] = x[0] + x[0];
        g[1] = x[1] + x[1];
        x[0] * x[0] + x[1] * x[1] - S::one()
    })
    .with_hessian(|_, w, h| h.add_diagonal(S::lit(2.0) * w));
    Problem::new(
        "disk_rosenbrock",
        vec![2],
        f.into_arc(),
        vec![ConstraintSpec::new("disk", "disk/0", ConstraintKind::Inequality, vec![0], disk.into_arc())],
        vec![S::zero(); 2],
    )
    .expect("static problem")
}

/// Coefficients of the finite-difference stencil used by the smoothness
/// objective, anchored at the first configuration it touches.
fn stencil(order: u8) -> &'static [f64] {
    match order {
        1 => &[-1.0, 1.0],
        _ => &[1.0, -2.0, 1.0],
    }
}

/// Time-discretized path through `T` waypoints of dimension `d`.
///
/// Decision vector is `c_0 … c_{T-1}` concatenated. Objective is the sum of
/// squared first (or second) differences. Equalities pin both endpoints
/// (group `endpoint`); each obstacle contributes `r² − ‖c_t − p‖² ≤ 0` for
/// every waypoint (group `obstacle_k`). With `event_index = e` the group
/// `attach` forces `c_{e+1} − c_e` to match the velocity of a target that
/// moves uniformly from start to goal.
pub fn make_waypoint_path<S: Scalar>(spec: &WaypointSceneSpec) -> Result<Problem<S>, SuiteError> {
    spec.validate()?;
    let t_count = spec.t_count;
    let d = spec.d;
    let n = t_count * d;
    let coeffs: Vec<S> = stencil(spec.smoothness_order).iter().map(|&c| S::lit(c)).collect();
    let width = coeffs.len();

    let objective = {
        let coeffs = coeffs.clone();
        let coeffs_h = coeffs.clone();
        ClosureFn::new(move |x: &[S], grad: &mut [S]| {
            grad.iter_mut().for_each(|v| *v = S::zero());
            let mut total = S::zero();
            for t in 0..=(t_count - width) {
                for k in 0..d {
                    let r = coeffs
                        .iter()
                        .enumerate()
                        .fold(S::zero(), |acc, (j, &c)| acc + c * x[(t + j) * d + k]);
                    total = total + r * r;
                    for (j, &c) in coeffs.iter().enumerate() {
                        grad[(t + j) * d + k] = grad[(t + j) * d + k] + S::lit(2.0) * c * r;
                    }
                }
            }
            total
        })
        .with_hessian(move |_, w, h| {
            for t in 0..=(t_count - width) {
                for k in 0..d {
                    for (a, &ca) in coeffs_h.iter().enumerate() {
                        for (b, &cb) in coeffs_h.iter().enumerate() {
                            let (i, j) = ((t + a) * d + k, (t + b) * d + k);
                            h[(i, j)] = h[(i, j)] + S::lit(2.0) * w * ca * cb;
                        }
                    }
                }
            }
        })
    };

    let mut constraints = Vec::new();
    let linear_component = |index: usize, target: f64| {
        let target = S::lit(target);
        ClosureFn::new(move |x: &[S], g: &mut [S]| {
            g.iter_mut().for_each(|v| *v = S::zero());
            g[index] = S::one();
            x[index] - target
        })
        .with_hessian(|_, _, _| {})
        .into_arc()
    };
    for k in 0..d {
        constraints.push(ConstraintSpec::new(
            "endpoint",
            format!("endpoint/start/{k}"),
            ConstraintKind::Equality,
            vec![0],
            linear_component(k, spec.start[k]),
        ));
    }
    for k in 0..d {
        constraints.push(ConstraintSpec::new(
            "endpoint",
            format!("endpoint/goal/{k}"),
            ConstraintKind::Equality,
            vec![t_count - 1],
            linear_component((t_count - 1) * d + k, spec.goal[k]),
        ));
    }

    if let Some(e) = spec.event_index {
        let steps = S::lit((t_count - 1) as f64);
        for k in 0..d {
            let velocity = (S::lit(spec.goal[k]) - S::lit(spec.start[k])) / steps;
            let (i0, i1) = (e * d + k, (e + 1) * d + k);
            let f = ClosureFn::new(move |x: &[S], g: &mut [S]| {
                g.iter_mut().for_each(|v| *v = S::zero());
                g[i1] = S::one();
                g[i0] = -S::one();
                x[i1] - x[i0] - velocity
            })
            .with_hessian(|_, _, _| {});
            constraints.push(ConstraintSpec::new(
                "attach",
                format!("attach/{k}"),
                ConstraintKind::Equality,
                vec![e, e + 1],
                f.into_arc(),
            ));
        }
    }

    for (ob, obstacle) in spec.obstacles.iter().enumerate() {
        let center: Vec<S> = obstacle.center.iter().map(|&c| S::lit(c)).collect();
        let r2 = S::lit(obstacle.radius * obstacle.radius);
        for t in 0..t_count {
            let center = center.clone();
            let base = t * d;
            let f = ClosureFn::new(move |x: &[S], g: &mut [S]| {
                g.iter_mut().for_each(|v| *v = S::zero());
                let mut dist2 = S::zero();
                for k in 0..d {
                    let diff = x[base + k] - center[k];
                    dist2 = dist2 + diff * diff;
                    g[base + k] = -(diff + diff);
                }
                r2 - dist2
            })
            .with_hessian(move |_, w, h| {
                for k in 0..d {
                    h[(base + k, base + k)] = h[(base + k, base + k)] - S::lit(2.0) * w;
                }
            });
            constraints.push(ConstraintSpec::new(
                format!("obstacle_{ob}"),
                format!("obstacle_{ob}/t{t}"),
                ConstraintKind::Inequality,
                vec![t],
                f.into_arc(),
            ));
        }
    }

    let x_init: Vec<S> = (0..t_count)
        .flat_map(|t| {
            let frac = t as f64 / (t_count - 1) as f64;
            (0..d).map(move |k| (t, k, frac))
        })
        .map(|(_, k, frac)| S::lit(spec.start[k] + frac * (spec.goal[k] - spec.start[k])))
        .collect();
    debug_assert_eq!(x_init.len(), n);

    let mut p = Problem::new(
        format!("waypoint_T{t_count}_d{d}"),
        vec![d; t_count],
        objective.into_arc(),
        constraints,
        x_init,
    )?;
    p.scene = Some(spec.clone());
    Ok(p)
}

/// Default blocking-obstacle scene: `T` waypoints from the origin to
/// `(2, 0, ..)`, around one sphere of radius 0.4 sitting slightly off the
/// straight line.
pub fn blocking_scene(t_count: usize, d: usize) -> WaypointSceneSpec {
    let mut goal = vec![0.0; d];
    goal[0] = 2.0;
    let mut center = vec![0.0; d];
    center[0] = 1.0;
    if d > 1 {
        center[1] = 0.1;
    }
    if d > 2 {
        center[2] = 0.06;
    }
    WaypointSceneSpec {
        format_version: SCENE_FORMAT_VERSION,
        t_count,
        d,
        start: vec![0.0; d],
        goal,
        obstacles: vec![Obstacle { center, radius: 0.4 }],
        event_index: None,
        smoothness_order: 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProblemSummary {
    pub name: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_count: usize,
    pub equalities: usize,
    pub inequalities: usize,
}

const REGISTRY: &[&str] = &[
    "toy_equality",
    "toy_inequality",
    "disk_rosenbrock",
    "waypoint_T3_free",
    "waypoint_T20",
    "waypoint_T20_attach",
    "waypoint_T20_d3",
    "waypoint_T20_d12",
];

fn named<S: Scalar>(name: &str, spec: WaypointSceneSpec) -> Problem<S> {
    let mut p = make_waypoint_path(&spec).expect("registry scenes are valid");
    p.name = name.to_string();
    p
}

pub fn get_problem<S: Scalar>(name: &str) -> Result<Problem<S>, SuiteError> {
    Ok(match name {
        "toy_equality" => make_toy_equality(),
        "toy_inequality" => make_toy_inequality(),
        "disk_rosenbrock" => make_disk_rosenbrock(),
        "waypoint_T3_free" => named(
            name,
            WaypointSceneSpec {
                format_version: SCENE_FORMAT_VERSION,
                t_count: 3,
                d: 2,
                start: vec![0.0, 0.0],
                goal: vec![2.0, 0.0],
                obstacles: vec![],
                event_index: None,
                smoothness_order: 1,
            },
        ),
        "waypoint_T20" => named(name, blocking_scene(20, 2)),
        "waypoint_T20_attach" => {
            let mut s = blocking_scene(20, 2);
            s.event_index = Some(12);
            named(name, s)
        }
        "waypoint_T20_d3" => named(name, blocking_scene(20, 3)),
        "waypoint_T20_d12" => named(name, blocking_scene(20, 12)),
        _ => return Err(SuiteError::NotFound(name.to_string())),
    })
}

pub fn list_problems() -> Vec<ProblemSummary> {
    REGISTRY
        .iter()
        .map(|name| {
            let p = get_problem::<f64>(name).expect("registered");
            ProblemSummary {
                name: p.name.clone(),
                n: p.n(),
                t_count: p.t_count(),
                equalities: p.equalities.len(),
                inequalities: p.inequalities.len(),
            }
        })
        .collect()
}

/// Re-instantiates the problem a trace header describes, from its scene
/// when present and from the registry otherwise.
pub fn problem_from_meta<S: Scalar>(meta: &ProblemMeta) -> Result<Problem<S>, SuiteError> {
    let p = match &meta.scene {
        Some(scene) => {
            let mut p = make_waypoint_path(scene)?;
            p.name = meta.name.clone();
            p
        }
        None => get_problem(&meta.name)?,
    };
    if &p.meta() != meta {
        return Err(SuiteError::HeaderMismatch(meta.name.clone()));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_equality_feasibility() {
        let p = make_toy_equality::<f64>();
        assert_eq!(p.max_violation(&[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(p.max_violation(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(p.eval_objective(&[0.5, 0.5]).unwrap().0, 0.5);
    }

    #[test]
    fn rosenbrock_unconstrained_minimum_is_infeasible() {
        let p = make_disk_rosenbrock::<f64>();
        let (_, g) = p.constraint_values(&[1.0, 1.0]).unwrap();
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn registry_lookup() {
        let p = get_problem::<f64>("toy_equality").unwrap();
        assert_eq!((p.n(), p.equalities.len()), (2, 1));
        let p = get_problem::<f64>("waypoint_T20").unwrap();
        assert_eq!(p.n(), 40);
        assert_eq!(
            get_problem::<f64>("nosuch").unwrap_err(),
            SuiteError::NotFound("nosuch".into())
        );
        let names: Vec<_> = list_problems().into_iter().map(|s| s.name).collect();
        assert_eq!(names, REGISTRY);
    }

    #[test]
    fn obstacle_groups_have_t_members() {
        let p = get_problem::<f64>("waypoint_T20_attach").unwrap();
        let obstacle = p.inequalities.iter().filter(|c| c.group == "obstacle_0").count();
        assert_eq!(obstacle, 20);
        let attach: Vec<_> = p.equalities.iter().filter(|c| c.group == "attach").collect();
        assert_eq!(attach.len(), 2);
        assert_eq!(attach[0].time_indices, vec![12, 13]);
    }

    #[test]
    fn scene_validation() {
        let mut s = blocking_scene(20, 2);
        s.t_count = 2;
        assert!(s.validate().is_err());
        let mut s = blocking_scene(20, 2);
        s.obstacles[0].radius = 0.0;
        assert!(s.validate().is_err());
        let mut s = blocking_scene(20, 2);
        s.event_index = Some(19);
        assert!(s.validate().is_err());
        let mut s = blocking_scene(20, 2);
        s.format_version = 2;
        assert!(s.validate().is_err());
    }

    #[test]
    fn scene_toml_roundtrip() {
        let mut s = blocking_scene(7, 3);
        s.event_index = Some(3);
        s.smoothness_order = 2;
        let text = s.to_toml_string();
        assert!(text.contains("format_version = 1"));
        assert_eq!(WaypointSceneSpec::from_toml_str(&text).unwrap(), s);
        assert!(WaypointSceneSpec::from_toml_str("format_version = 1\nT = 4\nd = 2\nstart=[0,0]\ngoal=[1,1]\nbogus=1").is_err());
    }

    #[test]
    fn meta_reconstruction() {
        let p = get_problem::<f64>("waypoint_T20_attach").unwrap();
        let q = problem_from_meta::<f64>(&p.meta()).unwrap();
        assert_eq!(q.meta(), p.meta());
        let p = get_problem::<f64>("toy_equality").unwrap();
        let mut meta = p.meta();
        meta.n = 3;
        assert!(problem_from_meta::<f64>(&meta).is_err());
    }
}
