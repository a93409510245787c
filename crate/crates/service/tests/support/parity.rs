//! Golden comparisons between service responses and direct analytics
//! calls. Each check issues randomized requests, compares the relevant
//! response field with the serialized direct result, and repeats every
//! request to confirm byte-identical output.
#![allow(dead_code)]

use nlpscope_core::analytics::{
    aggregate_group_series, default_plane, feasibility_mask, group_member_series, isobands, path_evolution_projection,
    progression_remaining, project_trajectory, quantile_levels, sample_grid, three_point_plane, FunctionKey,
    DEFAULT_LEVEL_COUNT,
};
use nlpscope_core::solver::{solve, SolverOptions};
use nlpscope_core::suite::get_problem;
use nlpscope_core::trace::{accepted_steps, duals_at_step, event_to_json, group_tree, EventKind};
use nlpscope_service::{ApiRequest, ApiResponse, Service, ServiceConfig, Session};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

pub const REQUESTS: usize = 20;

pub fn session(name: &str, grow: f64) -> Session {
    let p = get_problem::<f64>(name).unwrap();
    let r = solve(&p, &p.x_init, &SolverOptions { grow, ..Default::default() }).unwrap();
    Session::new(r.trace).unwrap()
}

pub fn service(name: &str, grow: f64, cache_entries: usize) -> Service {
    Service::with_session(ServiceConfig { cache_entries, ..Default::default() }, session(name, grow))
}

fn v<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap()
}

/// Sends `req` twice; both answers must be byte-identical.
fn ask(svc: &Service, req: &ApiRequest) -> Result<ApiResponse, String> {
    let a = svc.handle(req);
    let b = svc.handle(req);
    if a != b {
        return Err(format!("{} {:?}: repeated request differs", req.path, req.query));
    }
    if a.value()["api_version"] != json!(1) {
        return Err(format!("{}: missing api_version", req.path));
    }
    Ok(a)
}

fn expect_eq(what: &str, got: &Value, want: &Value) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        let clip = |v: &Value| v.to_string().chars().take(300).collect::<String>();
        Err(format!("{what}: got {} want {}", clip(got), clip(want)))
    }
}

fn expect_status(what: &str, r: &ApiResponse, status: u16) -> Result<(), String> {
    if r.status == status {
        Ok(())
    } else {
        Err(format!("{what}: status {} (wanted {status}): {}", r.status, String::from_utf8_lossy(&r.body)))
    }
}

pub fn check_meta(svc: &Service, _rng: &mut ChaCha8Rng) -> Result<(), String> {
    let s = svc.session().unwrap();
    let meta = &s.trace.header.problem;
    for _ in 0..REQUESTS {
        let r = ask(svc, &ApiRequest::get("/trace/meta"))?;
        expect_status("meta", &r, 200)?;
        let body = r.value();
        expect_eq("meta.groups", &body["groups"], &v(&group_tree(meta)))?;
        expect_eq("meta.n", &body["n"], &json!(meta.n))?;
        expect_eq("meta.steps", &body["steps"], &json!(s.trajectory.len()))?;
        expect_eq("meta.accepted", &body["accepted_steps"], &json!(accepted_steps(&s.trace).len()))?;
        for k in EventKind::ALL {
            expect_eq("meta.counts", &body["event_counts"][k.as_str()], &json!(s.trace.count(k)))?;
        }
    }
    Ok(())
}

pub fn check_events(svc: &Service, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let s = svc.session().unwrap();
    let events = &s.trace.events;
    for _ in 0..REQUESTS {
        let offset = rng.random_range(0..events.len() + 5);
        let limit = rng.random_range(0..60);
        let kinds: Vec<EventKind> = EventKind::ALL.into_iter().filter(|_| rng.random_bool(0.4)).collect();
        let mut url = format!("/trace/events?offset={offset}&limit={limit}");
        if !kinds.is_empty() {
            url += &format!("&kinds={}", kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(","));
        }
        let r = ask(svc, &ApiRequest::get(&url))?;
        expect_status(&url, &r, 200)?;
        let mut want = Vec::new();
        let mut total = 0;
        let mut step = 0;
        for e in events {
            let this = (e.kind() == EventKind::Eval).then(|| {
                step += 1;
                step - 1
            });
            if !kinds.is_empty() && !kinds.contains(&e.kind()) {
                continue;
            }
            if total >= offset && want.len() < limit {
                let mut x: Value = serde_json::from_str(&event_to_json(e)).unwrap();
                x["highlight"] = json!(e.kind() == EventKind::StepsizeShrink);
                if let Some(i) = this {
                    x["step"] = json!(i);
                }
                want.push(x);
            }
            total += 1;
        }
        let body = r.value();
        expect_eq(&url, &body["events"], &Value::Array(want))?;
        expect_eq(&url, &body["total"], &json!(total))?;
    }
    Ok(())
}

pub fn check_progression(svc: &Service, _rng: &mut ChaCha8Rng) -> Result<(), String> {
    let s = svc.session().unwrap();
    let want = v(&progression_remaining(&s.trajectory));
    for _ in 0..REQUESTS {
        let r = ask(svc, &ApiRequest::get("/series/progression"))?;
        expect_status("progression", &r, 200)?;
        expect_eq("progression", &r.value()["progression"], &want)?;
    }
    Ok(())
}

pub fn check_groups(svc: &Service, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let s = svc.session().unwrap();
    let names: Vec<String> = group_tree(&s.trace.header.problem).into_iter().map(|g| g.name).collect();
    for _ in 0..REQUESTS {
        let name = names.choose(rng).unwrap();
        let expanded = rng.random_bool(0.5);
        let url = format!("/series/group/{name}?expanded={expanded}");
        let r = ask(svc, &ApiRequest::get(&url))?;
        expect_status(&url, &r, 200)?;
        let body = r.value();
        if expanded {
            expect_eq(&url, &body["members"], &v(&group_member_series(&s.trace, name).unwrap()))?;
        } else {
            expect_eq(&url, &body["series"], &v(&aggregate_group_series(&s.trace, name).unwrap()))?;
        }
    }
    let r = ask(svc, &ApiRequest::get("/series/group/no-such-group"))?;
    expect_status("unknown group", &r, 404)
}

pub fn check_default_plane(svc: &Service, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let s = svc.session().unwrap();
    let n = s.trajectory.len();
    for i in 0..REQUESTS {
        // The final step has no plane; ask for it once.
        let step = if i == 0 { n - 1 } else { rng.random_range(0..n - 1) };
        let r = ask(svc, &ApiRequest::post("/plane/default", &json!({ "step": step })))?;
        match default_plane(&s.trajectory, step) {
            Ok(p) => {
                expect_status("default plane", &r, 200)?;
                expect_eq("default plane", &r.value()["plane"], &v(&p))?;
                expect_eq("plane id", &r.value()["plane_id"], &json!(format!("default-{step}")))?;
            }
            Err(_) => expect_status("degenerate default plane", &r, 422)?,
        }
    }
    Ok(())
}

pub fn check_threepoint_plane(svc: &Service, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let s = svc.session().unwrap();
    let n = s.trajectory.len();
    for i in 0..REQUESTS {
        let [a, b, c] = if i == 0 { [1, 1, 2] } else { [0; 3].map(|_| rng.random_range(0..n)) };
        let r = ask(
            svc,
            &ApiRequest::post("/plane/threepoint", &json!({ "step_a": a, "step_b": b, "step_c": c })),
        )?;
        let p = &s.trajectory.points;
        match three_point_plane(&p[a], &p[b], &p[c]) {
            Ok(plane) => {
                expect_status("three-point plane", &r, 200)?;
                expect_eq("three-point plane", &r.value()["plane"], &v(&plane))?;
            }
            Err(_) => expect_status("degenerate three-point plane", &r, 422)?,
        }
    }
    Ok(())
}

pub fn check_sample(svc: &Service, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let s = svc.session().unwrap();
    let n = s.trajectory.len();
    let problem = &s.problem;
    let mut names = vec!["f".to_string(), "L".to_string()];
    names.extend(problem.constraints().map(|c| c.instance_id.clone()));
    let mut done = 0;
    while done < REQUESTS {
        let step = rng.random_range(0..n - 1);
        let Ok(plane) = default_plane(&s.trajectory, step) else { continue };
        let rows = rng.random_range(2..12);
        let cols = rng.random_range(2..12);
        let functions: Vec<String> = (0..rng.random_range(1..4)).map(|_| names.choose(rng).unwrap().clone()).collect();
        let tau = rng.random_bool(0.5).then(|| rng.random_range(0.0..2.0));
        let duals_step = rng.random_range(0..n);
        let body = json!({
            "plane_id": format!("default-{step}"),
            "resolution": [rows, cols],
            "functions": functions,
            "tau": tau,
            "duals_step": duals_step,
        });
        let r = ask(svc, &ApiRequest::post("/sample", &body))?;
        expect_status("sample", &r, 200)?;
        let got = r.value();

        let mut keys: Vec<FunctionKey> = Vec::new();
        for f in &functions {
            let k = FunctionKey::parse(f, problem).unwrap();
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let duals = duals_at_step(&s.trace, duals_step).unwrap();
        let grid = sample_grid(problem, &plane, rows, cols, &keys, &duals).unwrap();
        expect_eq("sample.grid", &got["grid"], &v(&grid))?;
        for (i, f) in grid.fields.iter().enumerate() {
            let levels = quantile_levels(&f.values, DEFAULT_LEVEL_COUNT);
            let want = if levels.is_empty() {
                Value::Null
            } else {
                v(&isobands(&grid.layout(), &f.values, &levels).unwrap())
            };
            expect_eq("sample.isobands", &got["isobands"][i]["bands"], &want)?;
        }
        let want_mask = match tau {
            None => Value::Null,
            Some(t) => {
                let all: Vec<FunctionKey> =
                    problem.constraints().map(|c| FunctionKey::parse(&c.instance_id, problem).unwrap()).collect();
                if keys.iter().any(|k| k.constraint_kind().is_some()) {
                    v(&feasibility_mask(&grid, t).unwrap())
                } else {
                    v(&feasibility_mask(&sample_grid(problem, &plane, rows, cols, &all, &duals).unwrap(), t).unwrap())
                }
            }
        };
        expect_eq("sample.feasibility", &got["feasibility"], &want_mask)?;
        let (steps, sigma) = project_trajectory(&plane, &s.trajectory);
        expect_eq("sample.trajectory", &got["trajectory"]["steps"], &v(&steps))?;
        expect_eq("sample.sigma", &got["trajectory"]["sigma"], &json!(sigma))?;
        done += 1;
    }
    let too_big = json!({ "plane_id": "default-0", "resolution": 513 });
    expect_status("resolution cap", &svc.handle(&ApiRequest::post("/sample", &too_big)), 400)
}

pub fn check_projection(svc: &Service, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let s = svc.session().unwrap();
    let n = s.trajectory.len();
    let t = s.trace.header.problem.t_count;
    for _ in 0..REQUESTS {
        let steps: Option<Vec<usize>> = rng.random_bool(0.7).then(|| (0..rng.random_range(1..6)).map(|_| rng.random_range(0..n)).collect());
        let configs: Option<Vec<usize>> = rng.random_bool(0.7).then(|| (0..rng.random_range(1..4)).map(|_| rng.random_range(0..t)).collect());
        let join = |v: &Vec<usize>| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut url = "/projection/paths?".to_string();
        if let Some(s) = &steps {
            url += &format!("steps={}&", join(s));
        }
        if let Some(c) = &configs {
            url += &format!("configs={}", join(c));
        }
        let r = ask(svc, &ApiRequest::get(&url))?;
        expect_status(&url, &r, 200)?;
        let want = path_evolution_projection(&s.trace, steps.as_deref(), configs.as_deref()).unwrap();
        expect_eq(&url, &r.value()["projection"], &v(&want))?;
    }
    let r = ask(svc, &ApiRequest::get(&format!("/projection/paths?steps={n}")))?;
    expect_status("bad step", &r, 400)
}

pub type Check = fn(&Service, &mut ChaCha8Rng) -> Result<(), String>;

pub const CHECKS: [(&str, Check); 8] = [
    ("GET /trace/meta", check_meta),
    ("GET /trace/events", check_events),
    ("GET /series/progression", check_progression),
    ("GET /series/group/{name}", check_groups),
    ("POST /plane/default", check_default_plane),
    ("POST /plane/threepoint", check_threepoint_plane),
    ("POST /sample", check_sample),
    ("GET /projection/paths", check_projection),
];

/// Runs every endpoint check against a cached and an uncached service over
/// the same trace; both must match the direct calls.
pub fn run_all(problem: &str, grow: f64, seed: u64) -> Vec<(&'static str, Result<(), String>)> {
    let cached = service(problem, grow, 64);
    let uncached = Service::with_session(
        ServiceConfig { cache_entries: 0, ..Default::default() },
        Session::new(cached.session().unwrap().trace.clone()).unwrap(),
    );
    CHECKS
        .iter()
        .map(|(name, check)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let result = check(&cached, &mut rng).and_then(|_| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                check(&uncached, &mut rng)
            });
            (*name, result)
        })
        .collect()
}
