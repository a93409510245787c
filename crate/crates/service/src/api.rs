//! Transport-independent request handling. The HTTP layer only converts
//! to and from [`ApiRequest`] / [`ApiResponse`].

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, RwLock};

use nlpscope_core::analytics::{
    aggregate_group_series, default_plane, feasibility_mask, group_member_series, isobands, path_evolution_projection,
    progression_remaining, project_trajectory, quantile_levels, sample_grid, three_point_plane, FunctionKey,
    DEFAULT_LEVEL_COUNT,
};
use nlpscope_core::trace::wire::ser_real;
use nlpscope_core::trace::{accepted_steps, duals_at_step, event_to_json, group_tree, EventKind, EventPayload};
use nlpscope_core::PlaneSpec;
use percent_encoding::percent_decode_str;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::config::ServiceConfig;
use crate::error::ApiError;
use crate::session::Session;
use crate::API_VERSION;

const INDEX_HTML: &str = include_str!("../assets/index.html");
const MAX_PAGE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Get,
    Post,
    Other,
}

impl Method {
    pub fn parse(s: &str) -> Self {
        match s {
            "GET" => Method::Get,
            "POST" => Method::Post,
            _ => Method::Other,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
            Method::Other => "this method",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiRequest {
    pub method: Method,
    /// Percent-encoded path, without the query string.
    pub path: String,
    /// Decoded query pairs in request order.
    pub query: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl ApiRequest {
    pub fn new(method: Method, path_and_query: &str, body: Vec<u8>) -> Self {
        let (path, query) = match path_and_query.split_once('?') {
            Some((p, q)) => (p, url::form_urlencoded::parse(q.as_bytes()).into_owned().collect()),
            None => (path_and_query, Vec::new()),
        };
        Self { method, path: path.to_string(), query, body }
    }

    pub fn get(path_and_query: &str) -> Self {
        Self::new(Method::Get, path_and_query, Vec::new())
    }

    pub fn post(path: &str, body: &Value) -> Self {
        Self::new(Method::Post, path, serde_json::to_vec(body).expect("json values serialize"))
    }

    /// Canonical form used as the cache key.
    fn key(&self, generation: u64) -> String {
        let mut query = self.query.clone();
        query.sort();
        let body = serde_json::from_slice::<Value>(&self.body)
            .map(|v| v.to_string())
            .unwrap_or_else(|_| String::from_utf8_lossy(&self.body).into_owned());
        format!("{generation}|{:?}|{}|{query:?}|{body}", self.method, self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Arc<[u8]>,
}

impl ApiResponse {
    fn json(status: u16, value: &Value) -> Self {
        Self {
            status,
            content_type: "application/json",
            body: serde_json::to_vec(value).expect("json values serialize").into(),
        }
    }

    fn error(e: &ApiError) -> Self {
        Self::json(e.status, &e.body())
    }

    /// The body parsed as JSON; `Value::Null` when it is not JSON.
    pub fn value(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }
}

/// Bounded memo of successful responses, oldest evicted first.
struct Cache {
    capacity: usize,
    entries: HashMap<String, ApiResponse>,
    order: VecDeque<String>,
}

impl Cache {
    fn get(&self, key: &str) -> Option<ApiResponse> {
        self.entries.get(key).cloned()
    }

    fn put(&mut self, key: String, response: ApiResponse) {
        if self.capacity == 0 || self.entries.contains_key(&key) {
            return;
        }
        while self.entries.len() >= self.capacity {
            match self.order.pop_front() {
                Some(old) => {
                    self.entries.remove(&old);
                }
                None => break,
            }
        }
        self.order.push_back(key.clone());
        self.entries.insert(key, response);
    }
}

/// The query service. Many readers may call [`Service::handle`]
/// concurrently; [`Service::load`] replaces the session exclusively.
pub struct Service {
    config: ServiceConfig,
    session: RwLock<Option<(u64, Arc<Session>)>>,
    cache: Mutex<Cache>,
}

impl Service {
    pub fn new(config: ServiceConfig) -> Self {
        let capacity = config.cache_entries;
        Self {
            config,
            session: RwLock::new(None),
            cache: Mutex::new(Cache { capacity, entries: HashMap::new(), order: VecDeque::new() }),
        }
    }

    pub fn with_session(config: ServiceConfig, session: Session) -> Self {
        let s = Self::new(config);
        s.load(session);
        s
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Installs `session`, replacing any previous one.
    pub fn load(&self, session: Session) {
        let mut slot = self.session.write().expect("session lock");
        let generation = slot.as_ref().map_or(0, |(g, _)| g + 1);
        *slot = Some((generation, Arc::new(session)));
    }

    pub fn session(&self) -> Option<Arc<Session>> {
        self.session.read().expect("session lock").as_ref().map(|(_, s)| s.clone())
    }

    pub fn handle(&self, req: &ApiRequest) -> ApiResponse {
        if self.config.ui && req.method == Method::Get && (req.path == "/" || req.path == "/index.html") {
            return ApiResponse {
                status: 200,
                content_type: "text/html; charset=utf-8",
                body: INDEX_HTML.as_bytes().into(),
            };
        }
        let current = self.session.read().expect("session lock").clone();
        let key = current.as_ref().map(|(g, _)| req.key(*g));
        if let Some(hit) = key.as_deref().and_then(|k| self.cache.lock().expect("cache lock").get(k)) {
            return hit;
        }
        let result = route(req).and_then(|endpoint| {
            let (_, session) = current.as_ref().ok_or_else(ApiError::no_session)?;
            endpoint(&Ctx { session, config: &self.config }, req)
        });
        match result {
            Ok(mut value) => {
                if let Value::Object(map) = &mut value {
                    map.insert("api_version".into(), json!(API_VERSION));
                }
                let response = ApiResponse::json(200, &value);
                if let Some(k) = key {
                    self.cache.lock().expect("cache lock").put(k, response.clone());
                }
                response
            }
            Err(e) => ApiResponse::error(&e),
        }
    }
}

struct Ctx<'a> {
    session: &'a Session,
    config: &'a ServiceConfig,
}

type Endpoint = fn(&Ctx, &ApiRequest) -> Result<Value, ApiError>;

fn route(req: &ApiRequest) -> Result<Endpoint, ApiError> {
    let wants = |method: Method, endpoint: Endpoint| {
        if req.method == method {
            Ok(endpoint)
        } else {
            Err(ApiError::method_not_allowed(req.method.as_str(), &req.path))
        }
    };
    match req.path.as_str() {
        "/trace/meta" => wants(Method::Get, trace_meta),
        "/trace/events" => wants(Method::Get, trace_events),
        "/series/progression" => wants(Method::Get, series_progression),
        "/plane/default" => wants(Method::Post, plane_default),
        "/plane/threepoint" => wants(Method::Post, plane_threepoint),
        "/sample" => wants(Method::Post, sample),
        "/projection/paths" => wants(Method::Get, projection_paths),
        p if p.starts_with("/series/group/") => wants(Method::Get, series_group),
        p => Err(ApiError::not_found(format!("no endpoint at {p}"))),
    }
}

/// Query parameters consumed by name; leftovers are rejected.
struct Query<'a> {
    pairs: Vec<&'a (String, String)>,
}

impl<'a> Query<'a> {
    fn new(req: &'a ApiRequest) -> Self {
        Self { pairs: req.query.iter().collect() }
    }

    fn take(&mut self, name: &str) -> Result<Option<&'a str>, ApiError> {
        let hits: Vec<usize> = (0..self.pairs.len()).filter(|&i| self.pairs[i].0 == name).collect();
        match hits.as_slice() {
            [] => Ok(None),
            [i] => Ok(Some(self.pairs.remove(*i).1.as_str())),
            _ => Err(ApiError::invalid(format!("parameter `{name}` given more than once"))),
        }
    }

    fn number(&mut self, name: &str) -> Result<Option<usize>, ApiError> {
        self.take(name)?
            .map(|v| v.parse::<usize>().map_err(|_| ApiError::invalid(format!("`{name}` must be a nonnegative integer, got `{v}`"))))
            .transpose()
    }

    /// Comma-separated list; an empty value means "not given".
    fn list(&mut self, name: &str) -> Result<Option<Vec<&'a str>>, ApiError> {
        Ok(self.take(name)?.filter(|v| !v.is_empty()).map(|v| v.split(',').map(str::trim).collect()))
    }

    fn finish(self) -> Result<(), ApiError> {
        match self.pairs.first() {
            Some((name, _)) => Err(ApiError::invalid(format!("unknown parameter `{name}`"))),
            None => Ok(()),
        }
    }
}

fn body<'de, T: Deserialize<'de>>(req: &'de ApiRequest) -> Result<T, ApiError> {
    serde_json::from_slice(&req.body).map_err(|e| ApiError::invalid(format!("request body: {e}")))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("analytics results serialize")
}

fn real(v: f64) -> Value {
    ser_real(v, serde_json::value::Serializer).expect("reals serialize")
}

fn trace_meta(ctx: &Ctx, req: &ApiRequest) -> Result<Value, ApiError> {
    Query::new(req).finish()?;
    let trace = &ctx.session.trace;
    let meta = &trace.header.problem;
    let counts: Map<String, Value> = EventKind::ALL
        .into_iter()
        .map(|k| (k.as_str().to_string(), json!(trace.count(k))))
        .collect();
    let status = trace.events.last().map(|e| match &e.payload {
        EventPayload::Converged { .. } => "converged",
        EventPayload::Aborted { .. } => "aborted",
        _ => "incomplete",
    });
    Ok(json!({
        "problem": meta.name,
        "n": meta.n,
        "t_count": meta.t_count,
        "config_dims": meta.config_dims,
        "steps": ctx.session.trajectory.len(),
        "accepted_steps": accepted_steps(trace).len(),
        "groups": group_tree(meta),
        "event_counts": counts,
        "status": status.unwrap_or("incomplete"),
        "options": trace.header.options,
    }))
}

fn trace_events(ctx: &Ctx, req: &ApiRequest) -> Result<Value, ApiError> {
    let mut q = Query::new(req);
    let offset = q.number("offset")?.unwrap_or(0);
    let limit = q.number("limit")?.unwrap_or(100);
    let kinds = q
        .list("kinds")?
        .map(|ks| {
            ks.into_iter()
                .map(|k| EventKind::parse(k).ok_or_else(|| ApiError::invalid(format!("unknown event kind `{k}`"))))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    q.finish()?;
    if limit > MAX_PAGE {
        return Err(ApiError::invalid(format!("limit {limit} exceeds {MAX_PAGE}")));
    }
    let mut step = 0usize;
    let mut total = 0usize;
    let mut page = Vec::new();
    for e in &ctx.session.trace.events {
        let kind = e.kind();
        let this_step = (kind == EventKind::Eval).then(|| {
            step += 1;
            step - 1
        });
        if kinds.as_ref().is_some_and(|ks| !ks.contains(&kind)) {
            continue;
        }
        if total >= offset && page.len() < limit {
            let mut v: Value = serde_json::from_str(&event_to_json(e)).expect("event json");
            let obj = v.as_object_mut().expect("events are objects");
            obj.insert("highlight".into(), json!(kind == EventKind::StepsizeShrink));
            if let Some(s) = this_step {
                obj.insert("step".into(), json!(s));
            }
            page.push(v);
        }
        total += 1;
    }
    Ok(json!({
        "total": total,
        "offset": offset,
        "limit": limit,
        "kinds": kinds.map(|ks| ks.into_iter().map(EventKind::as_str).collect::<Vec<_>>()),
        "events": page,
    }))
}

fn series_progression(ctx: &Ctx, req: &ApiRequest) -> Result<Value, ApiError> {
    Query::new(req).finish()?;
    let p = progression_remaining(&ctx.session.trajectory);
    let warning = p.degenerate.then_some("the trajectory never moves; progression is reported as zero");
    Ok(json!({ "progression": p, "warning": warning }))
}

fn series_group(ctx: &Ctx, req: &ApiRequest) -> Result<Value, ApiError> {
    let raw = &req.path["/series/group/".len()..];
    let name = percent_decode_str(raw)
        .decode_utf8()
        .map_err(|_| ApiError::invalid("group name is not UTF-8"))?
        .into_owned();
    let mut q = Query::new(req);
    let expanded = match q.take("expanded")? {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => return Err(ApiError::invalid(format!("`expanded` must be true or false, got `{other}`"))),
    };
    q.finish()?;
    let trace = &ctx.session.trace;
    let node = group_tree(&trace.header.problem)
        .into_iter()
        .find(|g| g.name == name)
        .ok_or_else(|| ApiError::not_found(format!("unknown constraint group `{name}`")))?;
    let mut out = json!({ "group": name, "kind": node.kind, "expanded": expanded });
    if expanded {
        out["members"] = to_value(&group_member_series(trace, &name)?);
    } else {
        out["series"] = to_value(&aggregate_group_series(trace, &name)?);
    }
    Ok(out)
}

/// Planes are named by how they were built, so an id alone is enough to
/// rebuild one and identical requests always get identical ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneRequest {
    Default { step: usize },
    ThreePoint { a: usize, b: usize, c: usize },
}

impl PlaneRequest {
    pub fn id(&self) -> String {
        match self {
            PlaneRequest::Default { step } => format!("default-{step}"),
            PlaneRequest::ThreePoint { a, b, c } => format!("3pt-{a}-{b}-{c}"),
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        let nums = |s: &str| s.split('-').map(|p| p.parse::<usize>().ok()).collect::<Option<Vec<_>>>();
        if let Some(rest) = id.strip_prefix("default-") {
            match nums(rest)?.as_slice() {
                [step] => Some(PlaneRequest::Default { step: *step }),
                _ => None,
            }
        } else if let Some(rest) = id.strip_prefix("3pt-") {
            match nums(rest)?.as_slice() {
                [a, b, c] => Some(PlaneRequest::ThreePoint { a: *a, b: *b, c: *c }),
                _ => None,
            }
        } else {
            None
        }
    }

    pub fn steps(&self) -> Vec<usize> {
        match *self {
            PlaneRequest::Default { step } => vec![step],
            PlaneRequest::ThreePoint { a, b, c } => vec![a, b, c],
        }
    }

    fn build(&self, session: &Session) -> Result<PlaneSpec, ApiError> {
        let traj = &session.trajectory;
        for s in self.steps() {
            traj.point(s)?;
        }
        Ok(match *self {
            PlaneRequest::Default { step } => default_plane(traj, step)?,
            PlaneRequest::ThreePoint { a, b, c } => three_point_plane(&traj.points[a], &traj.points[b], &traj.points[c])?,
        })
    }
}

fn plane_response(ctx: &Ctx, plane: PlaneRequest) -> Result<Value, ApiError> {
    let spec = plane.build(ctx.session)?;
    let kind = match plane {
        PlaneRequest::Default { .. } => "default",
        PlaneRequest::ThreePoint { .. } => "threepoint",
    };
    Ok(json!({ "plane_id": plane.id(), "kind": kind, "steps": plane.steps(), "plane": spec }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DefaultPlaneBody {
    step: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThreePointBody {
    step_a: usize,
    step_b: usize,
    step_c: usize,
}

fn plane_default(ctx: &Ctx, req: &ApiRequest) -> Result<Value, ApiError> {
    Query::new(req).finish()?;
    let b: DefaultPlaneBody = body(req)?;
    plane_response(ctx, PlaneRequest::Default { step: b.step })
}

fn plane_threepoint(ctx: &Ctx, req: &ApiRequest) -> Result<Value, ApiError> {
    Query::new(req).finish()?;
    let b: ThreePointBody = body(req)?;
    plane_response(ctx, PlaneRequest::ThreePoint { a: b.step_a, b: b.step_b, c: b.step_c })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Resolution {
    Square(usize),
    Grid([usize; 2]),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleBody {
    plane_id: String,
    resolution: Resolution,
    functions: Option<Vec<String>>,
    tau: Option<f64>,
    duals_step: Option<usize>,
    level_count: Option<usize>,
}

fn sample(ctx: &Ctx, req: &ApiRequest) -> Result<Value, ApiError> {
    Query::new(req).finish()?;
    let b: SampleBody = body(req)?;
    let session = ctx.session;
    let plane_req =
        PlaneRequest::parse(&b.plane_id).ok_or_else(|| ApiError::not_found(format!("unknown plane `{}`", b.plane_id)))?;
    let plane = plane_req.build(session)?;
    let (rows, cols) = match b.resolution {
        Resolution::Square(n) => (n, n),
        Resolution::Grid([r, c]) => (r, c),
    };
    let cap = ctx.config.max_resolution;
    if rows > cap || cols > cap {
        return Err(ApiError::invalid(format!("resolution {rows}x{cols} exceeds the cap of {cap}x{cap}")));
    }
    let level_count = b.level_count.unwrap_or(DEFAULT_LEVEL_COUNT);
    if !(2..=64).contains(&level_count) {
        return Err(ApiError::invalid("level_count must be between 2 and 64"));
    }
    let names = b.functions.unwrap_or_else(|| vec!["f".to_string()]);
    let mut keys: Vec<FunctionKey> = Vec::new();
    for name in &names {
        let key = FunctionKey::parse(name, &session.problem)?;
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let last = session.trajectory.len() - 1;
    let duals_step = b.duals_step.unwrap_or(last);
    let duals = duals_at_step(&session.trace, duals_step)?;
    let grid = sample_grid(&session.problem, &plane, rows, cols, &keys, &duals)?;

    let layout = grid.layout();
    let bands = grid
        .fields
        .iter()
        .map(|f| {
            let levels = quantile_levels(&f.values, level_count);
            if levels.is_empty() {
                return Ok(json!({ "function": f.function, "bands": null }));
            }
            Ok(json!({ "function": f.function, "bands": isobands(&layout, &f.values, &levels)? }))
        })
        .collect::<Result<Vec<_>, ApiError>>()?;

    let feasibility = match b.tau {
        None => Value::Null,
        Some(tau) => {
            let has_constraints = keys.iter().any(|k| k.constraint_kind().is_some());
            let mask = if has_constraints || session.problem.constraints().next().is_none() {
                feasibility_mask(&grid, tau)?
            } else {
                let all: Vec<FunctionKey> = session
                    .problem
                    .constraints()
                    .map(|c| FunctionKey::parse(&c.instance_id, &session.problem))
                    .collect::<Result<_, _>>()?;
                feasibility_mask(&sample_grid(&session.problem, &plane, rows, cols, &all, &duals)?, tau)?
            };
            to_value(&mask)
        }
    };
    let (steps, sigma) = project_trajectory(&plane, &session.trajectory);
    Ok(json!({
        "plane_id": plane_req.id(),
        "duals_step": duals_step,
        "grid": grid,
        "isobands": bands,
        "feasibility": feasibility,
        "trajectory": { "sigma": real(sigma), "steps": steps },
    }))
}

fn parse_indices(list: Option<Vec<&str>>, name: &str) -> Result<Option<Vec<usize>>, ApiError> {
    list.map(|items| {
        items
            .into_iter()
            .map(|s| s.parse::<usize>().map_err(|_| ApiError::invalid(format!("`{name}` entry `{s}` is not an index"))))
            .collect()
    })
    .transpose()
}

fn projection_paths(ctx: &Ctx, req: &ApiRequest) -> Result<Value, ApiError> {
    let mut q = Query::new(req);
    let steps = parse_indices(q.list("steps")?, "steps")?;
    let configs = parse_indices(q.list("configs")?, "configs")?;
    q.finish()?;
    let set = path_evolution_projection(&ctx.session.trace, steps.as_deref(), configs.as_deref())?;
    Ok(json!({
        "highlighted": { "steps": steps, "configs": configs },
        "projection": set,
    }))
}
