use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use nlpscope_core::solver::{solve, SolveError, SolverOptions};
use nlpscope_core::suite::{get_problem, list_problems, make_waypoint_path, SuiteError, WaypointSceneSpec};
use nlpscope_core::trace::{optimization_trajectory, read_trace_file, write_trace_file, TraceError};
use nlpscope_core::{Problem, SolveResult, Trace};
use nlpscope_service::{ApiRequest, ApiResponse, Service, ServiceConfig, Session};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::svg;

#[derive(Parser)]
#[command(name = "nlpscope", version, about = "Solve constrained NLPs with a full trace, then inspect the trace")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a registry problem or a scene file and write the trace.
    Solve {
        /// Registry name, or path to a scene TOML file.
        #[arg(long)]
        problem: String,
        #[arg(long)]
        out: PathBuf,
        /// Solver option override, e.g. `--opt grow=2.0`. Repeatable.
        #[arg(long = "opt", value_name = "KEY=VALUE")]
        opts: Vec<String>,
    },
    /// Export one analytics view of a trace as JSON, optionally as SVG too.
    Export {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum)]
        what: What,
        /// View parameters, e.g. `--args step=3 resolution=64`.
        #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
        args: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write a static rendering.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Serve a trace over HTTP until interrupted.
    Serve {
        #[arg(long)]
        trace: PathBuf,
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
        /// Also serve the browser front end at `/`.
        #[arg(long)]
        ui: bool,
        /// Service configuration file (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List the built-in problems.
    Problems,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum What {
    Progression,
    Groups,
    Paths,
    Landscape,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { problem, out, opts } => cmd_solve(&problem, &out, &opts),
        Command::Export { trace, what, args, out, svg } => cmd_export(&trace, what, &args, &out, svg.as_deref()),
        Command::Serve { trace, listen, ui, config } => cmd_serve(&trace, listen, ui, config.as_deref()),
        Command::Problems => {
            let mut stdout = std::io::stdout().lock();
            for p in list_problems() {
                let _ = writeln!(
                    stdout,
                    "{:<22} n={:<4} T={:<3} equalities={:<3} inequalities={}",
                    p.name, p.n, p.t_count, p.equalities, p.inequalities
                );
            }
            Ok(())
        }
    }
}

fn load_problem(spec: &str) -> Result<Problem, CliError> {
    let path = Path::new(spec);
    if path.extension().is_some_and(|e| e == "toml") || path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::usage(format!("scene file {} not found", path.display())),
            _ => CliError::environment(format!("reading {}: {e}", path.display())),
        })?;
        let scene = WaypointSceneSpec::from_toml_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let mut problem = make_waypoint_path(&scene).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        problem.name = path.file_stem().map_or("scene".into(), |s| s.to_string_lossy().into_owned());
        Ok(problem)
    } else {
        get_problem(spec).map_err(|e| match e {
            SuiteError::NotFound(_) => CliError::usage(format!("{e} (run `nlpscope problems` for the list)")),
            other => CliError::runtime(other.to_string()),
        })
    }
}

fn write_trace(trace: &Trace, out: &Path) -> Result<(), CliError> {
    write_trace_file(trace, out).map_err(|e| CliError::environment(format!("writing {}: {e}", out.display())))
}

fn summary(r: &SolveResult, out: &Path) -> Result<String, CliError> {
    let steps = optimization_trajectory(&r.trace).map_err(|e| CliError::runtime(e.to_string()))?.len();
    Ok(format!(
        "problem: {}\nconverged: {}\nfeasible: {}\nsteps: {}\nouter_iterations: {}\nmax_violation: {:e}\nkkt_residual: {:e}\ntrace: {}\n",
        r.trace.header.problem.name,
        r.converged,
        r.feasible,
        steps,
        r.outer_iterations,
        r.max_violation,
        r.kkt_residual,
        out.display()
    ))
}

fn cmd_solve(problem: &str, out: &Path, opts: &[String]) -> Result<(), CliError> {
    let problem = load_problem(problem)?;
    let mut options = SolverOptions::default();
    for kv in opts {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::usage(format!("--opt expects KEY=VALUE, got `{kv}`")))?;
        options.set(k.trim(), v.trim()).map_err(CliError::usage)?;
    }
    match solve(&problem, &problem.x_init, &options) {
        Ok(r) => {
            write_trace(&r.trace, out)?;
            print!("{}", summary(&r, out)?);
            Ok(())
        }
        Err(SolveError::Diverged { reason, partial }) => {
            write_trace(&partial.trace, out)?;
            print!("{}", summary(&partial, out)?);
            Err(CliError::runtime(format!("solver diverged: {reason}; partial trace kept at {}", out.display())))
        }
        Err(SolveError::InvalidOptions(m)) => Err(CliError::usage(format!("invalid solver options: {m}"))),
        Err(e) => Err(CliError::runtime(e.to_string())),
    }
}

fn load_trace(path: &Path) -> Result<Trace, CliError> {
    read_trace_file(path).map_err(|e| match &e {
        TraceError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CliError::usage(format!("trace {} not found", path.display()))
        }
        TraceError::Io(_) => CliError::environment(format!("reading {}: {e}", path.display())),
        _ => CliError::runtime(format!("{}: {e}", path.display())),
    })
}

fn load_session(path: &Path) -> Result<Session, CliError> {
    Session::new(load_trace(path)?).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// `key=value` view parameters, each consumed at most once.
struct Args(Vec<(String, String)>);

impl Args {
    fn parse(raw: &[String]) -> Result<Self, CliError> {
        raw.iter()
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| CliError::usage(format!("--args expects KEY=VALUE, got `{kv}`")))
            })
            .collect::<Result<_, _>>()
            .map(Args)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        let i = self.0.iter().position(|(k, _)| k == key)?;
        Some(self.0.remove(i).1)
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        self.take(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::usage(format!("argument `{key}`: `{v}` is not a number"))))
            .transpose()
    }

    fn finish(self) -> Result<(), CliError> {
        match self.0.first() {
            Some((k, _)) => Err(CliError::usage(format!("unknown argument `{k}` for this export"))),
            None => Ok(()),
        }
    }
}

fn ask(service: &Service, req: ApiRequest) -> Result<Value, CliError> {
    let r: ApiResponse = service.handle(&req);
    let body = r.value();
    match r.status {
        200 => Ok(body),
        400 | 404 => Err(CliError::usage(body["error"]["message"].as_str().unwrap_or("bad request").to_string())),
        _ => Err(CliError::runtime(body["error"]["message"].as_str().unwrap_or("request failed").to_string())),
    }
}

fn without_version(mut v: Value) -> Value {
    if let Some(m) = v.as_object_mut() {
        m.remove("api_version");
    }
    v
}

fn cmd_export(trace: &Path, what: What, raw: &[String], out: &Path, svg_out: Option<&Path>) -> Result<(), CliError> {
    let mut args = Args::parse(raw)?;
    let session = load_session(trace)?;
    let service = Service::with_session(ServiceConfig { cache_entries: 0, ..Default::default() }, session);
    let (doc, drawing) = match what {
        What::Progression => {
            args.finish()?;
            let doc = ask(&service, ApiRequest::get("/series/progression"))?;
            let drawing = svg::progression(&doc);
            (doc, drawing)
        }
        What::Groups => {
            let expanded = args.take("expanded").unwrap_or_else(|| "false".into());
            let group = args.take("group");
            args.finish()?;
            let fetch = |name: &str| ask(&service, ApiRequest::get(&format!("/series/group/{name}?expanded={expanded}")));
            let doc = match group {
                Some(name) => fetch(&name)?,
                None => {
                    let meta = ask(&service, ApiRequest::get("/trace/meta"))?;
                    let names: Vec<String> = meta["groups"]
                        .as_array()
                        .map(|gs| gs.iter().filter_map(|g| g["name"].as_str().map(String::from)).collect())
                        .unwrap_or_default();
                    let groups = names.iter().map(|n| fetch(n).map(without_version)).collect::<Result<Vec<_>, _>>()?;
                    json!({ "api_version": nlpscope_service::API_VERSION, "groups": groups })
                }
            };
            let drawing = svg::groups(&doc);
            (doc, drawing)
        }
        What::Paths => {
            let mut url = "/projection/paths?".to_string();
            for key in ["steps", "configs"] {
                if let Some(v) = args.take(key) {
                    url += &format!("{key}={v}&");
                }
            }
            args.finish()?;
            let doc = ask(&service, ApiRequest::get(url.trim_end_matches(['&', '?'])))?;
            let drawing = svg::paths(&doc);
            (doc, drawing)
        }
        What::Landscape => {
            let doc = landscape(&service, &mut args)?;
            args.finish()?;
            let drawing = svg::landscape(&doc);
            (doc, drawing)
        }
    };
    let bytes = serde_json::to_vec(&doc).expect("json values serialize");
    std::fs::write(out, bytes).map_err(|e| CliError::environment(format!("writing {}: {e}", out.display())))?;
    if let Some(path) = svg_out {
        std::fs::write(path, drawing).map_err(|e| CliError::environment(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn landscape(service: &Service, args: &mut Args) -> Result<Value, CliError> {
    let plane = args.take("plane").unwrap_or_else(|| "default".into());
    let plane_req = match plane.as_str() {
        "default" => {
            let step: usize = args.number("step")?.unwrap_or(0);
            ApiRequest::post("/plane/default", &json!({ "step": step }))
        }
        "threepoint" => {
            let steps = args.take("steps").ok_or_else(|| CliError::usage("plane=threepoint needs steps=a,b,c"))?;
            let s: Vec<usize> = steps
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| CliError::usage(format!("steps: `{x}` is not an index"))))
                .collect::<Result<_, _>>()?;
            let [a, b, c] = s[..] else {
                return Err(CliError::usage("steps needs exactly three indices"));
            };
            ApiRequest::post("/plane/threepoint", &json!({ "step_a": a, "step_b": b, "step_c": c }))
        }
        other => return Err(CliError::usage(format!("plane must be default or threepoint, got `{other}`"))),
    };
    let plane = ask(service, plane_req)?;
    let resolution = match args.take("resolution") {
        None => json!(64),
        Some(r) => match r.split_once('x') {
            Some((a, b)) => {
                let p = |s: &str| s.trim().parse::<usize>().map_err(|_| CliError::usage(format!("resolution `{r}`")));
                json!([p(a)?, p(b)?])
            }
            None => json!(r.parse::<usize>().map_err(|_| CliError::usage(format!("resolution `{r}`")))?),
        },
    };
    let mut body = json!({ "plane_id": plane["plane_id"], "resolution": resolution });
    if let Some(f) = args.take("functions") {
        body["functions"] = json!(f.split(',').map(str::trim).collect::<Vec<_>>());
    }
    if let Some(t) = args.number::<f64>("tau")? {
        body["tau"] = json!(t);
    }
    if let Some(s) = args.number::<usize>("duals_step")? {
        body["duals_step"] = json!(s);
    }
    if let Some(c) = args.number::<usize>("level_count")? {
        body["level_count"] = json!(c);
    }
    ask(service, ApiRequest::post("/sample", &body))
}

fn cmd_serve(trace: &Path, listen: Option<String>, ui: bool, config: Option<&Path>) -> Result<(), CliError> {
    let mut cfg = ServiceConfig::load(config).map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(addr) = listen {
        cfg.listen = addr;
    }
    cfg.ui |= ui;
    let session = load_session(trace)?;
    let addr = cfg.listen.clone();
    let service = Arc::new(Service::with_session(cfg, session));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::environment(format!("starting runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::environment(format!("cannot listen on {addr}: {e}")))?;
        let bound = listener.local_addr().map_err(|e| CliError::environment(e.to_string()))?;
        println!("listening on http://{bound}");
        let _ = std::io::stdout().flush();
        nlpscope_service::serve(listener, service)
            .await
            .map_err(|e| CliError::runtime(format!("server stopped: {e}")))
    })
}
