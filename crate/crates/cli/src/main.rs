//! `voselect`: command-line front end.
//!
//! Exit codes: 0 success, 1 validation or usage failure, 2 runtime failure
//! (including a run that halted).

mod backend;

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;
use voselect_core::{AttributeValue, CmpOp, Predicate, RunState};
use voselect_server::ErrorBody;

use backend::Backend;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{}", .body.message)]
    Api { validation: bool, body: ErrorBody },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Api { validation: true, .. } => 1,
            CliError::Api { .. } | CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "voselect", version, about = "Partner and service selection for virtual organizations")]
struct Cli {
    /// Local data directory (ignored with --url).
    #[arg(long, global = true, env = "VOSELECT_DATA_DIR", default_value = "voselect-data")]
    data_dir: PathBuf,
    /// Base URL of a running service, e.g. http://localhost:8080.
    #[arg(long, global = true, env = "VOSELECT_URL")]
    url: Option<String>,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partners, services and their descriptions.
    #[command(subcommand)]
    Registry(RegistryCmd),
    /// Relations between registered elements.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// VO specifications.
    #[command(subcommand)]
    Spec(SpecCmd),
    /// Planning runs.
    #[command(subcommand)]
    Run(RunCmd),
    /// Monitoring indicators and the notification feed.
    #[command(subcommand)]
    Indicators(IndicatorsCmd),
    /// Serve the HTTP API over the data directory.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Subcommand)]
enum RegistryCmd {
    /// Import a `{elements, competences, services}` document (`-` for stdin).
    Import { file: String },
    /// Print (or write) the registry document.
    Export {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Register one element from `{element, descriptions}`.
    Add { file: String },
    /// Find elements matching every condition.
    Search {
        /// `PATH OP VALUE [UNIT]`, e.g. `capability.workers >= 20 person`.
        #[arg(long = "where", value_name = "CONDITION")]
        conditions: Vec<String>,
        /// JSON array of predicates (`-` for stdin).
        #[arg(long)]
        query: Option<String>,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Import a `{relations}` document.
    Import { file: String },
    Export {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Add one relation.
    AddRelation {
        #[arg(long)]
        id: String,
        #[arg(long = "type")]
        relation_type: String,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        /// `NAME=VALUE[ UNIT]`; repeatable.
        #[arg(long = "attr")]
        attributes: Vec<String>,
    },
}

#[derive(Subcommand)]
enum SpecCmd {
    /// Check a specification; exits 1 and lists violations when invalid.
    Validate { file: String },
    /// Store a specification and print its id.
    Put { file: String },
    Show { id: String },
}

#[derive(Args)]
struct SpecSource {
    /// Specification file (`-` for stdin).
    #[arg(long, conflicts_with = "spec_id", required_unless_present = "spec_id")]
    spec: Option<String>,
    /// Id of a stored specification.
    #[arg(long)]
    spec_id: Option<String>,
}

#[derive(Subcommand)]
enum RunCmd {
    /// Create a run and advance it.
    Start {
        #[command(flatten)]
        source: SpecSource,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        ga_population: Option<usize>,
        #[arg(long)]
        ga_generations: Option<usize>,
        /// Phase-3 fitness threshold, overriding the specification.
        #[arg(long)]
        threshold: Option<f64>,
        /// Enumerate every assignment instead of running the GA.
        #[arg(long)]
        oracle: bool,
        /// Stop once this state is reached.
        #[arg(long, default_value = "performance_ranked")]
        until: RunState,
    },
    Advance { id: String },
    /// Return to an earlier state, optionally amending the specification.
    Loopback {
        id: String,
        #[arg(long = "to")]
        target: RunState,
        /// Amendment document; merged as a JSON merge patch unless --replace.
        #[arg(long)]
        amend: Option<String>,
        #[arg(long, requires = "amend")]
        replace: bool,
    },
    Variants { id: String },
    /// Register the chosen variant as a new partner.
    Incept {
        id: String,
        #[arg(long, default_value_t = 1)]
        rank: u32,
        #[arg(long)]
        override_stale: bool,
    },
    Show { id: String },
}

#[derive(Subcommand)]
enum IndicatorsCmd {
    /// Define an indicator from its JSON definition.
    Define { file: String },
    /// Evaluate an indicator against the live stores.
    Eval { id: String },
    /// Page through the notification feed.
    Feed {
        #[arg(long, default_value_t = 0)]
        cursor: u64,
        #[arg(long, default_value_t = 100)]
        limit: usize,
    },
    List,
}

fn read_input(path: &str) -> Result<Value, CliError> {
    let text = if path == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::Usage(format!("stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{path}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{path}: {e}")))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values serialize")
}

fn write_or_print(v: &Value, output: Option<PathBuf>) -> Result<(), CliError> {
    match output {
        Some(p) => std::fs::write(&p, pretty(v) + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => {
            println!("{}", pretty(v));
            Ok(())
        }
    }
}

fn parse_value(raw: &str, unit: Option<&str>) -> AttributeValue {
    match (raw.parse::<f64>(), unit) {
        (Ok(x), Some(u)) => AttributeValue::number(x, u),
        (Ok(x), None) => AttributeValue::plain(x),
        (Err(_), _) => match raw {
            "true" | "false" => AttributeValue::Bool { value: raw == "true" },
            _ => AttributeValue::text(raw),
        },
    }
}

fn parse_condition(cond: &str) -> Result<Predicate, CliError> {
    let parts: Vec<&str> = cond.split_whitespace().collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(CliError::Usage(format!("condition `{cond}` is not `PATH OP VALUE [UNIT]`")));
    }
    let op: CmpOp = serde_json::from_value(Value::String(parts[1].to_string()))
        .map_err(|_| CliError::Usage(format!("unknown operator `{}`", parts[1])))?;
    Ok(Predicate::new(parts[0], op, parse_value(parts[2], parts.get(3).copied())))
}

fn parse_attribute(raw: &str) -> Result<(String, AttributeValue), CliError> {
    let (name, rest) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("attribute `{raw}` is not NAME=VALUE")))?;
    let mut it = rest.split_whitespace();
    let value = it.next().unwrap_or("");
    Ok((name.to_string(), parse_value(value, it.next())))
}

struct Out {
    json: bool,
}

impl Out {
    /// Prints `v` as JSON in machine mode, otherwise the human rendering.
    fn show(&self, v: &Value, human: impl FnOnce(&Value) -> String) {
        if self.json {
            println!("{}", pretty(v));
        } else {
            println!("{}", human(v));
        }
    }
}

fn fmt_num(v: &Value) -> String {
    v.as_f64().map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn variant_line(v: &Value) -> String {
    let assignment: Vec<&str> = v["assignment"]
        .as_array()
        .map(|a| a.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default();
    let perf = v["performance"]
        .as_array()
        .map(|p| p.iter().map(fmt_num).collect::<Vec<_>>().join(", "))
        .unwrap_or_default();
    let mut line = format!(
        "#{:<3} fitness {}  [{}]",
        v["rank"].as_u64().map(|r| r.to_string()).unwrap_or_else(|| "-".into()),
        fmt_num(&v["fitness"]),
        assignment.join(", ")
    );
    if !perf.is_empty() {
        line += &format!("  performance ({perf})");
    }
    if v["flagged"].as_bool() == Some(true) {
        line += "  flagged";
    }
    if v["stale"].as_bool() == Some(true) {
        line += "  STALE";
    }
    line
}

fn run_summary(run: &Value) -> String {
    let mut s = format!(
        "run {}  state {}",
        run["run_id"].as_str().unwrap_or("?"),
        run["state"].as_str().unwrap_or("?")
    );
    if let Some(d) = run["diagnostic"].as_str() {
        s += &format!("\n  {d}");
    }
    if let Some(vs) = run["variants"].as_array() {
        s += &format!("\n  {} variant(s)", vs.len());
        for v in vs.iter().take(5) {
            s += &format!("\n  {}", variant_line(v));
        }
    }
    if let Some(vo) = run["incepted"].as_str() {
        s += &format!("\n  incepted as {vo}");
    }
    s
}

/// A halted run is reported like any other, then turns into exit code 2.
fn check_halted(run: &Value) -> Result<(), CliError> {
    if run["state"] == "halted" {
        let why = run["diagnostic"].as_str().unwrap_or("run halted");
        return Err(CliError::Runtime(format!("run halted: {why}")));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let out = Out { json: cli.json };
    if let Command::Serve { port } = cli.command {
        if cli.url.is_some() {
            return Err(CliError::Usage("`serve` runs locally; drop --url".into()));
        }
        let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
        return rt
            .block_on(voselect_server::serve(port, cli.data_dir))
            .map_err(|e| CliError::Runtime(e.to_string()));
    }
    let api = match &cli.url {
        Some(url) => Backend::remote(url),
        None => Backend::local(cli.data_dir.clone())?,
    };
    match cli.command {
        Command::Serve { .. } => unreachable!("handled above"),
        Command::Registry(cmd) => match cmd {
            RegistryCmd::Import { file } => {
                let r = api.post("/v1/registry", Some(read_input(&file)?))?;
                out.show(&r, |r| format!("imported {} element(s), {} event(s)", r["imported"], r["events"]));
            }
            RegistryCmd::Export { output } => write_or_print(&api.get("/v1/registry")?, output)?,
            RegistryCmd::Add { file } => {
                let r = api.post("/v1/elements", Some(read_input(&file)?))?;
                out.show(&r, |r| format!("registered {}", r["id"].as_str().unwrap_or("?")));
            }
            RegistryCmd::Search { conditions, query } => {
                let mut preds: Vec<Value> = match query {
                    Some(q) => serde_json::from_value(read_input(&q)?)
                        .map_err(|e| CliError::Usage(format!("query: {e}")))?,
                    None => Vec::new(),
                };
                for c in &conditions {
                    preds.push(serde_json::to_value(parse_condition(c)?).expect("predicates serialize"));
                }
                let r = api.post("/v1/elements/search", Some(Value::Array(preds)))?;
                out.show(&r, |r| {
                    r.as_array()
                        .map(|es| {
                            es.iter()
                                .map(|e| format!("{}\t{}\t{}", e["id"].as_str().unwrap_or(""), e["kind"].as_str().unwrap_or(""), e["name"].as_str().unwrap_or("")))
                                .collect::<Vec<_>>()
                                .join("\n")
                        })
                        .unwrap_or_default()
                });
            }
        },
        Command::Graph(cmd) => match cmd {
            GraphCmd::Import { file } => {
                let r = api.post("/v1/graph", Some(read_input(&file)?))?;
                out.show(&r, |r| format!("imported {} relation(s), {} event(s)", r["imported"], r["events"]));
            }
            GraphCmd::Export { output } => write_or_print(&api.get("/v1/graph")?, output)?,
            GraphCmd::AddRelation {
                id,
                relation_type,
                source,
                target,
                attributes,
            } => {
                let mut attrs = serde_json::Map::new();
                for a in &attributes {
                    let (k, v) = parse_attribute(a)?;
                    attrs.insert(k, serde_json::to_value(v).expect("attributes serialize"));
                }
                let body = json!({"id": id, "type": relation_type, "source": source, "target": target, "attributes": attrs});
                let r = api.post("/v1/relations", Some(body))?;
                out.show(&r, |r| {
                    let mut s = format!("added {}", r["id"].as_str().unwrap_or("?"));
                    if let Some(stale) = r["stale_runs"].as_array() {
                        s += &format!("; {} run(s) now hold stale variants", stale.len());
                    }
                    s
                });
            }
        },
        Command::Spec(cmd) => match cmd {
            SpecCmd::Validate { file } => {
                let r = api.post("/v1/specs/validate", Some(read_input(&file)?))?;
                out.show(&r, |r| {
                    let vs = r["violations"].as_array().cloned().unwrap_or_default();
                    if vs.is_empty() {
                        "valid".to_string()
                    } else {
                        vs.iter()
                            .map(|v| format!("{}: {} ({})", v["category"].as_str().unwrap_or(""), v["message"].as_str().unwrap_or(""), v["path"].as_str().unwrap_or("")))
                            .collect::<Vec<_>>()
                            .join("\n")
                    }
                });
                if r["valid"] != true {
                    return Err(CliError::Api {
                        validation: true,
                        body: ErrorBody {
                            code: "invalid_spec".into(),
                            message: "specification is invalid".into(),
                            detail: r,
                        },
                    });
                }
            }
            SpecCmd::Put { file } => {
                let r = api.post("/v1/specs", Some(read_input(&file)?))?;
                out.show(&r, |r| r["id"].as_str().unwrap_or("").to_string());
            }
            SpecCmd::Show { id } => println!("{}", pretty(&api.get(&format!("/v1/specs/{id}"))?)),
        },
        Command::Run(cmd) => match cmd {
            RunCmd::Start {
                source,
                seed,
                ga_population,
                ga_generations,
                threshold,
                oracle,
                until,
            } => {
                let mut spec = match (source.spec, source.spec_id) {
                    (Some(file), _) => read_input(&file)?,
                    (None, Some(id)) => api.get(&format!("/v1/specs/{id}"))?,
                    (None, None) => return Err(CliError::Usage("give --spec or --spec-id".into())),
                };
                if let Some(t) = threshold {
                    if !spec["thresholds"].is_object() {
                        spec["thresholds"] = json!({});
                    }
                    spec["thresholds"]["phase3_threshold"] = json!(t);
                }
                let mut ga = json!({"seed": seed});
                if let Some(p) = ga_population {
                    ga["population_size"] = json!(p);
                }
                if let Some(g) = ga_generations {
                    ga["generations"] = json!(g);
                }
                let body = json!({"spec": spec, "config": {"ga": ga, "oracle": oracle}, "until": until});
                let run = api.post("/v1/runs", Some(body))?;
                out.show(&run, run_summary);
                check_halted(&run)?;
            }
            RunCmd::Advance { id } => {
                let run = api.post(&format!("/v1/runs/{id}/advance"), None)?;
                out.show(&run, run_summary);
                check_halted(&run)?;
            }
            RunCmd::Loopback {
                id,
                target,
                amend,
                replace,
            } => {
                let amendment = match amend {
                    Some(f) => {
                        let body = read_input(&f)?;
                        json!({"mode": if replace { "replace" } else { "merge" }, "body": body})
                    }
                    None => Value::Null,
                };
                let run = api.post(
                    &format!("/v1/runs/{id}/loopback"),
                    Some(json!({"target": target, "amendment": amendment})),
                )?;
                out.show(&run, run_summary);
            }
            RunCmd::Variants { id } => {
                let vs = api.get(&format!("/v1/runs/{id}/variants"))?;
                out.show(&vs, |vs| {
                    vs.as_array()
                        .map(|a| a.iter().map(variant_line).collect::<Vec<_>>().join("\n"))
                        .unwrap_or_default()
                });
            }
            RunCmd::Incept {
                id,
                rank,
                override_stale,
            } => {
                let r = api.post(
                    &format!("/v1/runs/{id}/incept"),
                    Some(json!({"rank": rank, "override_stale": override_stale})),
                )?;
                out.show(&r, |r| format!("incepted {}", r["vo_id"].as_str().unwrap_or("?")));
            }
            RunCmd::Show { id } => {
                let run = api.get(&format!("/v1/runs/{id}"))?;
                out.show(&run, run_summary);
            }
        },
        Command::Indicators(cmd) => match cmd {
            IndicatorsCmd::Define { file } => {
                let r = api.post("/v1/indicators", Some(read_input(&file)?))?;
                out.show(&r, |r| format!("defined; value {}", r["value"]));
            }
            IndicatorsCmd::Eval { id } => {
                let r = api.get(&format!("/v1/indicators/{id}"))?;
                out.show(&r, |r| match r["value"]["value"].as_f64() {
                    Some(x) => format!("{id} = {x}"),
                    None => format!("{id} unavailable: {}", r["value"]["reason"].as_str().unwrap_or("")),
                });
            }
            IndicatorsCmd::Feed { cursor, limit } => {
                let r = api.get(&format!("/v1/notifications?cursor={cursor}&limit={limit}"))?;
                out.show(&r, |r| {
                    let mut lines: Vec<String> = r["items"]
                        .as_array()
                        .map(|a| a.iter().map(|n| n.to_string()).collect())
                        .unwrap_or_default();
                    lines.push(format!("next cursor {}", r["next_cursor"]));
                    lines.join("\n")
                });
            }
            IndicatorsCmd::List => println!("{}", pretty(&api.get("/v1/indicators")?)),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let json = cli.json;
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match (&e, json) {
                (CliError::Api { body, .. }, true) => {
                    eprintln!("{}", serde_json::to_string_pretty(body).expect("error bodies serialize"))
                }
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
