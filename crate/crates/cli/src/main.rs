use adr_cli::ops::{self, DEFAULT_ISO_BOUND};
use adr_cli::server;
use adr_core::fixtures;
use adr_core::io::{forest_doc, GraphDoc, Workspace};
use adr_core::wp::{check_validity_oracle, weakest_precondition};
use adr_core::{Decision, SessionState};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "adr",
    version,
    about = "Typed hypergraph architectures: productions, reconfiguration, recovery"
)]
struct Cli {
    /// Workspace file
    #[arg(long, short, global = true, env = "ADR_WORKSPACE")]
    workspace: Option<PathBuf>,
    /// Largest oracle bound (edges) accepted
    #[arg(long, global = true, env = "ADR_ISO_BOUND", default_value_t = DEFAULT_ISO_BOUND)]
    iso_bound: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load the workspace, replay every system and report problems
    Validate,
    /// Print a system's graph and tracking forest
    Show {
        system: Option<String>,
        /// Graphviz instead of text
        #[arg(long)]
        dot: bool,
        /// JSON documents instead of text
        #[arg(long, conflicts_with = "dot")]
        json: bool,
    },
    /// Apply a production at an edge (id like `e7`, or an edge name)
    Apply {
        system: String,
        production: String,
        edge: String,
    },
    /// Apply a reconfiguration rule at a vertex, or at its first match
    Reconfigure {
        system: String,
        rule: String,
        #[arg(long)]
        at: Option<String>,
    },
    /// Print the weakest precondition of a production for a postcondition
    Wp { production: String, formula: String },
    /// Check computed preconditions against bounded enumeration
    Oracle {
        /// Postcondition; defaults to the workspace invariant
        #[arg(long)]
        post: Option<String>,
        /// Restrict to one production
        #[arg(long)]
        production: Option<String>,
        /// Edge bound; defaults to the cap
        #[arg(long)]
        edges: Option<usize>,
    },
    /// Start a recovery session; without --auto, decisions are read from stdin
    Recover {
        system: String,
        /// File holding the invariant formula
        #[arg(long)]
        invariant: Option<PathBuf>,
        /// Decide automatically until the session ends
        #[arg(long)]
        auto: bool,
    },
    /// Serve the HTTP interface
    Serve {
        #[arg(long, env = "ADR_PORT", default_value_t = 8080)]
        port: u16,
    },
    /// Write the travel, servers and payment workspaces into a directory
    Fixtures {
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
}

fn workspace_path(cli: &Cli) -> Result<&Path> {
    cli.workspace
        .as_deref()
        .context("no workspace given (use --workspace or ADR_WORKSPACE)")
}

fn load(cli: &Cli) -> Result<Workspace> {
    let p = workspace_path(cli)?;
    Workspace::load(p).with_context(|| format!("loading {}", p.display()))
}

fn save(cli: &Cli, ws: &Workspace) -> Result<()> {
    let p = workspace_path(cli)?;
    ws.save(p).with_context(|| format!("saving {}", p.display()))
}

fn show(ws: &Workspace, name: &str, dot: bool, as_json: bool) -> Result<()> {
    let e = ops::entry(ws, name)?;
    let sys = &e.system;
    if dot {
        print!("{}", sys.graph.to_dot(name));
        print!("{}", sys.forest_dot(name));
    } else if as_json {
        let doc = serde_json::json!({
            "name": name,
            "graph": GraphDoc::from(&sys.graph),
            "forest": forest_doc(sys),
            "session": e.session.as_ref().map(ops::SessionView::of),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("system {name}: {} events", sys.events.len());
        println!("graph:\n{}", sys.graph);
        print!("forest:\n{}", sys.forest_text());
        if let Some(s) = &e.session {
            println!("recovery: {:?}", s.session.state);
        }
    }
    Ok(())
}

fn print_session(v: &ops::SessionView) {
    println!("state: {:?}", v.state);
    println!("condition: {}", v.condition);
    for c in &v.candidates {
        println!("candidate: {} at {}  pre: {}", c.production, c.edge, c.precondition);
    }
    if !v.subtrees.is_empty() {
        let s: Vec<String> = v.subtrees.iter().map(|x| x.to_string()).collect();
        println!("parseable subtrees: {}", s.join(" "));
    }
}

const PROMPT_HELP: &str = "decisions: propose | accept <production> <edge> | iterate <production> <edge> | parse | subtree <vertex> | abandon | quit";

fn read_decision(ws: &Workspace, system: &str, line: &str) -> Result<Option<Decision>> {
    let words: Vec<&str> = line.split_whitespace().collect();
    let g = &ops::entry(ws, system)?.system.graph;
    Ok(Some(match words.as_slice() {
        ["propose"] => Decision::Propose,
        ["accept", p, e] => Decision::AcceptProduction {
            production: p.to_string(),
            edge: ops::parse_edge(g, e)?,
        },
        ["iterate", p, e] => Decision::Iterate {
            production: p.to_string(),
            edge: ops::parse_edge(g, e)?,
        },
        ["parse"] => Decision::RequestParse,
        ["subtree", v] => Decision::Parse {
            vertex: ops::parse_vertex(v)?,
        },
        ["abandon"] => Decision::Abandon,
        ["quit"] => return Ok(None),
        _ => bail!("unrecognised decision `{line}`"),
    }))
}

/// Reads decisions from stdin until the session ends, `quit` or end of input.
fn interact(ws: &mut Workspace, system: &str, mut v: ops::SessionView) -> Result<ops::SessionView> {
    if v.state == SessionState::Violated {
        v = ops::decide(ws, system, Decision::Propose)?;
    }
    let stdin = std::io::stdin();
    let mut line = String::new();
    while !v.state.is_final() {
        print_session(&v);
        println!("{PROMPT_HELP}");
        print!("> ");
        std::io::stdout().flush()?;
        line.clear();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        match read_decision(ws, system, line.trim()).and_then(|d| match d {
            Some(d) => Ok(Some(ops::decide(ws, system, d)?)),
            None => Ok(None),
        }) {
            Ok(Some(next)) => v = next,
            Ok(None) => break,
            Err(e) => println!("rejected: {e:#}"),
        }
    }
    Ok(v)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Validate => {
            let ws = load(cli)?;
            let mut ok = true;
            for (name, e) in &ws.systems {
                let report = e.system.graph.validate(&ws.style.types);
                if let Err(err) = e.system.check_integrity() {
                    println!("{name}: {err}");
                    ok = false;
                } else if !report.is_ok() {
                    println!("{name}: {report}");
                    ok = false;
                } else {
                    println!("{name}: ok ({} events)", e.system.events.len());
                }
            }
            Ok(ok)
        }
        Cmd::Show { system, dot, json } => {
            let ws = load(cli)?;
            match system {
                Some(s) => show(&ws, s, *dot, *json)?,
                None => {
                    for name in ws.systems.keys() {
                        show(&ws, name, *dot, *json)?;
                    }
                }
            }
            Ok(true)
        }
        Cmd::Apply {
            system,
            production,
            edge,
        } => {
            let mut ws = load(cli)?;
            let step = ops::apply_production(&mut ws, system, production, edge)?;
            save(cli, &ws)?;
            let created: Vec<String> = step.created.iter().map(|e| e.to_string()).collect();
            println!("{production} at {}: created {}", step.vertex, created.join(" "));
            Ok(true)
        }
        Cmd::Reconfigure { system, rule, at } => {
            let mut ws = load(cli)?;
            let root = ops::apply_rule(&mut ws, system, rule, at.as_deref())?;
            save(cli, &ws)?;
            println!("{rule}: new subtree rooted at {root}");
            print!("{}", ops::entry(&ws, system)?.system.forest_text());
            Ok(true)
        }
        Cmd::Wp { production, formula } => {
            let ws = load(cli)?;
            let p = ws
                .style
                .production(production)
                .with_context(|| format!("no production `{production}`"))?;
            let phi = ops::formula(&ws, formula)?;
            let w = weakest_precondition(p, &phi, &BTreeMap::new(), &ws.style.types)?;
            println!("{}", w.formula);
            let vars: Vec<String> = w.lhs_vars.iter().map(|v| v.to_string()).collect();
            println!("left-hand variables: {}", vars.join(", "));
            for n in &w.notes {
                println!("note: {n}");
            }
            Ok(true)
        }
        Cmd::Oracle {
            post,
            production,
            edges,
        } => {
            let ws = load(cli)?;
            let bounds = ops::oracle_bounds(edges.unwrap_or(cli.iso_bound), cli.iso_bound)?;
            let phi = match post {
                Some(t) => ops::formula(&ws, t)?,
                None => ws
                    .invariant
                    .clone()
                    .context("no --post given and the workspace has no invariant")?,
            };
            let mut ok = true;
            for p in ws.style.productions() {
                if production.as_ref().is_some_and(|n| n != &p.name) {
                    continue;
                }
                let w = weakest_precondition(p, &phi, &BTreeMap::new(), &ws.style.types)?;
                let r = check_validity_oracle(p, &w, &phi, &BTreeMap::new(), &ws.style.types, bounds)?;
                println!(
                    "{}: {} graphs, {} applications, {} counterexamples, {} weakness gaps",
                    p.name,
                    r.graphs,
                    r.applications,
                    r.counterexamples.len(),
                    r.weakness_gaps
                );
                if let Some(c) = r.counterexamples.first() {
                    println!("  first counterexample:\n{}", c.graph);
                    ok = false;
                }
            }
            Ok(ok)
        }
        Cmd::Recover {
            system,
            invariant,
            auto,
        } => {
            let mut ws = load(cli)?;
            let text = match invariant {
                Some(p) => Some(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
                None => None,
            };
            let mut v = ops::start_recovery(&mut ws, system, text.as_deref().map(str::trim))?;
            if *auto {
                v = ops::run_auto(&mut ws, system)?;
            } else {
                v = interact(&mut ws, system, v)?;
            }
            save(cli, &ws)?;
            print_session(&v);
            Ok(v.state != SessionState::Abandoned)
        }
        Cmd::Serve { port } => {
            let path = workspace_path(cli)?.to_path_buf();
            let ws = load(cli)?;
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("serving {} on port {port}", path.display());
            rt.block_on(server::serve(server::shared(ws, Some(path)), *port))?;
            Ok(true)
        }
        Cmd::Fixtures { dir } => {
            std::fs::create_dir_all(dir)?;
            for (name, ws) in fixtures::workspaces() {
                let p = dir.join(format!("{name}.json"));
                ws.save(&p)?;
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            if cli.workspace.is_none() {
                eprintln!("hint: `adr fixtures DIR` writes example workspaces");
            }
            ExitCode::from(2)
        }
    }
}
