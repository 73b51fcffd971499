use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mission_core::engine::SessionStatus;
use mission_core::model::{EducationLevel, LanguageProficiency, SessionConfig, UserProfile};
use mission_service::fixtures::FixturePaths;
use mission_service::persona::{run_persona, PersonaScript};
use mission_service::store::SnapshotStore;
use mission_service::{config, http, ServiceError, SessionService};

#[derive(Parser)]
#[command(name = "mission", about = "Milestone-driven advising dialogue service")]
struct Cli {
    #[command(flatten)]
    fixtures: FixtureArgs,
    #[command(subcommand)]
    command: Command,
}

/// Fixture overrides; anything omitted uses the shipped fixture.
#[derive(Args)]
struct FixtureArgs {
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    #[arg(long, global = true)]
    hierarchy: Option<PathBuf>,
    #[arg(long, global = true)]
    machine: Option<PathBuf>,
    /// Directory with queries.toml, responses.toml, lexicon.toml and milestones.toml.
    #[arg(long, global = true)]
    templates: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory for session snapshots; sessions stay in memory without it.
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
    /// Chat in the terminal, one user turn per line.
    Chat {
        #[arg(long, value_enum, default_value_t = Education::Intermediate)]
        education: Education,
        #[arg(long, value_enum, default_value_t = Proficiency::High)]
        proficiency: Proficiency,
        /// Registration answers such as "work authorization: yes".
        #[arg(long = "fact")]
        facts: Vec<String>,
    },
    /// Run a persona script and report every expectation.
    Replay {
        #[arg(long)]
        script: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Load and cross-check all fixtures.
    ValidateFixtures,
}

#[derive(Clone, Copy, ValueEnum)]
enum Education {
    Basic,
    Intermediate,
    Advanced,
}

#[derive(Clone, Copy, ValueEnum)]
enum Proficiency {
    Low,
    Medium,
    High,
}

fn paths(f: &FixtureArgs) -> FixturePaths {
    FixturePaths {
        kb: f.kb.clone(),
        hierarchy: f.hierarchy.clone(),
        machine: f.machine.clone(),
        templates: f.templates.clone(),
    }
}

fn chat(svc: &SessionService, profile: UserProfile) -> Result<(), ServiceError> {
    let s = svc.create_session(profile, None)?;
    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    let _ = write!(out, "you> ");
    let _ = out.flush();
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| ServiceError::io("<stdin>", e))?;
        if line.trim().is_empty() {
            let _ = write!(out, "you> ");
            let _ = out.flush();
            continue;
        }
        let outcome = svc.post_utterance(&s.id, &line)?;
        for u in &outcome.system_utterances {
            let _ = writeln!(out, "advisor> {}", u.text);
        }
        if outcome.status != SessionStatus::Active {
            let _ = writeln!(out, "[session {}]", outcome.status);
            return Ok(());
        }
        let _ = write!(out, "you> ");
        let _ = out.flush();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, ServiceError> {
    let engine = Arc::new(paths(&cli.fixtures).load()?);
    let config = config::from_env(SessionConfig::default())?;
    match cli.command {
        Command::ValidateFixtures => {
            println!(
                "fixtures ok: {} knowledge-graph nodes, {} states, {} transitions, {} query templates",
                engine.kg.node_count(),
                engine.machine.states.len(),
                engine.machine.transitions.len(),
                engine.queries.templates().len(),
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { script, json } => {
            let parsed = PersonaScript::load(&script)?;
            parsed.validate(&engine, &script.display().to_string())?;
            let report = run_persona(&engine, &parsed, config)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).map_err(|e| ServiceError::Config(e.to_string()))?);
            } else {
                println!("{report}");
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Chat { education, proficiency, facts } => {
            let profile = UserProfile {
                user_id: "terminal".into(),
                education_level: match education {
                    Education::Basic => EducationLevel::Basic,
                    Education::Intermediate => EducationLevel::Intermediate,
                    Education::Advanced => EducationLevel::Advanced,
                },
                language_proficiency: match proficiency {
                    Proficiency::Low => LanguageProficiency::Low,
                    Proficiency::Medium => LanguageProficiency::Medium,
                    Proficiency::High => LanguageProficiency::High,
                },
                registration_facts: facts.into_iter().collect(),
            };
            chat(&SessionService::in_memory(engine, config), profile)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { port, host, state_dir } => {
            let svc = match state_dir {
                Some(dir) => SessionService::persistent(engine, config, SnapshotStore::open(dir)?),
                None => SessionService::in_memory(engine, config),
            };
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new().map_err(|e| ServiceError::io("<runtime>", e))?;
            eprintln!("listening on http://{addr}/v1");
            rt.block_on(http::serve(Arc::new(svc), addr)).map_err(|e| ServiceError::io(addr.to_string(), e))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
