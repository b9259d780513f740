use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cellreach::cloudkit::ply::{self, PlyFormat};
use cellreach::cloudkit::{OrientedBox, PointCloud, ToolOp};
use cellreach_gateway::api::{router, AppState};
use cellreach_gateway::config::Config;
use cellreach_gateway::scenario::{generate_task, CloudSource, Task};
use cellreach_gateway::{run_scenario, GatewayError, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cellreach", version, about = "Workcell reachability feasibility analysis")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = cellreach_gateway::config::CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Extra robot catalog directory; overrides the config file.
    #[arg(long, global = true)]
    catalog_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    TaskA,
    TaskB,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a scenario; exit 0 iff every zone has a path.
    Run { scenario: PathBuf },
    /// Emit a synthetic Task A or Task B scenario.
    GenScene {
        task: TaskArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Task B: leave the machine roof out of the scan.
        #[arg(long)]
        no_roof: bool,
        /// Task B: inject this many stray points inside the machine cavity.
        #[arg(long, default_value_t = 0)]
        floating: usize,
        /// Embed the scene spec instead of writing a PLY next to the scenario.
        #[arg(long)]
        inline: bool,
        #[arg(long)]
        out: PathBuf,
        /// File stem; derived from the task when absent.
        #[arg(long)]
        name: Option<String>,
    },
    /// Apply one toolbox op to a PLY file.
    Tool {
        input: PathBuf,
        /// Op as JSON, e.g. `{"op":"downsample","leaf":0.01}`.
        #[arg(long)]
        op: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Workspace box as JSON, used by a crop without its own box.
        #[arg(long)]
        workspace: Option<String>,
        #[arg(long)]
        ascii: bool,
    },
    /// Host the HTTP API and the static UI.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn config(cli: &Cli) -> Result<Config> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(dir) = &cli.catalog_dir {
        cfg.catalog_dir = Some(dir.clone());
    }
    Ok(cfg)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| GatewayError::storage(format!("{}: {e}", path.display())))
}

fn gen_scene(task: Task, seed: u64, inline: bool, out: &Path, name: &str) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| GatewayError::storage(format!("{}: {e}", out.display())))?;
    let mut g = generate_task(task, seed)?;
    if !inline {
        let ply_name = format!("{name}.ply");
        write(&out.join(&ply_name), ply::write_exact(&g.cloud))?;
        g.scenario.cloud = CloudSource::Ply(ply_name.into());
    }
    let scenario_path = out.join(format!("{name}.json"));
    write(&scenario_path, g.scenario.to_json())?;
    let mut truth = serde_json::to_string_pretty(&g.truth).expect("truth serializes");
    truth.push('\n');
    write(&out.join(format!("{name}.truth.json")), truth)?;
    println!("{}", scenario_path.display());
    Ok(())
}

fn tool(input: &Path, op: &str, output: &Path, workspace: Option<&str>, ascii: bool) -> Result<()> {
    let op: ToolOp = serde_json::from_str(op).map_err(|e| GatewayError::parse("tool_op", e))?;
    let ws: Option<OrientedBox> = workspace
        .map(|w| serde_json::from_str(w).map_err(|e| GatewayError::parse("workspace", e)))
        .transpose()?;
    if !input.is_file() {
        return Err(GatewayError::validation(
            "referenced_file",
            format!("{} does not exist", input.display()),
        ));
    }
    let cloud: PointCloud = ply::read_file(input)?;
    let (out, summary) = op.apply(&cloud, ws.as_ref())?;
    let format = if ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    write(output, ply::write(&out, format))?;
    println!("{}", serde_json::json!({ "op": op.name(), "summary": summary }));
    Ok(())
}

async fn serve(mut cfg: Config, bind: Option<String>, data_dir: Option<PathBuf>, static_dir: Option<PathBuf>) -> Result<()> {
    if let Some(b) = bind {
        cfg.bind = b;
    }
    if let Some(d) = data_dir {
        cfg.data_dir = d;
    }
    if let Some(s) = static_dir {
        cfg.static_dir = Some(s);
    }
    let app = AppState::from_config(&cfg)?;
    let listener = tokio::net::TcpListener::bind(&cfg.bind)
        .await
        .map_err(|e| GatewayError::storage(format!("bind {}: {e}", cfg.bind)))?;
    tracing::info!(bind = %cfg.bind, data_dir = %cfg.data_dir.display(), "serving");
    axum::serve(listener, router(app, cfg.static_dir.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| GatewayError::storage(format!("server: {e}")))
}

fn main_inner(cli: Cli) -> Result<i32> {
    let cfg = config(&cli)?;
    match cli.command {
        Command::Run { scenario } => {
            let out = run_scenario(&scenario, &cfg.catalog()?)?;
            for z in &out.report.zones {
                eprintln!("{}: {}", z.zone_id, serde_json::to_string(&z.status).expect("status"));
            }
            println!("{}", out.report_path.display());
            Ok(out.exit_code())
        }
        Command::GenScene {
            task,
            seed,
            no_roof,
            floating,
            inline,
            out,
            name,
        } => {
            let (task, stem) = match task {
                TaskArg::TaskA => (Task::A, "task_a".to_string()),
                TaskArg::TaskB => {
                    let mut stem = String::from("task_b");
                    if no_roof {
                        stem.push_str("_roofless");
                    }
                    if floating > 0 {
                        stem.push_str("_floating");
                    }
                    (
                        Task::B {
                            with_roof: !no_roof,
                            floating_points: floating,
                        },
                        stem,
                    )
                }
            };
            gen_scene(task, seed, inline, &out, name.as_deref().unwrap_or(&stem))?;
            Ok(0)
        }
        Command::Tool {
            input,
            op,
            output,
            workspace,
            ascii,
        } => {
            tool(&input, &op, &output, workspace.as_deref(), ascii)?;
            Ok(0)
        }
        Command::Serve {
            bind,
            data_dir,
            static_dir,
        } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| GatewayError::internal(e))?;
            rt.block_on(serve(cfg, bind, data_dir, static_dir))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}
