use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rmfs_core::config::Config;
use rmfs_core::engine::{EmuRobot, EmuStation, EventLog};
use rmfs_core::ledger::dump::verify_text;
use rmfs_core::scenario::{self, Overrides};
use rmfs_core::wire::client::{spawn_robot, spawn_station};
use rmfs_core::wire::link::serve;
use rmfs_core::wire::server::{ServerOptions, WireServer};

#[derive(Parser)]
#[command(name = "rmfs", version, about = "RMFS control core: simulation runs, ledger checks, live wire mode")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario with simulated agents and write events.log, metrics.csv, ledger.csv
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated horizon in seconds
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the ledger epoch dump here
        #[arg(long)]
        epochs: Option<PathBuf>,
    },
    /// Recompute every ledger statistic from an epoch dump and report deviations
    VerifyLedger {
        #[arg(long)]
        dump: PathBuf,
    },
    /// Run with the wire protocol: robots, stations and feeds connect over TCP
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        bind: String,
        /// Pace the simulation against the wall clock
        #[arg(long)]
        wall_clock: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Connect emulated robots (and stations) to a running `serve`
    Emulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        connect: SocketAddr,
        /// Leave stations to a human console
        #[arg(long)]
        no_stations: bool,
    },
}

fn load(path: &PathBuf) -> anyhow::Result<Config> {
    Config::load(path).map_err(|e| anyhow::anyhow!("{}: invalid config: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.chain().any(|c| c.to_string().contains("invalid config"));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Run {
            config,
            seed,
            horizon,
            out,
            epochs,
        } => {
            let mut cfg = load(&config)?;
            Overrides { seed, horizon_s: horizon }.apply(&mut cfg);
            let res = scenario::run_to_dir(cfg, &out, epochs.as_deref())?;
            let s = &res.summary;
            println!(
                "{:?} at t={:.1}s: {} events, {} orders completed of {} accepted, {} parked",
                s.stop, s.end_time, s.events, s.completed_orders, s.accepted_orders, s.parked_orders
            );
            for f in &res.files {
                println!("wrote {}", f.display());
            }
        }
        Cmd::VerifyLedger { dump } => {
            let text = std::fs::read_to_string(&dump).with_context(|| dump.display().to_string())?;
            let report = verify_text(&text)?;
            println!("epochs {}", report.n);
            for d in &report.deviations {
                println!("{:<22} ledger={:.12} oracle={:.12} rel={:.3e}", d.statistic, d.ledger, d.oracle, d.relative);
            }
            let max = report.max_relative();
            println!("max relative deviation {max:.3e}");
            if max > 1e-9 {
                bail!("deviation above 1e-9");
            }
        }
        Cmd::Serve {
            config,
            bind,
            wall_clock,
            out,
        } => {
            let cfg = load(&config)?;
            let opts = ServerOptions {
                heartbeat: std::time::Duration::from_secs_f64(cfg.wire.heartbeat_s),
                missed_pongs: cfg.wire.missed_pongs,
                ..ServerOptions::default()
            };
            let addr_cell = std::sync::Arc::new(std::sync::OnceLock::new());
            let opts = ServerOptions {
                upgrade: Some(rmfs::bridge::hook(addr_cell.clone())),
                ..opts
            };
            let server = WireServer::bind(&bind, opts).with_context(|| format!("cannot listen on {bind}"))?;
            let addr = server.local_addr();
            let _ = addr_cell.set(addr);
            println!("listening on {addr} (station consoles: ws://{addr}/station/<id>)");
            std::fs::create_dir_all(&out)?;
            let events = out.join(scenario::EVENTS_FILE);
            let log = EventLog::to_writer(Box::new(std::fs::File::create(&events)?));
            let (summary, _) = serve(cfg, server, log, wall_clock)?;
            if !summary.fallback.is_empty() {
                println!("simulated in process: {}", summary.fallback.join(", "));
            }
            scenario::write_reports(&summary, &out)?;
            println!(
                "{:?} at t={:.1}s: {} orders completed, output in {}",
                summary.stop,
                summary.end_time,
                summary.completed_orders,
                out.display()
            );
        }
        Cmd::Emulate {
            config,
            connect,
            no_stations,
        } => {
            let cfg = load(&config)?;
            let layout = cfg.build_layout()?;
            let world = cfg.build_world(&layout)?;
            let mut handles = Vec::new();
            for r in world.robots() {
                let emu = EmuRobot::new(
                    r.id,
                    r.waypoint,
                    r.heading,
                    cfg.kinematics,
                    layout.spacing_m(),
                    cfg.agents.pickup_fault_rate,
                    cfg.sim.seed,
                );
                handles.push(spawn_robot(connect, emu, None));
            }
            if !no_stations {
                for s in layout.stations() {
                    handles.push(spawn_station(connect, EmuStation::new(s.id, &cfg.agents.station_errors)));
                }
            }
            for h in handles {
                if let Ok(Err(e)) = h.join() {
                    eprintln!("emulator: {e}");
                }
            }
        }
    }
    Ok(())
}
