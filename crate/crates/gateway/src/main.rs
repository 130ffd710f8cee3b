use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use iss_core::engine::{external_timeline, Scenario, World, LEE_AUTUMN};
use iss_gateway::server::{ServeOptions, Server, DEFAULT_SPEED};
use iss_gateway::weather::{Mode, WeatherProvider};
use iss_gateway::{read_trace, run_headless, schedule_timeline};

const HEADLESS_TICKS: u64 = 250;

/// Context-aware smart home simulator.
#[derive(Debug, Parser)]
#[command(name = "iss", version)]
struct Cli {
    /// Scenario document; the built-in lee_autumn scenario when omitted.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Run without a network and write the trace to --trace-out or stdout.
    #[arg(long)]
    headless: bool,
    /// Ticks to run (headless default 250; unlimited when serving).
    #[arg(long, value_name = "N")]
    ticks: Option<u64>,
    /// Overrides the scenario's noise seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "ADDR", default_value = "127.0.0.1:7878")]
    listen: String,
    /// Ticks per wall-clock second.
    #[arg(long, value_name = "TPS", default_value_t = DEFAULT_SPEED)]
    speed: f64,
    /// stub:<kind> or live:<region>
    #[arg(long, value_name = "SOURCE")]
    weather: Option<WeatherProvider>,
    #[arg(long, value_name = "PATH")]
    trace_out: Option<PathBuf>,
    /// Feed the commands recorded in a trace log back in as a schedule.
    #[arg(long, value_name = "PATH")]
    replay: Option<PathBuf>,
    /// Start paused; clients advance with `step` or `resume`.
    #[arg(long)]
    paused: bool,
}

fn load(cli: &Cli) -> Result<World, String> {
    let text = match &cli.scenario {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?,
        None => LEE_AUTUMN.to_owned(),
    };
    let mut scenario = Scenario::parse(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        scenario.config.seed = seed;
    }
    if let Some(WeatherProvider {
        mode: Mode::Stub(w),
        ..
    }) = &cli.weather
    {
        scenario.config.weather = *w;
    }
    if let Some(path) = &cli.replay {
        let log = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let trace = read_trace(&log).map_err(|e| format!("bad trace log: {e}"))?;
        schedule_timeline(&mut scenario, &external_timeline(&trace));
    }
    World::from_scenario(scenario).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !(cli.speed.is_finite() && cli.speed > 0.0) {
        eprintln!("iss: --speed must be positive");
        return ExitCode::from(2);
    }
    let world = match load(&cli) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("iss: scenario error: {e}");
            return ExitCode::from(2);
        }
    };

    if cli.headless {
        let ticks = cli.ticks.unwrap_or(HEADLESS_TICKS);
        let result = match &cli.trace_out {
            Some(path) => File::create(path)
                .and_then(|f| run_headless(world, ticks, &mut BufWriter::new(f))),
            None => run_headless(world, ticks, &mut io::stdout().lock()),
        };
        return match result {
            Ok(_) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("iss: {e}");
                ExitCode::FAILURE
            }
        };
    }

    let server = match Server::bind(&cli.listen) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("iss: cannot listen on {}: {e}", cli.listen);
            return ExitCode::from(3);
        }
    };
    if let Ok(addr) = server.local_addr() {
        eprintln!("iss: listening on {addr}");
    }
    let opts = ServeOptions {
        speed: cli.speed,
        start_paused: cli.paused,
        max_ticks: cli.ticks,
        trace_out: cli.trace_out.clone(),
        weather: cli.weather.clone(),
        ..ServeOptions::default()
    };
    match server.run(world, opts) {
        Ok(world) => {
            let _ = writeln!(io::stderr(), "iss: stopped at tick {}", world.tick_count());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("iss: {e}");
            ExitCode::FAILURE
        }
    }
}
