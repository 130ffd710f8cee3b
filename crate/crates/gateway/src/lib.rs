//! Network gateway for the simulator: the NDJSON protocol, a combined
//! NDJSON/WebSocket server, weather sources and headless runs.

pub mod protocol;
pub mod server;
pub mod weather;

use std::collections::BTreeMap;
use std::io::{self, Write};

use iss_core::engine::{ClientCommand, Scenario, ScheduledCommand, TraceEvent, World};

/// Runs `ticks` ticks without a network, writing every trace event as one
/// NDJSON line.
pub fn run_headless(mut world: World, ticks: u64, out: &mut impl Write) -> io::Result<World> {
    for _ in 0..ticks {
        for event in world.tick(&[]) {
            writeln!(out, "{}", event.to_line())?;
        }
    }
    out.flush()?;
    Ok(world)
}

/// Parses an NDJSON trace log, skipping blank lines.
pub fn read_trace(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Adds a recorded command timeline to the scenario's schedule. Within a
/// tick the recorded commands come before the scenario's own, the same
/// order they had when they arrived as externals.
pub fn schedule_timeline(scenario: &mut Scenario, timeline: &BTreeMap<u64, Vec<ClientCommand>>) {
    let recorded = timeline.iter().flat_map(|(&at_tick, cmds)| {
        cmds.iter().map(move |command| ScheduledCommand {
            at_tick,
            command: command.clone(),
        })
    });
    let mut schedule: Vec<ScheduledCommand> = recorded.collect();
    schedule.append(&mut scenario.schedule);
    scenario.schedule = schedule;
}
