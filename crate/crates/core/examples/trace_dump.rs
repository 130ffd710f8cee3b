//! Prints the trace of a headless run, without sensor readings.

use iss_core::engine::{load_scenario, TraceKind};

fn main() {
    let path = std::env::args().nth(1).expect("usage: trace_dump SCENARIO [TICKS]");
    let ticks: u64 = std::env::args().nth(2).map_or(250, |s| s.parse().expect("tick count"));
    let text = std::fs::read_to_string(path).expect("readable scenario");
    let mut world = load_scenario(&text).unwrap_or_else(|e| panic!("{e}"));
    let start = std::time::Instant::now();
    let trace = world.run(ticks);
    eprintln!("{ticks} ticks in {:?}", start.elapsed());
    for e in trace.iter().filter(|e| e.kind != TraceKind::SensorReading) {
        println!("{}", e.to_line());
    }
}
