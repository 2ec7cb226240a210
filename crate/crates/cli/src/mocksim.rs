//! Stand-in solver: reads a deck, writes tracer diagnostics next to it,
//! and echoes them on stdout.

use std::path::Path;
use std::process::ExitCode;

use mada::sim::mock_sim;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [deck] = args.as_slice() else {
        eprintln!("usage: mada-mocksim <deck_path>");
        return ExitCode::from(2);
    };
    match mock_sim(Path::new(deck)) {
        Ok(t) => {
            println!("{}", serde_json::to_string(&t).expect("plain struct"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
