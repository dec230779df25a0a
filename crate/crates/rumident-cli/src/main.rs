//! Binary entry point: all logic lives in the library so tests can drive it.

fn main() {
    std::process::exit(rumident_cli::run(std::env::args()));
}
