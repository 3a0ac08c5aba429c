fn main() {
    std::process::exit(phase_align::cli::run_cli(std::env::args_os()));
}
