fn main() {
    std::process::exit(dqkit::cli::run_cli(std::env::args_os()));
}
