fn main() {
    std::process::exit(spectrafuse::cli::run_cli(std::env::args_os()));
}
