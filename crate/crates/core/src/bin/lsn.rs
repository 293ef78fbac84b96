fn main() {
    std::process::exit(learned_sensing::cli::run_from_args(std::env::args_os()));
}
