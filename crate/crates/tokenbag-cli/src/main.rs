fn main() {
    std::process::exit(tokenbag_cli::run_from_args());
}
