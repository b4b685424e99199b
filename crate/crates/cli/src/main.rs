fn main() {
    std::process::exit(coverage_cli::run(std::env::args_os()));
}
