fn main() {
    std::process::exit(conflog::cli::run(std::env::args_os()));
}
