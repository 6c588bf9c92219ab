fn main() {
    std::process::exit(simgap::cli::run(std::env::args_os()));
}
