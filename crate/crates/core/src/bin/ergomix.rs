fn main() {
    std::process::exit(ergomix::cli::run(std::env::args_os()));
}
