fn main() {
    std::process::exit(csaug::cli::run(std::env::args_os()));
}
