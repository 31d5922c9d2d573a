fn main() {
    std::process::exit(fast_app::cli::run(std::env::args().collect()));
}
