fn main() {
    std::process::exit(mvfbm::cli::run(std::env::args_os()));
}
