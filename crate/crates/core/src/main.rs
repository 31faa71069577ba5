fn main() {
    std::process::exit(dgp_core::cli::run(std::env::args_os()));
}
