fn main() {
    std::process::exit(qbm_cli::run(std::env::args_os()));
}
