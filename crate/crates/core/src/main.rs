fn main() {
    std::process::exit(qsr_core::cli::run(std::env::args_os()));
}
