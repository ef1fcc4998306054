fn main() {
    std::process::exit(mts_core::cli::run(std::env::args_os()));
}
