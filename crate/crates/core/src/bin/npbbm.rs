fn main() {
    std::process::exit(npbbm::cli::run(std::env::args_os()));
}
