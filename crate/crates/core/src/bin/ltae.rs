fn main() {
    std::process::exit(ltae::cli::run(std::env::args_os()));
}
