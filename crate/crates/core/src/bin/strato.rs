fn main() {
    std::process::exit(strato::cli::run(std::env::args_os()));
}
