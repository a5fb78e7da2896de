fn main() {
    std::process::exit(bindlab::cli::run(std::env::args_os()));
}
