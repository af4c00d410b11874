fn main() {
    std::process::exit(spasim::cli::run(std::env::args_os()));
}
