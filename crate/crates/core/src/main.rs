fn main() {
    std::process::exit(gruwe::cli::run(std::env::args_os()));
}
