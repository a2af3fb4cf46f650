fn main() {
    std::process::exit(nlcover::cli::run(std::env::args()));
}
