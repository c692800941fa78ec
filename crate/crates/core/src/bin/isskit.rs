fn main() {
    std::process::exit(isskit::cli::run(std::env::args_os()));
}
