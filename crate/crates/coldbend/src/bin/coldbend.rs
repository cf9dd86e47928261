fn main() {
    std::process::exit(coldbend::cli::run(std::env::args_os()));
}
