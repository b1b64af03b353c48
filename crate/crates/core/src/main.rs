fn main() {
    std::process::exit(dfrkit::cli::run())
}
