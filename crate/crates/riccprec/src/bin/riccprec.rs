fn main() {
    std::process::exit(riccprec::cli::run());
}
