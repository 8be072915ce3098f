fn main() {
    std::process::exit(zetadist::cli::run());
}
