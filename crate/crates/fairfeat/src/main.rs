fn main() {
    std::process::exit(fairfeat::cli::run());
}
