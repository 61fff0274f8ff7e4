fn main() {
    std::process::exit(rectops::cli::run());
}
