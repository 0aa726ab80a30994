fn main() {
    std::process::exit(vfr::cli::run());
}
