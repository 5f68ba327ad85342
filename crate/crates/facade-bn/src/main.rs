fn main() {
    std::process::exit(facade_bn::cli::run());
}
