fn main() {
    std::process::exit(khoeffding::cli::main());
}
