fn main() {
    std::process::exit(lfortho::cli::main());
}
