fn main() {
    std::process::exit(gqe::cli::main());
}
