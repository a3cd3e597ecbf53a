fn main() {
    std::process::exit(chronotax::cli::main());
}
