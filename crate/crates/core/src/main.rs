fn main() {
    std::process::exit(forgetting_lab::cli::main());
}
