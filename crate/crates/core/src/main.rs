fn main() {
    std::process::exit(gsr_core::cli::main());
}
