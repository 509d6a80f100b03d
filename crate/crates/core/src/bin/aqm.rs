fn main() {
    std::process::exit(aqm_core::cli::main());
}
