fn main() {
    std::process::exit(freesum::cli::main_from_env());
}
