fn main() {
    std::process::exit(su2_quasichar::cli::main_from_env());
}
