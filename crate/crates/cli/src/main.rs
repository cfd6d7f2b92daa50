fn main() {
    std::process::exit(equivar_cli::main_with(std::env::args_os()));
}
