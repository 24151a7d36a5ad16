fn main() {
    std::process::exit(reparo_cli::cli::main_with_args(std::env::args_os()));
}
