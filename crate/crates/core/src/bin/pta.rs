fn main() {
    std::process::exit(pta::cli::main_with_args(std::env::args_os()));
}
