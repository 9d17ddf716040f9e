fn main() {
    std::process::exit(polymerlab::cli::main_with_args(std::env::args_os()));
}
