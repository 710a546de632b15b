fn main() {
    std::process::exit(coreset_influence::cli::main_with_args(std::env::args_os()));
}
