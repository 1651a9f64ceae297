fn main() {
    std::process::exit(scatterlab::cli::main_with_args(std::env::args_os()));
}
