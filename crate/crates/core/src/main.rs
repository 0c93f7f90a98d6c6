fn main() {
    std::process::exit(whitney_descent::cli::main_with_args(std::env::args_os()));
}
