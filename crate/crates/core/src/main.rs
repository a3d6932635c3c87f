fn main() {
    std::process::exit(susygate::cli::main_with_args(std::env::args_os()));
}
