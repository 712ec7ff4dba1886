fn main() {
    std::process::exit(wiener4d::cli::main_with_args(std::env::args_os()));
}
