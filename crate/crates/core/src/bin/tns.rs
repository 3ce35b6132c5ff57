fn main() {
    std::process::exit(tamed_ns::cli::main_with_args(std::env::args_os()));
}
