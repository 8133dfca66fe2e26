fn main() {
    std::process::exit(kan_aft::cli::main_with_args(std::env::args_os()));
}
