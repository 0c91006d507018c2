fn main() {
    std::process::exit(radfield::cli::main_with_args(std::env::args_os()));
}
