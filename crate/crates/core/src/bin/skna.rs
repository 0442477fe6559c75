fn main() {
    std::process::exit(skna::cli::main_with_args(std::env::args_os()));
}
