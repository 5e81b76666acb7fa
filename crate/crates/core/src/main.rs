fn main() {
    std::process::exit(jcryd::cli::main_with_args(std::env::args_os()));
}
