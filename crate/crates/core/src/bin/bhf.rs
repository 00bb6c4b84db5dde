fn main() {
    std::process::exit(bhf::cli::main_with_args(std::env::args_os()));
}
