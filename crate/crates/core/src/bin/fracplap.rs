fn main() {
    std::process::exit(fracplap::cli::main_with_args(std::env::args_os()));
}
