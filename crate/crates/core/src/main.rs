fn main() {
    std::process::exit(dromsos::cli::main_with_args(std::env::args_os()));
}
