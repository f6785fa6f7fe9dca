fn main() {
    std::process::exit(dsgd::cli::main_with_args(std::env::args_os()));
}
