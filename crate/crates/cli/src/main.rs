fn main() {
    std::process::exit(qganf_cli::main_with_args(std::env::args_os()));
}
