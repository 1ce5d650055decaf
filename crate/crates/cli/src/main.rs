fn main() {
    std::process::exit(tcadetect_cli::main_with_args(std::env::args_os()));
}
