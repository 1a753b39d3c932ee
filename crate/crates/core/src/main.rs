fn main() {
    std::process::exit(visuomotor::cli::main_with_args(std::env::args_os()));
}
