fn main() {
    std::process::exit(stable_gof::cli::main_with_args(std::env::args_os()));
}
