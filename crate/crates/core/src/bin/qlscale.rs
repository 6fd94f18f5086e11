fn main() {
    std::process::exit(qlscale::cli::main_with_args(std::env::args_os()));
}
