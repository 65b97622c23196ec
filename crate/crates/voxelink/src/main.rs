fn main() {
    std::process::exit(voxelink::cli::main_with_args(std::env::args_os()));
}
