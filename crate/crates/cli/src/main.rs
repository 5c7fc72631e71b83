fn main() {
    std::process::exit(bridgeflow_cli::main_with_args(std::env::args_os()));
}
