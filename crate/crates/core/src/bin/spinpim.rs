fn main() -> std::process::ExitCode {
    spinpim::cli::main_with_args(std::env::args_os())
}
