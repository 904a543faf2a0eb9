fn main() -> std::process::ExitCode {
    fracnelson_cli::cli::main_with(std::env::args_os())
}
