fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(qfactors::cli::main_with(std::env::args_os()) as u8)
}
