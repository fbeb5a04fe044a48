fn main() -> std::process::ExitCode {
    plforge::cli::main()
}
