fn main() -> std::process::ExitCode {
    symham::cli::main()
}
