fn main() -> std::process::ExitCode {
    adagc::cli::main()
}
