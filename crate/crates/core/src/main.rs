fn main() -> std::process::ExitCode {
    gtp::cli::main()
}
