fn main() -> std::process::ExitCode {
    mdpcheck::cli::main()
}
