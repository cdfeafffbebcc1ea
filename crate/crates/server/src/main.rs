fn main() -> std::process::ExitCode {
    lago_dr::cli::main()
}
