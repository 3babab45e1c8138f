fn main() -> std::process::ExitCode {
    domcf::cli::main()
}
