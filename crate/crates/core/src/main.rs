fn main() -> std::process::ExitCode {
    cteskf::cli::main()
}
