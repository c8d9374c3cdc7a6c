fn main() -> std::process::ExitCode {
    del_core::cli::main()
}
