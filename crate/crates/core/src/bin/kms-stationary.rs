fn main() {
    std::process::exit(kms_stationary::cli::main_with_args(std::env::args_os()));
}
