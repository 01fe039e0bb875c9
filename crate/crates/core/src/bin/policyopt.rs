fn main() {
    std::process::exit(policyopt::cli::run(std::env::args_os()));
}
