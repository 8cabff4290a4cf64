fn main() {
    std::process::exit(mollipath::cli::main_with_env());
}
