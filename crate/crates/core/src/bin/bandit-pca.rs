fn main() {
    std::process::exit(bandit_pca::cli::main_with(std::env::args_os()));
}
