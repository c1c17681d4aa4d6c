fn main() {
    std::process::exit(neural_lasso::cli::run(std::env::args_os()));
}
