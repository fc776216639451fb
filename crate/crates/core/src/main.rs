fn main() {
    std::process::exit(ransic::cli::run(std::env::args_os()));
}
