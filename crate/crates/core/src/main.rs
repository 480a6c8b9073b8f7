fn main() {
    std::process::exit(doublephase::cli::run(std::env::args_os()));
}
