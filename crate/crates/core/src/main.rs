fn main() {
    std::process::exit(qguess::cli::run(std::env::args_os()));
}
