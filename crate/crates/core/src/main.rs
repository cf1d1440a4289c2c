fn main() {
    std::process::exit(spni::cli::run(std::env::args_os()));
}
