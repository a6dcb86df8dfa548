fn main() {
    std::process::exit(gnclab::cli::run(std::env::args_os()));
}
