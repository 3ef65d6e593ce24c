fn main() {
    std::process::exit(nsbell::cli::run(std::env::args_os()));
}
