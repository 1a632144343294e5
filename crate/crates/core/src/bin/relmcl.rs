fn main() {
    std::process::exit(relmcl::cli::run(std::env::args_os()));
}
