fn main() {
    std::process::exit(cxrpair::cli::run(std::env::args_os()));
}
