fn main() {
    std::process::exit(xmc_cli::run(std::env::args_os()));
}
