fn main() {
    std::process::exit(epsls::cli::run_cli(std::env::args_os()));
}
