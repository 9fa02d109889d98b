fn main() {
    std::process::exit(capclust::driver::run_cli(std::env::args_os()));
}
