fn main() {
    std::process::exit(supoly::harness::run_cli(std::env::args_os()));
}
