fn main() {
    std::process::exit(pcnet::harness::cli_main(std::env::args_os()));
}
