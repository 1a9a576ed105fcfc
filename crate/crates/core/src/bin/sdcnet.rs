fn main() {
    std::process::exit(sdcnet::cli::run_cli(std::env::args_os()));
}
