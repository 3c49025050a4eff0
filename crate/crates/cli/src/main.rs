fn main() {
    env_logger::init();
    std::process::exit(frustra_cli::run_cli(std::env::args_os()));
}
