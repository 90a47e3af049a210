fn main() {
    env_logger::init();
    std::process::exit(hydrosheet::cli::parse_and_dispatch(std::env::args_os()));
}
