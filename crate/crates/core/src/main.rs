fn main() {
    std::process::exit(echo_qee::cli::run(std::env::args_os()));
}
