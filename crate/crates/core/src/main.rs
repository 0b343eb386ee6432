fn main() {
    std::process::exit(ucbound::cli::run(std::env::args_os()));
}
