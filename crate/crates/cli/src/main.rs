fn main() {
    std::process::exit(splatwright_cli::run(std::env::args_os()));
}
