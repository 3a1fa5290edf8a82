fn main() {
    std::process::exit(pnkit_cli::run(std::env::args_os()));
}
