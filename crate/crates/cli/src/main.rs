fn main() {
    std::process::exit(plapsys_cli::run(std::env::args_os()));
}
