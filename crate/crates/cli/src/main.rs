fn main() {
    std::process::exit(oodwatch_cli::run(std::env::args_os()));
}
