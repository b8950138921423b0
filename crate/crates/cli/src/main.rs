fn main() {
    std::process::exit(fkuq_cli::run(std::env::args_os()));
}
