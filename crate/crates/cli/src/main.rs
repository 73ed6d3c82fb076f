fn main() {
    std::process::exit(emobench_cli::run(std::env::args_os()));
}
