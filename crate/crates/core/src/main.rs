fn main() {
    std::process::exit(scriptline::cli::run(std::env::args_os()));
}
