fn main() {
    std::process::exit(qharmonic::cli::run(std::env::args_os()));
}
