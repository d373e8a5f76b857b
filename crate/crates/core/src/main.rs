fn main() {
    std::process::exit(mpscope::cli::run(std::env::args_os()));
}
