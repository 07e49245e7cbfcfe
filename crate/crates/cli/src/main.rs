fn main() {
    std::process::exit(placer::run_with_args(std::env::args_os()));
}
