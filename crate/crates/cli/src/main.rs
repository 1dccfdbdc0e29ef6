fn main() {
    std::process::exit(solvq::run(std::env::args_os()));
}
