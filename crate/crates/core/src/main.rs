fn main() {
    std::process::exit(gglab::cli::main(std::env::args_os()));
}
