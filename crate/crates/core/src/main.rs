fn main() {
    std::process::exit(d3forge::cli::main_with(std::env::args_os()));
}
