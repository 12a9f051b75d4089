fn main() {
    std::process::exit(gasmono::cli::execute(std::env::args_os()));
}
