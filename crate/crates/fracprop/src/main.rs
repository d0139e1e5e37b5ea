fn main() {
    std::process::exit(fracprop::cli::run(std::env::args_os()));
}
