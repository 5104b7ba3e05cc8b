fn main() {
    std::process::exit(martingale_ot::cli::run(std::env::args_os()));
}
