fn main() {
    std::process::exit(adaptive_ot::cli::cli_main(std::env::args_os()));
}
