fn main() {
    std::process::exit(sola::experiment::cli_main(std::env::args_os()));
}
