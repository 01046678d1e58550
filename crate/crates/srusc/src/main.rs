fn main() {
    std::process::exit(srusc::cli::run(std::env::args_os()));
}
