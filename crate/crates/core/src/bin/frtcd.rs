fn main() {
    std::process::exit(frtcd::cli::main_from(std::env::args_os()));
}
