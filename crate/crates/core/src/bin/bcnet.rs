fn main() {
    std::process::exit(blume_capel::cli::run(std::env::args_os()));
}
