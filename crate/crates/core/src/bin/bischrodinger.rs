fn main() {
    std::process::exit(bischrodinger::cli::run(std::env::args_os()));
}
