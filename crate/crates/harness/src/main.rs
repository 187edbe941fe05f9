fn main() {
    std::process::exit(zakotfs_harness::cli::run(std::env::args_os()));
}
