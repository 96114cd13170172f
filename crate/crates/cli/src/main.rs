fn main() {
    std::process::exit(mstsvd_cli::run(std::env::args_os()));
}
