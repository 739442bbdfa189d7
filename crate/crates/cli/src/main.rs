fn main() {
    std::process::exit(hdiv_geodecomp_cli::run(std::env::args_os()));
}
