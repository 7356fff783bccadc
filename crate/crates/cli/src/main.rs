fn main() {
    std::process::exit(pcav_cli::run(std::env::args().skip(1).collect()));
}
