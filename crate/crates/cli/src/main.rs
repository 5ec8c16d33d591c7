fn main() {
    std::process::exit(otgraph_cli::app::run(std::env::args_os()));
}
