fn main() {
    std::process::exit(crowdsense::cli::main());
}
