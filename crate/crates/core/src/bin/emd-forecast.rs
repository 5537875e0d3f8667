fn main() {
    std::process::exit(emd_forecast::cli::run(std::env::args()));
}
