fn main() {
    std::process::exit(metricforge::cli::main_with_args());
}
