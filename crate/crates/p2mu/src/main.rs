fn main() { std::process::exit(p2mu::cli::run()); }
