fn main() {
    std::process::exit(rowact_bench::cli::main_with(std::env::args_os()));
}
