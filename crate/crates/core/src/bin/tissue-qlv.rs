fn main() {
    std::process::exit(tissue_qlv::cli::run(std::env::args_os()));
}
