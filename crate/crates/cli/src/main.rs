fn main() {
    std::process::exit(torus_mfg_cli::run(std::env::args_os()));
}
