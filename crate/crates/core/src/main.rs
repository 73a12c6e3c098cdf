fn main() {
    std::process::exit(rl_lab::cli::run(std::env::args_os()));
}
