fn main() {
    std::process::exit(bosonize_cli::run(std::env::args_os()));
}
