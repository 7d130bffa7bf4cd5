fn main() {
    std::process::exit(vecpipe::cli::dispatch(std::env::args_os()));
}
