fn main() {
    std::process::exit(dthp::cli::dispatch(std::env::args_os()));
}
