fn main() {
    std::process::exit(rlhf_ids::harness::cli_dispatch(std::env::args_os()));
}
