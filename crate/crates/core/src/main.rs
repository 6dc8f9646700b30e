use std::process::exit;

fn main() {
    exit(singlet_selftest::cli::run());
}
