fn main() {
    std::process::exit(spinflip::cli::main());
}
