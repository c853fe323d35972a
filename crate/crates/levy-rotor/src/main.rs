fn main() {
    std::process::exit(levy_rotor::cli::run());
}
