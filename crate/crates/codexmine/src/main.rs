fn main() {
    std::process::exit(codexmine::run());
}
