fn main() {
    std::process::exit(kpo_qml_cli::run(std::env::args_os()));
}
