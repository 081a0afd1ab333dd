fn main() {
    std::process::exit(toeplitz_asymptotics::cli::main_with_args(std::env::args_os()));
}
