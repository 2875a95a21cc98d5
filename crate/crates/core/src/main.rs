fn main() {
    let code = credyn::cli::run(std::env::args_os(), |k| std::env::var(k).ok(), &mut std::io::stderr());
    std::process::exit(code);
}
