fn main() {
    if let Err(e) = sffn::cli::init_threads() {
        eprintln!("error: {e}");
        std::process::exit(sffn::cli::EXIT_USAGE);
    }
    let code = sffn::cli::run(
        std::env::args_os(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    std::process::exit(code);
}
