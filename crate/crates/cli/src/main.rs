use curvo_cli::CliError;

fn main() {
    let code = match curvo_cli::run(std::env::args_os(), &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprint!("{msg}"),
                _ => eprintln!("error: {e}"),
            }
            e.exit_code()
        }
    };
    std::process::exit(code);
}
