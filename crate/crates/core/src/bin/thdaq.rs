use thdaq::{cli, StopHandle};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stop = StopHandle::new();
    let handler = stop.clone();
    if let Err(e) = ctrlc::set_handler(move || handler.stop()) {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }
    std::process::exit(cli::run(std::env::args_os(), &stop));
}
