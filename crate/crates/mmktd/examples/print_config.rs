//! Print a built-in benchmark configuration, ready to save and edit:
//!
//! ```text
//! cargo run --example print_config -- pendulum > my_run.txt
//! cargo run --example print_config -- mountain_car > my_run.txt
//! ```

use mmktd::envs::EnvKind;
use mmktd::harness::RunConfig;

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "pendulum".to_string());
    let cfg = match EnvKind::parse(&arg) {
        Ok(env) => RunConfig::default_for(env),
        Err(err) => {
            eprintln!("{err}");
            std::process::exit(2);
        }
    };
    print!("{}", cfg.serialize());
}
