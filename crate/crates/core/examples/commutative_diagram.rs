//! The four edges of the (d, n) diagram, run through the config layer the
//! way the `wzlab diagram` subcommand does.

use wzlab::cli::{self, Command, RunOptions};
use wzlab::config::ExperimentConfig;
use wzlab::convergence::{EDGE_DN_TO_D, EDGE_DN_TO_N, EDGE_D_TO_LIMIT, EDGE_N_TO_LIMIT};

const CONFIG: &str = r#"
[experiment]
name = "diagram-example"
seed = 17
x0 = [1.0]
d_list = [5, 6, 7]
n_list = [2.0, 8.0, 1.0e6]
d_ref = 10
samples = 200

[field]
kind = "geometric"
a = 0.1
c = 0.5
"#;

fn main() -> wzlab::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let out = std::env::temp_dir().join("wzlab-diagram-example");
    let summary = cli::run(
        Command::Diagram,
        cfg,
        &RunOptions {
            out: Some(out),
            ..RunOptions::default()
        },
    )?;
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(summary.dir.join("diagram.json"))?)?;

    for edge in [EDGE_DN_TO_N, EDGE_N_TO_LIMIT, EDGE_DN_TO_D, EDGE_D_TO_LIMIT] {
        println!("{edge}:");
        for c in report["cells"].as_array().unwrap().iter().filter(|c| c["edge"] == edge) {
            println!("  d = {:>4}  n = {:>9}  {:.4e}", c["d"].to_string(), c["n"].to_string(), c["estimate"].as_f64().unwrap());
        }
    }
    for c in &summary.checks {
        println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("artifacts in {}", summary.dir.display());
    Ok(())
}
