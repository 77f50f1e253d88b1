//! Parsing a run configuration, running the protocol it describes and
//! writing the series as CSV.

use tissue_qlv::io::{parse_config, render_series, SeriesTable};
use tissue_qlv::protocols::run_protocol;

const CONFIG: &str = r#"
[model.elastic]
kind = "exponential"
b = 2.0
c = 3.0

[model.kernel]
kind = "kelvin"
e_r = 1.0
tau_eps = 0.5
tau_sigma = 2.0

[protocol]
kind = "creep"
stress = 0.4
duration = 5.0
dt = 0.001

[output]
stride = 500
precision = 8
"#;

fn main() -> tissue_qlv::Result<()> {
    let config = parse_config(CONFIG)?;
    println!("normalized configuration:\n{}", config.to_toml());

    let model = config.qlv_model()?;
    let spec = config.protocol_spec()?;
    let outcome = run_protocol(&spec, &model)?;

    let s = &outcome.series;
    let table = SeriesTable::from_columns(vec![
        ("time".into(), s.time.clone()),
        ("stretch".into(), s.stretch.clone()),
        ("stress".into(), s.stress.clone()),
    ])?;
    print!("{}", render_series(&table, config.output.precision)?);

    // a mistyped key is reported with its path
    match parse_config(&CONFIG.replace("tau_sigma", "tau_sigam")) {
        Err(e) => println!("\n{e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
