//! Riccati-based gain synthesis and certification.

use adaptive_consensus::agents::{AgentModel, ChuaParams};
use adaptive_consensus::gains::{certify, GainSet};

fn show(name: &str, model: &AgentModel, omega: f64) -> adaptive_consensus::error::Result<()> {
    let mut gains = GainSet::design(model, omega, 5)?;
    gains.beta = Some(omega.max(1.0));
    println!("== {name} (omega = {omega})");
    print!("{}", gains.to_doc().to_text());
    print!("{}", certify(model, &gains, omega)?);
    println!();
    Ok(())
}

fn main() -> adaptive_consensus::error::Result<()> {
    show("double integrator", &AgentModel::double_integrator(), 0.0)?;
    let chua = ChuaParams::double_scroll();
    show("chua", &chua.model(), 5.25)?;

    // Serialization is lossless.
    let gains = GainSet::design(&AgentModel::double_integrator(), 0.0, 5)?;
    let back = GainSet::from_doc(&gains.to_doc())?;
    assert_eq!(back.to_doc().to_text(), gains.to_doc().to_text());
    println!("round trip ok");
    Ok(())
}
