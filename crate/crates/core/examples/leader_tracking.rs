//! Leader-follower output feedback with a static and an oscillating leader.

use adaptive_consensus::agents::{leader_omega, AgentModel, LeaderSpec};
use adaptive_consensus::analysis::{compute_constants, consensus_metrics, residual_bound};
use adaptive_consensus::gains::GainSet;
use adaptive_consensus::graph::DirectedGraph;
use adaptive_consensus::protocols::{Network, ProtocolKind};
use adaptive_consensus::sim::{random_initial_state, simulate, SimConfig};

fn main() -> adaptive_consensus::error::Result<()> {
    let g = DirectedGraph::new(
        6,
        &[(0, 1), (0, 4), (1, 2), (2, 3), (3, 1), (3, 4), (4, 5), (5, 3)],
        true,
    )?;
    let model = AgentModel::double_integrator();
    let config = SimConfig {
        t_end: 30.0,
        record_every: 10,
        ..Default::default()
    };

    let mut gains = GainSet::design(&model, 0.0, 5)?;
    gains.beta = Some(0.05);
    let net = Network::new(ProtocolKind::LfDiscontinuous, &g, &model, &gains, LeaderSpec::Zero)?;
    let x0 = random_initial_state(&net, 1, 1.0, 1.0, Some(&[0.5, -0.2]))?;
    let m = consensus_metrics(&simulate(&net, &x0, &config)?, 1e-3)?;
    println!("static leader, discontinuous: trailing sup |xi| = {:.3e}", m.trailing_sup);

    let leader = LeaderSpec::Sinusoid {
        amplitude: vec![0.5],
        frequency: vec![1.0],
        phase: vec![0.0],
    };
    let omega = leader_omega(&leader);
    let mut gains = GainSet::design(&model, omega, 5)?;
    gains.beta = Some(1.0);
    gains.kappa = Some(vec![0.05]);
    gains.phi = Some(vec![0.02]);
    let net = Network::new(ProtocolKind::LfContinuous, &g, &model, &gains, leader)?;
    let x0 = random_initial_state(&net, 1, 1.0, 1.0, Some(&[0.5, -0.2]))?;
    let trace = simulate(&net, &x0, &config)?;
    let m = consensus_metrics(&trace, 1e-3)?;
    let bound = residual_bound(&net, &compute_constants(&net, omega)?)?;
    println!(
        "sinusoidal leader, continuous: trailing sup |xi| = {:.3e}, residual radius = {:.3e}",
        m.trailing_sup,
        bound.radius()
    );
    Ok(())
}
