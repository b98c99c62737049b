//! How the residual set shrinks as the continuous-protocol parameters shrink.

use adaptive_consensus::agents::{leader_omega, AgentModel, LeaderSpec};
use adaptive_consensus::analysis::{compute_constants, residual_bound, trailing_sup_sq};
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
    let leader = LeaderSpec::Sinusoid {
        amplitude: vec![0.5],
        frequency: vec![1.0],
        phase: vec![0.0],
    };
    let omega = leader_omega(&leader);
    let config = SimConfig {
        t_end: 50.0,
        record_every: 10,
        ..Default::default()
    };

    println!("{:>8} {:>8} {:>12} {:>12} {:>12}", "kappa", "phi", "bound", "kappa term", "observed");
    for scale in [1.0, 0.5, 0.25] {
        let mut gains = GainSet::design(&model, omega, 5)?;
        gains.beta = Some(1.0);
        gains.kappa = Some(vec![0.05 * scale]);
        gains.phi = Some(vec![0.02 * scale]);
        let net = Network::new(ProtocolKind::LfContinuous, &g, &model, &gains, leader.clone())?;
        let b = residual_bound(&net, &compute_constants(&net, omega)?)?;
        let x0 = random_initial_state(&net, 1, 1.0, 1.0, Some(&[0.5, -0.2]))?;
        let observed = trailing_sup_sq(&simulate(&net, &x0, &config)?);
        println!(
            "{:>8.4} {:>8.4} {:>12.4e} {:>12.4e} {:>12.4e}",
            0.05 * scale,
            0.02 * scale,
            b.bound_sq,
            b.kappa_term,
            observed
        );
    }
    Ok(())
}
