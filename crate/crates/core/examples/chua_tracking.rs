//! Linear followers tracking a double-scroll Chua leader with state feedback.

use adaptive_consensus::agents::{leader_omega, ChuaParams, LeaderSpec};
use adaptive_consensus::analysis::{compute_constants, consensus_metrics, residual_bound};
use adaptive_consensus::gains::{certify, GainSet};
use adaptive_consensus::graph::DirectedGraph;
use adaptive_consensus::protocols::{Network, ProtocolKind};
use adaptive_consensus::sim::{random_initial_state, simulate, SimConfig};

fn main() -> adaptive_consensus::error::Result<()> {
    let g = DirectedGraph::new(
        6,
        &[(0, 1), (0, 4), (1, 2), (2, 3), (3, 1), (3, 4), (4, 5), (5, 3)],
        true,
    )?;
    let chua = ChuaParams::double_scroll();
    let model = chua.model();
    let leader = LeaderSpec::Chua(chua);
    let omega = leader_omega(&leader);
    let mut gains = GainSet::design(&model, omega, 5)?;
    gains.beta = Some(10.0);
    gains.kappa = Some(vec![0.05]);
    gains.phi = Some(vec![0.02]);
    print!("{}", certify(&model, &gains, omega)?);

    let net = Network::new(ProtocolKind::LfStateContinuous, &g, &model, &gains, leader)?;
    let x0 = random_initial_state(&net, 1, 1.0, 1.0, Some(&[1.0, 0.8, -1.5]))?;
    let config = SimConfig {
        t_end: 50.0,
        record_every: 20,
        ..Default::default()
    };
    let trace = simulate(&net, &x0, &config)?;
    let m = consensus_metrics(&trace, 1e-2)?;
    let bound = residual_bound(&net, &compute_constants(&net, omega)?)?;
    println!("trailing sup |xi|^2 = {:.3e}", m.trailing_sup.powi(2));
    println!("bound               = {:.3e}", bound.bound_sq);
    println!("d in [{:.4}, {:.4}]", m.d_min, m.d_max);
    Ok(())
}
