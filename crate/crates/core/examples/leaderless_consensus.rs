//! Leaderless output-feedback consensus with both adaptive laws.

use adaptive_consensus::agents::{AgentModel, LeaderSpec};
use adaptive_consensus::analysis::consensus_metrics;
use adaptive_consensus::gains::GainSet;
use adaptive_consensus::graph::DirectedGraph;
use adaptive_consensus::protocols::{Network, ProtocolKind};
use adaptive_consensus::sim::{random_initial_state, simulate, SimConfig};

fn main() -> adaptive_consensus::error::Result<()> {
    let g = DirectedGraph::new(
        6,
        &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4), (3, 0), (5, 2)],
        false,
    )?;
    let model = AgentModel::double_integrator();
    let gains = GainSet::design(&model, 0.0, 6)?;
    let config = SimConfig {
        t_end: 30.0,
        record_every: 10,
        ..Default::default()
    };

    for kind in [ProtocolKind::LeaderlessC, ProtocolKind::LeaderlessB] {
        let net = Network::new(kind, &g, &model, &gains, LeaderSpec::Zero)?;
        let x0 = random_initial_state(&net, 1, 1.0, 1.0, None)?;
        let trace = simulate(&net, &x0, &config)?;
        let norms = trace.xi_norms();
        println!("{kind}");
        for t in [0.0, 5.0, 10.0, 20.0, 30.0] {
            let k = trace.times.iter().position(|&s| s >= t - 1e-9).unwrap_or(trace.len() - 1);
            println!("  t = {:5.1}  |xi| = {:.3e}", trace.times[k], norms[k]);
        }
        let m = consensus_metrics(&trace, 1e-3)?;
        println!("  final d = {:?}", m.final_d);
    }
    Ok(())
}
