//! Laplacian certificates for a leaderless ring and a leader graph.

use adaptive_consensus::graph::{DirectedGraph, SpectralCertificate};

fn main() -> adaptive_consensus::error::Result<()> {
    let ring = DirectedGraph::new(
        6,
        &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4), (3, 0), (5, 2)],
        false,
    )?;
    let tree = DirectedGraph::new(
        6,
        &[(0, 1), (0, 4), (1, 2), (2, 3), (3, 1), (3, 4), (4, 5), (5, 3)],
        true,
    )?;

    for (name, g) in [("leaderless", &ring), ("leader", &tree)] {
        println!("{name}: {} nodes, {} edges", g.node_count(), g.edge_count());
        println!("{:?}", g.laplacian().l);
        match SpectralCertificate::for_graph(g)? {
            SpectralCertificate::Leaderless(c) => {
                println!("r = {:?}", c.r);
                println!("lambda2 = {:.6}", c.lambda2);
            }
            SpectralCertificate::Leader(c) => {
                println!("g = {:?}", c.g);
                println!("lambda0 = {:.6}", c.lambda0);
            }
        }
        println!();
    }

    // Dropping the edge 5 -> 0 breaks strong connectivity.
    let broken = DirectedGraph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], false)?;
    if let Err(e) = SpectralCertificate::for_graph(&broken) {
        println!("path graph rejected: {e}");
    }
    Ok(())
}
