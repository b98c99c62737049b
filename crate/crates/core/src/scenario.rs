//! Declarative experiment descriptions.
//!
//! ```toml
//! name = "leaderless6"
//! protocol = "leaderless-c"
//! model = "models/double_integrator.txt"
//! graph = "graphs/demo6.txt"
//! seed = 1
//!
//! [gains]
//! K = [[-0.8543, -2.5628]]
//! S = [[0.5853, -0.5853], [-0.5853, 1.7559]]
//!
//! [sim]
//! dt = 1e-3
//! t_end = 30.0
//!
//! [initial]
//! spread = 1.0
//! ```
//!
//! Relative paths resolve against the scenario file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::agents::{leader_omega, AgentModel, LeaderSpec, ModelFile};
use crate::analysis::{
    compute_constants, consensus_metrics, residual_bound, AnalysisConstants, ConsensusMetrics,
    ResidualBound,
};
use crate::error::{Error, Result};
use crate::gains::{choose_beta, GainSet};
use crate::graph::DirectedGraph;
use crate::linalg::DenseMatrix;
use crate::protocols::{Network, NetworkState, ProtocolKind};
use crate::sim::{random_initial_state, simulate, Integrator, SimConfig, SimulationTrace, TraceMetadata};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    beta: Option<f64>,
    kappa: Option<OneOrMany>,
    phi: Option<OneOrMany>,
    d0: Option<f64>,
    #[serde(rename = "K")]
    k: Option<Vec<Vec<f64>>>,
    #[serde(rename = "F")]
    f: Option<Vec<Vec<f64>>>,
    #[serde(rename = "S")]
    s: Option<Vec<Vec<f64>>>,
    #[serde(rename = "P")]
    p: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Q")]
    q: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    dt: Option<f64>,
    t_end: Option<f64>,
    record_every: Option<usize>,
    integrator: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    spread: Option<f64>,
    x0: Option<Vec<f64>>,
    v0: Option<Vec<f64>>,
    x: Option<Vec<Vec<f64>>>,
    v: Option<Vec<Vec<f64>>>,
    w: Option<Vec<Vec<f64>>>,
    d: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    protocol: String,
    model: PathBuf,
    graph: PathBuf,
    gains_file: Option<PathBuf>,
    seed: Option<u64>,
    omega: Option<f64>,
    out: Option<PathBuf>,
    threshold: Option<f64>,
    #[serde(default)]
    gains: RawGains,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    initial: RawInitial,
}

/// Matrix and scalar overrides applied on top of designed or loaded gains.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GainOverrides {
    pub k: Option<DenseMatrix>,
    pub f: Option<DenseMatrix>,
    pub s: Option<DenseMatrix>,
    pub p: Option<DenseMatrix>,
    pub q: Option<DenseMatrix>,
    pub beta: Option<f64>,
    pub kappa: Option<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitialSpec {
    /// Half-width of the uniform draw for unspecified follower blocks.
    pub spread: f64,
    pub d0: f64,
    pub x0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
    pub x: Option<Vec<Vec<f64>>>,
    pub v: Option<Vec<Vec<f64>>>,
    pub w: Option<Vec<Vec<f64>>>,
    pub d: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: ProtocolKind,
    pub model: AgentModel,
    pub leader: LeaderSpec,
    pub graph: DirectedGraph,
    pub base_gains: Option<GainSet>,
    pub overrides: GainOverrides,
    /// Bound on the leader input, `ω`.
    pub omega: f64,
    pub sim: SimConfig,
    pub initial: InitialSpec,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// `ε` for time-to-threshold.
    pub threshold: f64,
    hash: String,
}

fn matrix(rows: Option<Vec<Vec<f64>>>, name: &str) -> Result<Option<DenseMatrix>> {
    rows.map(|r| {
        let refs: Vec<&[f64]> = r.iter().map(|v| v.as_slice()).collect();
        DenseMatrix::from_rows(&refs).map_err(|e| Error::Config(format!("gains.{name}: {e}")))
    })
    .transpose()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl Scenario {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        Self::parse(&text, base, &path.display().to_string(), &stem)
    }

    /// Parses scenario text, resolving file references against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, origin: &str, default_name: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());

        let kind: ProtocolKind = raw.protocol.parse()?;
        let model_path = resolve(&raw.model);
        let model_text = read(&model_path)?;
        hasher.update(model_text.as_bytes());
        let doc = crate::keymat::KeyMatrixDoc::parse(&model_text, &model_path.display().to_string())?;
        let ModelFile { model, leader } = ModelFile::from_doc(&doc)?;

        let graph_path = resolve(&raw.graph);
        let graph_text = read(&graph_path)?;
        hasher.update(graph_text.as_bytes());
        let graph = DirectedGraph::parse(&graph_text, &graph_path.display().to_string())?;

        let base_gains = match &raw.gains_file {
            Some(p) => {
                let p = resolve(p);
                let t = read(&p)?;
                hasher.update(t.as_bytes());
                let doc = crate::keymat::KeyMatrixDoc::parse(&t, &p.display().to_string())?;
                Some(GainSet::from_doc(&doc)?)
            }
            None => None,
        };

        let g = raw.gains;
        let overrides = GainOverrides {
            k: matrix(g.k, "K")?,
            f: matrix(g.f, "F")?,
            s: matrix(g.s, "S")?,
            p: matrix(g.p, "P")?,
            q: matrix(g.q, "Q")?,
            beta: g.beta,
            kappa: g.kappa.map(OneOrMany::into_vec),
            phi: g.phi.map(OneOrMany::into_vec),
        };
        let defaults = SimConfig::default();
        let sim = SimConfig {
            dt: raw.sim.dt.unwrap_or(defaults.dt),
            t_end: raw.sim.t_end.unwrap_or(defaults.t_end),
            record_every: raw.sim.record_every.unwrap_or(defaults.record_every),
            integrator: match raw.sim.integrator {
                Some(s) => s.parse::<Integrator>()?,
                None => defaults.integrator,
            },
        };
        sim.validate()?;
        let ri = raw.initial;
        let initial = InitialSpec {
            spread: ri.spread.unwrap_or(1.0),
            d0: g.d0.unwrap_or(1.0),
            x0: ri.x0,
            v0: ri.v0,
            x: ri.x,
            v: ri.v,
            w: ri.w,
            d: ri.d,
        };
        if !(initial.spread >= 0.0 && initial.spread.is_finite()) {
            return Err(Error::Config("initial.spread must be finite and ≥ 0".into()));
        }
        let omega = raw.omega.unwrap_or_else(|| leader_omega(&leader));
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::Config(format!("omega = {omega} must be finite and ≥ 0")));
        }
        let scenario = Self {
            name: raw.name.unwrap_or_else(|| default_name.to_string()),
            kind,
            model,
            leader,
            graph,
            base_gains,
            overrides,
            omega,
            sim,
            initial,
            seed: raw.seed.unwrap_or(0),
            out_dir: raw.out.map(|p| resolve(&p)),
            threshold: raw.threshold.unwrap_or(1e-3),
            hash: hex::encode(hasher.finalize()),
        };
        scenario.check_graph()?;
        Ok(scenario)
    }

    fn check_graph(&self) -> Result<()> {
        if self.kind.is_leader_follower() != self.graph.has_leader() {
            return Err(Error::Config(format!(
                "{} needs a {} graph",
                self.kind,
                if self.kind.is_leader_follower() { "leader-flagged" } else { "leaderless" }
            )));
        }
        Ok(())
    }

    /// SHA-256 over the scenario text and every file it references.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Loaded or designed gains with overrides, scalar parameters broadcast.
    pub fn gains(&self) -> Result<GainSet> {
        let mut g = self.base_gains.clone().unwrap_or_default();
        let o = &self.overrides;
        if let Some(s) = &o.s {
            g.s = Some(s.clone());
            g.pbar = None;
            g.f = None;
        }
        if let Some(p) = &o.p {
            g.p = Some(p.clone());
            g.k = None;
            g.omega = None;
        }
        for (slot, v) in [(&mut g.k, &o.k), (&mut g.f, &o.f), (&mut g.q, &o.q)] {
            if let Some(m) = v {
                *slot = Some(m.clone());
            }
        }
        if o.kappa.is_some() {
            g.kappa = o.kappa.clone();
        }
        if o.phi.is_some() {
            g.phi = o.phi.clone();
        }
        let beta = choose_beta(self.omega, o.beta.or(g.beta))?;
        let mut g = g.complete(&self.model)?;
        g.beta = Some(beta);
        g.with_follower_params(self.graph.follower_count())
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(self.kind, &self.graph, &self.model, &self.gains()?, self.leader.clone())
    }

    pub fn initial_state(&self, network: &Network) -> Result<NetworkState> {
        let init = &self.initial;
        let lf = self.kind.is_leader_follower();
        let n = self.model.n();
        let x0 = if lf {
            Some(init.x0.clone().unwrap_or_else(|| vec![0.0; n]))
        } else {
            None
        };
        let mut s = random_initial_state(network, self.seed, init.spread, init.d0, x0.as_deref())?;
        if let Some(v0) = &init.v0 {
            set_block(s.v0_mut(), std::slice::from_ref(v0), "v0")?;
        }
        if let Some(x) = &init.x {
            set_block(s.x_mut(), x, "x")?;
        }
        if let Some(v) = &init.v {
            set_block(s.v_mut(), v, "v")?;
        }
        if let Some(w) = &init.w {
            set_block(s.w_mut(), w, "w")?;
        }
        if let Some(d) = &init.d {
            if d.len() != s.d().len() {
                return Err(Error::Config(format!(
                    "initial.d has {} entries for {} followers",
                    d.len(),
                    s.d().len()
                )));
            }
            s.d_mut().copy_from_slice(d);
        }
        Ok(s)
    }

    pub fn run(&self) -> Result<ScenarioRun> {
        let network = self.network()?;
        let initial = self.initial_state(&network)?;
        let mut trace = simulate(&network, &initial, &self.sim)?;
        trace.metadata = TraceMetadata {
            scenario_hash: Some(self.hash.clone()),
            seed: Some(self.seed),
            name: Some(self.name.clone()),
        };
        let metrics = consensus_metrics(&trace, self.threshold)?;
        let constants = compute_constants(&network, self.omega);
        let (constants, bound) = match constants {
            Ok(c) => {
                let b = if self.kind.is_continuous() {
                    Some(residual_bound(&network, &c)?)
                } else {
                    None
                };
                (Some(c), b)
            }
            Err(e) => {
                trace.warnings.push(format!("analysis constants unavailable: {e}"));
                (None, None)
            }
        };
        Ok(ScenarioRun {
            network,
            trace,
            constants,
            bound,
            metrics,
        })
    }
}

fn set_block(dst: &mut [f64], rows: &[Vec<f64>], name: &str) -> Result<()> {
    let flat: Vec<f64> = rows.concat();
    if flat.len() != dst.len() {
        return Err(Error::Config(format!(
            "initial.{name} has {} values, expected {}",
            flat.len(),
            dst.len()
        )));
    }
    dst.copy_from_slice(&flat);
    Ok(())
}

/// Everything a scenario run produces.
#[derive(Debug)]
pub struct ScenarioRun {
    pub network: Network,
    pub trace: SimulationTrace,
    pub constants: Option<AnalysisConstants>,
    pub bound: Option<ResidualBound>,
    pub metrics: ConsensusMetrics,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(dir: &Path, scenario: &str) -> Scenario {
        std::fs::write(
            dir.join("model.txt"),
            "A 2 2\n0 1\n0 0\nB 2 1\n0 1\nC 1 2\n1 0\n",
        )
        .unwrap();
        std::fs::write(dir.join("pair.txt"), "N 2\n0 1\n1 0\n").unwrap();
        std::fs::write(dir.join("s.toml"), scenario).unwrap();
        Scenario::from_file(dir.join("s.toml")).unwrap()
    }

    #[test]
    fn paths_resolve_and_overrides_apply() {
        let dir = tempfile::tempdir().unwrap();
        let sc = fixture(
            dir.path(),
            "protocol = \"leaderless-c\"\nmodel = \"model.txt\"\ngraph = \"pair.txt\"\n\
             [gains]\nS = [[0.5853, -0.5853], [-0.5853, 1.7559]]\n[sim]\nt_end = 1.0\n",
        );
        assert_eq!(sc.name, "s");
        assert_eq!(sc.sim.t_end, 1.0);
        let g = sc.gains().unwrap();
        let f = g.f.unwrap();
        assert!((f[(0, 0)] + 2.5628).abs() < 1e-3 && (f[(1, 0)] + 0.8543).abs() < 1e-3);
        assert_eq!(sc.hash().len(), 64);
    }

    #[test]
    fn manifold_initial_blocks() {
        let dir = tempfile::tempdir().unwrap();
        let sc = fixture(
            dir.path(),
            "protocol = \"leaderless-b\"\nmodel = \"model.txt\"\ngraph = \"pair.txt\"\n\
             [initial]\nx = [[1, 2], [1, 2]]\nv = [[0, 0], [0, 0]]\nw = [[3, 3], [3, 3]]\n",
        );
        let net = sc.network().unwrap();
        let s = sc.initial_state(&net).unwrap();
        assert_eq!(s.x(), &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(s.d(), &[1.0, 1.0]);
        assert!(net.signals(&s).unwrap().xi.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unknown_keys_and_graph_mismatch_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let _ = fixture(dir.path(), "protocol = \"leaderless-c\"\nmodel = \"model.txt\"\ngraph = \"pair.txt\"\n");
        std::fs::write(
            dir.path().join("bad.toml"),
            "protocol = \"leaderless-c\"\nmodel = \"model.txt\"\ngraph = \"pair.txt\"\nbogus = 1\n",
        )
        .unwrap();
        let e = Scenario::from_file(dir.path().join("bad.toml")).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }), "{e}");
        assert_eq!(e.exit_code(), 2);
        std::fs::write(
            dir.path().join("lf.toml"),
            "protocol = \"lf-continuous\"\nmodel = \"model.txt\"\ngraph = \"pair.txt\"\n",
        )
        .unwrap();
        let e = Scenario::from_file(dir.path().join("lf.toml")).unwrap_err();
        assert!(matches!(e, Error::Config(_)), "{e}");
    }

    #[test]
    fn beta_is_at_least_omega() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("model.txt"),
            "leader: sinusoid\nA 2 2\n0 1\n0 0\nB 2 1\n0 1\nC 1 2\n1 0\n\
             leader.amplitude 1 1\n2\nleader.frequency 1 1\n1\nleader.phase 1 1\n0\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("g.txt"), "N 3 leader\n0 1\n1 2\n").unwrap();
        std::fs::write(
            dir.path().join("s.toml"),
            "protocol = \"lf-continuous\"\nmodel = \"model.txt\"\ngraph = \"g.txt\"\n[gains]\nbeta = 0.5\nkappa = 0.1\n",
        )
        .unwrap();
        let sc = Scenario::from_file(dir.path().join("s.toml")).unwrap();
        assert_eq!(sc.omega, 2.0);
        let g = sc.gains().unwrap();
        assert_eq!(g.beta, Some(2.0));
        assert_eq!(g.kappa, Some(vec![0.1, 0.1]));
    }
}
