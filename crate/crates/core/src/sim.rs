//! Fixed-step integration of a [`Network`] with trajectory recording.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::AnalysisConstants;
use crate::error::{Error, Result};
use crate::keymat::fmt17;
use crate::linalg::norm2;
use crate::protocols::{Network, NetworkState, ProtocolKind};

/// Clamps larger than this are reported as warnings.
pub const CLAMP_WARN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(Integrator::Rk4),
            "euler" => Ok(Integrator::Euler),
            _ => Err(Error::Config(format!("unknown integrator `{s}` (rk4 or euler)"))),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Rk4 => "rk4",
            Integrator::Euler => "euler",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Record every `record_every`-th step (the final step is always kept).
    pub record_every: usize,
    pub integrator: Integrator,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 10.0,
            record_every: 1,
            integrator: Integrator::Rk4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end = {} must be at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMetadata {
    /// SHA-256 of the scenario inputs, hex encoded.
    pub scenario_hash: Option<String>,
    pub seed: Option<u64>,
    pub name: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub kind: ProtocolKind,
    pub config: SimConfig,
    pub times: Vec<f64>,
    pub states: Vec<NetworkState>,
    /// Consensus error `ξ` (or `ξ̃`) at each recorded step.
    pub xi: Vec<Vec<f64>>,
    /// Stacked follower controls at each recorded step.
    pub controls: Vec<Vec<f64>>,
    /// Leader input at each recorded step; empty without a leader.
    pub leader_controls: Vec<Vec<f64>>,
    /// Largest single correction applied to keep `dᵢ` at its floor.
    pub clamp_max: f64,
    pub warnings: Vec<String>,
    pub metadata: TraceMetadata,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn xi_norms(&self) -> Vec<f64> {
        self.xi.iter().map(|v| norm2(v)).collect()
    }

    pub fn final_state(&self) -> Option<&NetworkState> {
        self.states.last()
    }

    /// Column names of the CSV trace.
    pub fn csv_header(&self) -> Vec<String> {
        let Some(s) = self.states.first() else {
            return vec!["t".into(), "norm_xi".into()];
        };
        let l = s.layout();
        let first = usize::from(l.leader);
        let nodes = first + l.agents;
        let p = self.controls.first().map_or(0, |u| u.len() / l.agents.max(1));
        let mut h = vec!["t".to_string()];
        let block = |h: &mut Vec<String>, name: &str, from: usize| {
            for i in from..nodes {
                for c in 0..l.n {
                    h.push(format!("{name}[{i}][{c}]"));
                }
            }
        };
        block(&mut h, "x", 0);
        if l.observers {
            block(&mut h, "v", 0);
            block(&mut h, "w", first);
        }
        for i in first..nodes {
            h.push(format!("d[{i}]"));
        }
        for i in 0..nodes {
            if i < first && self.leader_controls.is_empty() {
                continue;
            }
            for c in 0..p {
                h.push(format!("u[{i}][{c}]"));
            }
        }
        h.push("norm_xi".into());
        h
    }

    fn csv_row(&self, k: usize) -> Vec<f64> {
        let s = &self.states[k];
        let mut row = vec![self.times[k]];
        row.extend_from_slice(s.x0());
        row.extend_from_slice(s.x());
        row.extend_from_slice(s.v0());
        row.extend_from_slice(s.v());
        row.extend_from_slice(s.w());
        row.extend_from_slice(s.d());
        if let Some(u0) = self.leader_controls.get(k) {
            row.extend_from_slice(u0);
        }
        row.extend_from_slice(&self.controls[k]);
        row.push(norm2(&self.xi[k]));
        row
    }

    /// One row per recorded step, floats at 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Input(format!("writing trace: {e}"));
        w.write_record(self.csv_header()).map_err(csv_err)?;
        for k in 0..self.len() {
            w.write_record(self.csv_row(k).into_iter().map(fmt17))
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Input(format!("writing trace: {e}")))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// `key: value` sidecar with the provenance of the run.
    pub fn metadata_text(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "protocol: {}\nintegrator: {}\ndt: {}\nt_end: {}\nrecord_every: {}\nclamp_max: {}\n",
            self.kind,
            c.integrator,
            fmt17(c.dt),
            fmt17(c.t_end),
            c.record_every,
            fmt17(self.clamp_max)
        );
        let m = &self.metadata;
        if let Some(n) = &m.name {
            s += &format!("scenario: {n}\n");
        }
        if let Some(h) = &m.scenario_hash {
            s += &format!("scenario_sha256: {h}\n");
        }
        if let Some(seed) = m.seed {
            s += &format!("seed: {seed}\n");
        }
        for w in &self.warnings {
            s += &format!("warning: {w}\n");
        }
        s
    }
}

/// A state with followers drawn uniformly from `[-spread, spread]`,
/// observers included, and every `dᵢ = d0`.
pub fn random_initial_state(
    network: &Network,
    seed: u64,
    spread: f64,
    d0: f64,
    leader_x0: Option<&[f64]>,
) -> Result<NetworkState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = NetworkState::zeros(network.layout());
    let mut fill = |v: &mut [f64]| {
        for x in v {
            *x = if spread > 0.0 { rng.gen_range(-spread..=spread) } else { 0.0 };
        }
    };
    fill(s.x_mut());
    fill(s.v_mut());
    fill(s.w_mut());
    if let Some(x0) = leader_x0 {
        if x0.len() != s.x0().len() {
            return Err(Error::Dimension(format!(
                "leader x0 has {} entries, expected {}",
                x0.len(),
                s.x0().len()
            )));
        }
        s.x0_mut().copy_from_slice(x0);
        fill(s.v0_mut());
    }
    s.d_mut().iter_mut().for_each(|d| *d = d0);
    Ok(s)
}

/// Checks the adaptive-gain start values against the protocol's floor.
pub fn validate_initial(kind: ProtocolKind, state: &NetworkState) -> Result<()> {
    if !state.is_finite() {
        return Err(Error::Config("initial state has non-finite entries".into()));
    }
    for (i, &d) in state.d().iter().enumerate() {
        let ok = match kind {
            ProtocolKind::LeaderlessC | ProtocolKind::LeaderlessB => d > 0.0,
            k if k.is_continuous() => d >= 1.0,
            _ => d >= 0.0,
        };
        if !ok {
            let need = match kind {
                ProtocolKind::LeaderlessC | ProtocolKind::LeaderlessB => "> 0",
                k if k.is_continuous() => ">= 1",
                _ => ">= 0",
            };
            return Err(Error::Config(format!("d[{i}](0) = {d} must be {need} for {kind}")));
        }
    }
    Ok(())
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn offset(base: &NetworkState, h: f64, k: &NetworkState) -> NetworkState {
    let mut s = base.clone();
    axpy(s.as_mut_slice(), h, k.as_slice());
    s
}

/// Integrates `network` from `initial` over `config`.
pub fn simulate(network: &Network, initial: &NetworkState, config: &SimConfig) -> Result<SimulationTrace> {
    config.validate()?;
    let kind = network.kind();
    validate_initial(kind, initial)?;
    let steps = config.steps();
    let dt = config.dt;
    let floor = kind.d_floor();
    let p = network.model().p();
    let lf = kind.is_leader_follower();

    let mut trace = SimulationTrace {
        kind,
        config: *config,
        times: Vec::new(),
        states: Vec::new(),
        xi: Vec::new(),
        controls: Vec::new(),
        leader_controls: Vec::new(),
        clamp_max: 0.0,
        warnings: Vec::new(),
        metadata: TraceMetadata::default(),
    };
    let record = |trace: &mut SimulationTrace, t: f64, s: &NetworkState, u: Vec<f64>| -> Result<()> {
        trace.times.push(t);
        trace.xi.push(network.signals(s)?.xi);
        trace.controls.push(u);
        if lf {
            trace.leader_controls.push(network.leader().input(t, s.x0(), p));
        }
        trace.states.push(s.clone());
        Ok(())
    };

    let mut state = initial.clone();
    for k in 0..steps {
        let t = k as f64 * dt;
        let (k1, u) = network.derivative(t, &state)?;
        if k % config.record_every == 0 {
            record(&mut trace, t, &state, u)?;
        }
        let mut next = match config.integrator {
            Integrator::Euler => offset(&state, dt, &k1),
            Integrator::Rk4 => {
                let (k2, _) = network.derivative(t + 0.5 * dt, &offset(&state, 0.5 * dt, &k1))?;
                let (k3, _) = network.derivative(t + 0.5 * dt, &offset(&state, 0.5 * dt, &k2))?;
                let (k4, _) = network.derivative(t + dt, &offset(&state, dt, &k3))?;
                let mut s = state.clone();
                let y = s.as_mut_slice();
                let (a, b, c, d) = (k1.as_slice(), k2.as_slice(), k3.as_slice(), k4.as_slice());
                for i in 0..y.len() {
                    y[i] += dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
                }
                s
            }
        };
        if !next.is_finite() {
            return Err(Error::Divergence {
                t: (k + 1) as f64 * dt,
                last_finite: Box::new(state),
            });
        }
        for d in next.d_mut() {
            if *d < floor {
                trace.clamp_max = trace.clamp_max.max(floor - *d);
                *d = floor;
            }
        }
        state = next;
    }
    let t = steps as f64 * dt;
    let (_, u) = network.derivative(t, &state)?;
    record(&mut trace, t, &state, u)?;
    if trace.clamp_max > CLAMP_WARN {
        trace.warnings.push(format!(
            "adaptive gain clamped to its floor {floor} by up to {:.3e}",
            trace.clamp_max
        ));
    }
    Ok(trace)
}

/// Value of the protocol's Lyapunov function at every recorded step:
/// `V₁`/`V₂` leaderless, `V₃` discontinuous output, `V₄` continuous output,
/// `V₅` state feedback.
pub fn lyapunov_monitor(
    network: &Network,
    trace: &SimulationTrace,
    constants: &AnalysisConstants,
) -> Result<Vec<f64>> {
    let kind = network.kind();
    if trace.kind != kind || constants.kind != kind {
        return Err(Error::Config(format!(
            "monitor for {kind} given a {} trace and {} constants",
            trace.kind, constants.kind
        )));
    }
    let weights: &[f64] = if kind.is_leader_follower() {
        &constants.g
    } else {
        &constants.r
    };
    let alpha = constants.alpha;
    let n = network.model().n();
    let s = network.rho_weight();
    trace
        .states
        .iter()
        .map(|state| {
            let sig = network.signals(state)?;
            let d = state.d();
            let adaptive: f64 = (0..d.len())
                .map(|i| {
                    let rho = sig.rho[i];
                    0.5 * weights[i] * ((2.0 * d[i] + rho) * rho + (d[i] - alpha).powi(2))
                })
                .sum();
            Ok(match kind {
                ProtocolKind::LeaderlessC
                | ProtocolKind::LeaderlessB
                | ProtocolKind::LfStateDiscontinuous
                | ProtocolKind::LfStateContinuous => adaptive,
                ProtocolKind::LfDiscontinuous | ProtocolKind::LfContinuous => {
                    let e0 = sig.e0.as_deref().unwrap_or(&[]);
                    let gamma = constants.gamma.expect("output constants carry gamma");
                    let v3 = adaptive + gamma * s.quad_form(e0);
                    if kind == ProtocolKind::LfDiscontinuous {
                        v3
                    } else {
                        let q = network.gains().q.as_ref().expect("validated by Network::new");
                        let zeta = sig.zeta();
                        let (gamma1, gamma2) = (
                            constants.gamma1.expect("output constants carry gamma1"),
                            constants.gamma2.expect("output constants carry gamma2"),
                        );
                        let mut v4 = gamma2 * v3;
                        for i in 0..d.len() {
                            let r = i * n..(i + 1) * n;
                            v4 += q.quad_form(&sig.eta[r.clone()])
                                + gamma1 * s.quad_form(&zeta[r]);
                        }
                        v4
                    }
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentModel, LeaderSpec};
    use crate::gains::GainSet;
    use crate::graph::DirectedGraph;
    use crate::linalg::DenseMatrix;

    /// `e^{M}` by scaling and squaring a 20-term Taylor series.
    fn expm(m: &DenseMatrix) -> DenseMatrix {
        let norm = m.max_abs() * m.rows() as f64;
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let a = m.scale(0.5f64.powi(squarings as i32));
        let mut term = DenseMatrix::identity(m.rows());
        let mut sum = term.clone();
        for k in 1..20 {
            term = (&term * &a).scale(1.0 / k as f64);
            sum = &sum + &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn expm_oracle_on_rotation() {
        let m = DenseMatrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap();
        let e = expm(&m);
        assert!((e[(0, 0)] - 1f64.cos()).abs() < 1e-14);
        assert!((e[(0, 1)] - 1f64.sin()).abs() < 1e-14);
    }

    /// A leaderless network whose `x`-block is linear, used for order checks.
    fn linear_network() -> (Network, DenseMatrix) {
        let a = DenseMatrix::from_rows(&[&[0.0, 1.0], &[-20.0, -0.5]]).unwrap();
        let b = DenseMatrix::column(&[0.0, 1.0]);
        let c = DenseMatrix::row(&[1.0, 0.0]);
        let model = AgentModel::new(a.clone(), b, c).unwrap();
        let g = DirectedGraph::new(2, &[(0, 1), (1, 0)], false).unwrap();
        let gains = GainSet::design(&model, 0.0, 2).unwrap();
        let net = Network::new(ProtocolKind::LeaderlessC, &g, &model, &gains, LeaderSpec::Zero).unwrap();
        (net, a)
    }

    #[test]
    fn rk4_is_fourth_order() {
        let (net, a) = linear_network();
        let mut s0 = NetworkState::zeros(net.layout());
        s0.x_mut().copy_from_slice(&[1.0, 0.5, 1.0, 0.5]);
        s0.v_mut().copy_from_slice(&[1.0, 0.5, 1.0, 0.5]);
        s0.d_mut().fill(1.0);
        let t_end = 2.0;
        let exact = expm(&a.scale(t_end)).matvec(&[1.0, 0.5]);
        let err = |dt: f64| {
            let cfg = SimConfig { dt, t_end, record_every: 1000, ..Default::default() };
            let tr = simulate(&net, &s0, &cfg).unwrap();
            let x = tr.final_state().unwrap().x()[..2].to_vec();
            norm2(&[x[0] - exact[0], x[1] - exact[1]])
        };
        let e: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&dt| err(dt)).collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((12.0..=20.0).contains(&ratio), "ratio {ratio} from {e:?}");
        }
    }

    #[test]
    fn euler_is_first_order() {
        let (net, a) = linear_network();
        let mut s0 = NetworkState::zeros(net.layout());
        s0.x_mut().copy_from_slice(&[1.0, 0.0, 1.0, 0.0]);
        s0.v_mut().copy_from_slice(&[1.0, 0.0, 1.0, 0.0]);
        s0.d_mut().fill(1.0);
        let exact = expm(&a).matvec(&[1.0, 0.0]);
        let err = |dt: f64| {
            let cfg = SimConfig { dt, t_end: 1.0, record_every: 1000, integrator: Integrator::Euler };
            let x = simulate(&net, &s0, &cfg).unwrap().final_state().unwrap().x()[..2].to_vec();
            norm2(&[x[0] - exact[0], x[1] - exact[1]])
        };
        let ratio = err(1e-3) / err(5e-4);
        assert!((1.8..2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn manifold_start_stays_on_manifold() {
        let model = AgentModel::double_integrator();
        let g = DirectedGraph::new(2, &[(0, 1), (1, 0)], false).unwrap();
        let gains = GainSet::design(&model, 0.0, 2).unwrap();
        let net = Network::new(ProtocolKind::LeaderlessC, &g, &model, &gains, LeaderSpec::Zero).unwrap();
        let mut s = NetworkState::zeros(net.layout());
        for i in 0..2 {
            s.x_mut()[2 * i..2 * i + 2].copy_from_slice(&[0.3, -0.1]);
            s.v_mut()[2 * i..2 * i + 2].copy_from_slice(&[0.1, 0.2]);
            s.w_mut()[2 * i..2 * i + 2].copy_from_slice(&[-0.4, 0.05]);
        }
        s.d_mut().fill(1.0);
        let cfg = SimConfig { dt: 1e-3, t_end: 10.0, record_every: 100, ..Default::default() };
        let tr = simulate(&net, &s, &cfg).unwrap();
        assert!(tr.xi_norms().iter().all(|v| *v <= 1e-9));
        assert!(tr.states.iter().all(|st| st.d() == [1.0, 1.0]));
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn runs_are_bit_identical() {
        let (net, _) = linear_network();
        let s0 = random_initial_state(&net, 7, 1.0, 1.0, None).unwrap();
        let cfg = SimConfig { dt: 1e-2, t_end: 2.0, record_every: 3, ..Default::default() };
        let bytes = || {
            let mut out = Vec::new();
            simulate(&net, &s0, &cfg).unwrap().write_csv(&mut out).unwrap();
            out
        };
        assert_eq!(bytes(), bytes());
    }

    #[test]
    fn csv_header_names_every_column() {
        let model = AgentModel::double_integrator();
        let g = DirectedGraph::new(3, &[(0, 1), (1, 2), (2, 1)], true).unwrap();
        let gains = GainSet::design(&model, 0.0, 2).unwrap();
        let net = Network::new(ProtocolKind::LfContinuous, &g, &model, &gains, LeaderSpec::Zero).unwrap();
        let s0 = random_initial_state(&net, 1, 1.0, 1.0, Some(&[0.0, 0.0])).unwrap();
        let cfg = SimConfig { dt: 1e-2, t_end: 0.05, record_every: 1, ..Default::default() };
        let tr = simulate(&net, &s0, &cfg).unwrap();
        let h = tr.csv_header();
        assert_eq!(h.len(), tr.csv_row(0).len());
        assert_eq!(h[1], "x[0][0]");
        assert!(h.contains(&"v[0][1]".to_string()));
        assert!(h.contains(&"w[1][0]".to_string()) && !h.contains(&"w[0][0]".to_string()));
        assert!(h.contains(&"u[0][0]".to_string()) && h.contains(&"d[2]".to_string()));
        assert_eq!(h.last().unwrap(), "norm_xi");
        assert_eq!(tr.len(), 6);
    }

    #[test]
    fn divergence_keeps_last_finite_state() {
        let a = DenseMatrix::from_rows(&[&[1e3]]).unwrap();
        let one = DenseMatrix::from_rows(&[&[1.0]]).unwrap();
        let model = AgentModel::new(a, one.clone(), one.clone()).unwrap();
        let g = DirectedGraph::new(2, &[(0, 1), (1, 0)], false).unwrap();
        let gains = GainSet {
            k: Some(DenseMatrix::from_rows(&[&[0.0]]).unwrap()),
            f: Some(DenseMatrix::from_rows(&[&[0.0]]).unwrap()),
            s: Some(one),
            ..Default::default()
        };
        let net = Network::new(ProtocolKind::LeaderlessC, &g, &model, &gains, LeaderSpec::Zero).unwrap();
        let s0 = random_initial_state(&net, 3, 1.0, 1.0, None).unwrap();
        let cfg = SimConfig { dt: 0.1, t_end: 100.0, record_every: 1, ..Default::default() };
        match simulate(&net, &s0, &cfg) {
            Err(Error::Divergence { t, last_finite }) => {
                assert!(t > 0.0 && t < 100.0);
                assert!(last_finite.is_finite());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn bad_initial_gain_is_rejected() {
        let model = AgentModel::double_integrator();
        let g = DirectedGraph::new(2, &[(0, 1)], true).unwrap();
        let gains = GainSet::design(&model, 0.0, 1).unwrap();
        let net = Network::new(ProtocolKind::LfContinuous, &g, &model, &gains, LeaderSpec::Zero).unwrap();
        let s0 = random_initial_state(&net, 0, 1.0, 0.5, Some(&[0.0, 0.0])).unwrap();
        let err = simulate(&net, &s0, &SimConfig::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
