//! Right-hand sides of the six adaptive consensus protocols.
//!
//! Output-feedback protocols run a local observer `v` and a distributed
//! observer `w` per agent; state-feedback protocols act on the relative
//! state `ξ̃` directly. Leader-follower protocols also integrate the leader
//! state `x₀` and, for output feedback, the leader observer `ṽ₀`.

use std::fmt;
use std::str::FromStr;

use crate::agents::{AgentModel, LeaderSpec};
use crate::error::{Error, Result};
use crate::gains::GainSet;
use crate::graph::DirectedGraph;
use crate::linalg::{norm2, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    /// Observer coupling through `FC`, adaptive law on `CᵀC`.
    LeaderlessC,
    /// Observer coupling through `BK`, adaptive law on `Ω`.
    LeaderlessB,
    /// Leader-follower output feedback with unit-direction terms `h`.
    LfDiscontinuous,
    /// As [`Self::LfDiscontinuous`] with boundary layers and σ-modification.
    LfContinuous,
    /// Leader-follower relative-state feedback with `h`.
    LfStateDiscontinuous,
    /// As [`Self::LfStateDiscontinuous`] with boundary layers and σ-modification.
    LfStateContinuous,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 6] = [
        ProtocolKind::LeaderlessC,
        ProtocolKind::LeaderlessB,
        ProtocolKind::LfDiscontinuous,
        ProtocolKind::LfContinuous,
        ProtocolKind::LfStateDiscontinuous,
        ProtocolKind::LfStateContinuous,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::LeaderlessC => "leaderless-c",
            ProtocolKind::LeaderlessB => "leaderless-b",
            ProtocolKind::LfDiscontinuous => "lf-discontinuous",
            ProtocolKind::LfContinuous => "lf-continuous",
            ProtocolKind::LfStateDiscontinuous => "lf-state-discontinuous",
            ProtocolKind::LfStateContinuous => "lf-state-continuous",
        }
    }

    pub fn is_leader_follower(self) -> bool {
        !matches!(self, ProtocolKind::LeaderlessC | ProtocolKind::LeaderlessB)
    }

    pub fn is_state_feedback(self) -> bool {
        matches!(
            self,
            ProtocolKind::LfStateDiscontinuous | ProtocolKind::LfStateContinuous
        )
    }

    pub fn uses_observers(self) -> bool {
        !self.is_state_feedback()
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, ProtocolKind::LfContinuous | ProtocolKind::LfStateContinuous)
    }

    /// Lower bound on `dᵢ` preserved by the exact dynamics.
    pub fn d_floor(self) -> f64 {
        if self.is_continuous() {
            1.0
        } else {
            0.0
        }
    }

    fn requirement(self) -> &'static str {
        match self {
            ProtocolKind::LeaderlessC => "the leaderless FC-coupled protocol",
            ProtocolKind::LeaderlessB => "the leaderless BK-coupled protocol",
            ProtocolKind::LfDiscontinuous => "the discontinuous leader-follower output protocol",
            ProtocolKind::LfContinuous => "the continuous leader-follower output protocol",
            ProtocolKind::LfStateDiscontinuous => {
                "the discontinuous leader-follower state protocol"
            }
            ProtocolKind::LfStateContinuous => "the continuous leader-follower state protocol",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown protocol `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// `h(z) = z/‖z‖`, and `0` at `z = 0`.
pub fn h(z: &[f64]) -> Vec<f64> {
    let n = norm2(z);
    if n == 0.0 {
        vec![0.0; z.len()]
    } else {
        z.iter().map(|v| v / n).collect()
    }
}

/// Boundary-layer version of [`h`]: `z/‖z‖` outside the ball of radius
/// `κ`, `z/κ` inside.
pub fn h_tilde(z: &[f64], kappa: f64) -> Vec<f64> {
    let n = norm2(z);
    let scale = if n > kappa { n } else { kappa };
    z.iter().map(|v| v / scale).collect()
}

/// Where each block lives in the flat state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub agents: usize,
    pub leader: bool,
    pub observers: bool,
}

impl Layout {
    pub fn for_kind(kind: ProtocolKind, n: usize, agents: usize) -> Self {
        Self {
            n,
            agents,
            leader: kind.is_leader_follower(),
            observers: kind.uses_observers(),
        }
    }

    fn leader_len(&self) -> usize {
        if self.leader {
            self.n * if self.observers { 2 } else { 1 }
        } else {
            0
        }
    }

    fn block(&self) -> usize {
        self.agents * self.n
    }

    fn x_off(&self) -> usize {
        self.leader_len()
    }

    fn v_off(&self) -> usize {
        self.x_off() + self.block()
    }

    fn w_off(&self) -> usize {
        self.v_off() + if self.observers { self.block() } else { 0 }
    }

    fn d_off(&self) -> usize {
        self.w_off() + if self.observers { self.block() } else { 0 }
    }

    pub fn len(&self) -> usize {
        self.d_off() + self.agents
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Stacked network state `[x₀, ṽ₀, x, v, w, d]`; absent blocks are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    layout: Layout,
    data: Vec<f64>,
}

impl NetworkState {
    pub fn zeros(layout: Layout) -> Self {
        Self {
            layout,
            data: vec![0.0; layout.len()],
        }
    }

    pub fn from_vec(layout: Layout, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "state needs {} values, got {}",
                layout.len(),
                data.len()
            )));
        }
        Ok(Self { layout, data })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn x0(&self) -> &[f64] {
        let n = if self.layout.leader { self.layout.n } else { 0 };
        &self.data[..n]
    }

    pub fn x0_mut(&mut self) -> &mut [f64] {
        let n = if self.layout.leader { self.layout.n } else { 0 };
        &mut self.data[..n]
    }

    pub fn v0(&self) -> &[f64] {
        let l = &self.layout;
        if l.leader && l.observers {
            &self.data[l.n..2 * l.n]
        } else {
            &[]
        }
    }

    pub fn v0_mut(&mut self) -> &mut [f64] {
        let l = self.layout;
        if l.leader && l.observers {
            &mut self.data[l.n..2 * l.n]
        } else {
            &mut []
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.data[self.layout.x_off()..self.layout.v_off()]
    }

    pub fn x_mut(&mut self) -> &mut [f64] {
        let l = self.layout;
        &mut self.data[l.x_off()..l.v_off()]
    }

    pub fn v(&self) -> &[f64] {
        &self.data[self.layout.v_off()..self.layout.w_off()]
    }

    pub fn v_mut(&mut self) -> &mut [f64] {
        let l = self.layout;
        &mut self.data[l.v_off()..l.w_off()]
    }

    pub fn w(&self) -> &[f64] {
        &self.data[self.layout.w_off()..self.layout.d_off()]
    }

    pub fn w_mut(&mut self) -> &mut [f64] {
        let l = self.layout;
        &mut self.data[l.w_off()..l.d_off()]
    }

    pub fn d(&self) -> &[f64] {
        &self.data[self.layout.d_off()..]
    }

    pub fn d_mut(&mut self) -> &mut [f64] {
        let off = self.layout.d_off();
        &mut self.data[off..]
    }

    /// Agent `i`'s slice of a stacked block.
    pub fn agent<'a>(&self, block: &'a [f64], i: usize) -> &'a [f64] {
        let n = self.layout.n;
        &block[i * n..(i + 1) * n]
    }
}

/// Neighbourhood quantities computed from a state, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSignals {
    /// Consensus error `ξ` (or `ξ̃` with a leader).
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub psi: Vec<f64>,
    /// `ϱ = ψ − η`.
    pub varrho: Vec<f64>,
    /// State-dependent gains `ρᵢ`.
    pub rho: Vec<f64>,
    /// Leader estimation error `ṽ₀ − x₀`.
    pub e0: Option<Vec<f64>>,
}

impl DerivedSignals {
    /// `ζ = η − ξ`.
    pub fn zeta(&self) -> Vec<f64> {
        self.eta.iter().zip(&self.xi).map(|(a, b)| a - b).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDerivative {
    pub zeta: Vec<f64>,
    pub varrho: Vec<f64>,
}

/// A protocol bound to a graph, model and gains, with every matrix it
/// needs precomputed.
#[derive(Debug, Clone)]
pub struct Network {
    kind: ProtocolKind,
    model: AgentModel,
    leader: LeaderSpec,
    /// `L` (leaderless) or `L̂₁` (with leader).
    m: DenseMatrix,
    /// `aᵢ₀`, zero without a leader.
    a_i0: Vec<f64>,
    n: usize,
    p: usize,
    agents: usize,
    k: DenseMatrix,
    f: Option<DenseMatrix>,
    /// Distributed-observer coupling matrix `FC` or `BK`.
    coupling: Option<DenseMatrix>,
    /// Weight of `ρᵢ`: `S` or `P⁻¹`.
    rho_weight: DenseMatrix,
    /// Weight of the adaptive law: `CᵀC` or `Ω`.
    d_weight: DenseMatrix,
    /// `BᵀS` inside the observer unit-direction term.
    bt_obs: Option<DenseMatrix>,
    /// `BᵀQ` (output) or `BᵀP⁻¹` (state) inside the control unit-direction term.
    bt_ctrl: Option<DenseMatrix>,
    beta: f64,
    kappa: Vec<f64>,
    phi: Vec<f64>,
    gains: GainSet,
}

fn need<'a>(
    v: &'a Option<DenseMatrix>,
    component: &'static str,
    kind: ProtocolKind,
) -> Result<&'a DenseMatrix> {
    v.as_ref().ok_or(Error::MissingGain {
        component,
        requirement: kind.requirement(),
    })
}

fn check_shape(m: &DenseMatrix, shape: (usize, usize), what: &str) -> Result<()> {
    if m.shape() != shape {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {}x{}",
            m.rows(),
            m.cols(),
            shape.0,
            shape.1
        )));
    }
    Ok(())
}

impl Network {
    pub fn new(
        kind: ProtocolKind,
        graph: &DirectedGraph,
        model: &AgentModel,
        gains: &GainSet,
        leader: LeaderSpec,
    ) -> Result<Self> {
        if kind.is_leader_follower() {
            if !graph.has_leader() {
                return Err(Error::Config(format!("{kind} needs a leader-flagged graph")));
            }
            if !graph.has_spanning_tree_rooted_at(0) {
                return Err(Error::GraphClass(
                    "no directed spanning tree rooted at the leader".into(),
                ));
            }
            leader.validate(model)?;
        } else {
            if graph.has_leader() {
                return Err(Error::Config(format!("{kind} runs on a leaderless graph")));
            }
            if !graph.is_strongly_connected() {
                return Err(Error::GraphClass("graph is not strongly connected".into()));
            }
        }
        let bundle = graph.laplacian();
        let m = bundle.agent_block().clone();
        let agents = graph.follower_count();
        let a_i0 = match &bundle.l2 {
            Some(l2) => l2.iter().map(|v| -v).collect(),
            None => vec![0.0; agents],
        };
        let (n, p, q_out) = (model.n(), model.p(), model.m());
        let b = &model.b;
        let bt = b.transpose();

        let k = need(&gains.k, "K", kind)?.clone();
        check_shape(&k, (p, n), "K")?;
        let mut f = None;
        let mut coupling = None;
        let mut bt_obs = None;
        let mut bt_ctrl = None;
        let rho_weight;
        let d_weight;
        if kind.uses_observers() {
            let fm = need(&gains.f, "F", kind)?;
            check_shape(fm, (n, q_out), "F")?;
            f = Some(fm.clone());
        }
        match kind {
            ProtocolKind::LeaderlessC | ProtocolKind::LfDiscontinuous | ProtocolKind::LfContinuous => {
                let s = need(&gains.s, "S", kind)?;
                check_shape(s, (n, n), "S")?;
                rho_weight = s.clone();
                d_weight = &model.c.transpose() * &model.c;
                coupling = Some(f.as_ref().unwrap() * &model.c);
                if kind.is_leader_follower() {
                    bt_obs = Some(&bt * s);
                    let q = need(&gains.q, "Q", kind)?;
                    check_shape(q, (n, n), "Q")?;
                    bt_ctrl = Some(&bt * q);
                }
            }
            ProtocolKind::LeaderlessB
            | ProtocolKind::LfStateDiscontinuous
            | ProtocolKind::LfStateContinuous => {
                let pm = need(&gains.p, "P", kind)?;
                check_shape(pm, (n, n), "P")?;
                let pinv = pm.inverse()?.symmetric_part();
                let om = need(&gains.omega, "Omega", kind)?;
                check_shape(om, (n, n), "Omega")?;
                d_weight = om.clone();
                if kind == ProtocolKind::LeaderlessB {
                    coupling = Some(b * &k);
                } else {
                    bt_ctrl = Some(&bt * &pinv);
                }
                rho_weight = pinv;
            }
        }
        let beta = if kind.is_leader_follower() {
            gains.beta.ok_or(Error::MissingGain {
                component: "beta",
                requirement: kind.requirement(),
            })?
        } else {
            0.0
        };
        if beta < 0.0 || !beta.is_finite() {
            return Err(Error::Config(format!("beta = {beta} must be finite and ≥ 0")));
        }
        let per_agent = |v: &Option<Vec<f64>>, name: &'static str| -> Result<Vec<f64>> {
            if !kind.is_continuous() {
                return Ok(Vec::new());
            }
            let v = v.as_ref().ok_or(Error::MissingGain {
                component: name,
                requirement: kind.requirement(),
            })?;
            let v = if v.len() == 1 { vec![v[0]; agents] } else { v.clone() };
            if v.len() != agents {
                return Err(Error::Config(format!(
                    "{name} has {} entries for {agents} followers",
                    v.len()
                )));
            }
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::Config(format!("every {name}_i must be positive")));
            }
            Ok(v)
        };
        let kappa = per_agent(&gains.kappa, "kappa")?;
        let phi = per_agent(&gains.phi, "phi")?;
        Ok(Self {
            kind,
            model: model.clone(),
            leader,
            m,
            a_i0,
            n,
            p,
            agents,
            k,
            f,
            coupling,
            rho_weight,
            d_weight,
            bt_obs,
            bt_ctrl,
            beta,
            kappa,
            phi,
            gains: gains.clone(),
        })
    }

    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn model(&self) -> &AgentModel {
        &self.model
    }

    pub fn leader(&self) -> &LeaderSpec {
        &self.leader
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    /// `L` or `L̂₁`.
    pub fn agent_block(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn leader_weights(&self) -> &[f64] {
        &self.a_i0
    }

    /// `S` for output-feedback protocols, `P⁻¹` for state feedback.
    pub fn rho_weight(&self) -> &DenseMatrix {
        &self.rho_weight
    }

    pub fn layout(&self) -> Layout {
        Layout::for_kind(self.kind, self.n, self.agents)
    }

    fn direction(&self, z: &[f64], i: usize) -> Vec<f64> {
        if self.kind.is_continuous() {
            h_tilde(z, self.kappa[i])
        } else {
            h(z)
        }
    }

    /// `out_i = Σⱼ mᵢⱼ (zⱼ − offset)`, the Kronecker product `(M ⊗ I)(z − 1⊗offset)`.
    fn neighbourhood(&self, z: &[f64], offset: Option<&[f64]>) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; self.agents * n];
        for i in 0..self.agents {
            for j in 0..self.agents {
                let mij = self.m[(i, j)];
                if mij == 0.0 {
                    continue;
                }
                for c in 0..n {
                    let off = offset.map_or(0.0, |o| o[c]);
                    out[i * n + c] += mij * (z[j * n + c] - off);
                }
            }
        }
        out
    }

    fn check_state(&self, state: &NetworkState) -> Result<()> {
        if state.layout() != self.layout() {
            return Err(Error::Dimension(format!(
                "state layout {:?} does not match network {:?}",
                state.layout(),
                self.layout()
            )));
        }
        Ok(())
    }

    pub fn signals(&self, state: &NetworkState) -> Result<DerivedSignals> {
        self.check_state(state)?;
        let n = self.n;
        let lf = self.kind.is_leader_follower();
        let x0 = lf.then(|| state.x0());
        let xi = self.neighbourhood(state.x(), x0);
        let mut rho = vec![0.0; self.agents];
        if self.kind.is_state_feedback() {
            for (i, r) in rho.iter_mut().enumerate() {
                *r = self.rho_weight.quad_form(&xi[i * n..(i + 1) * n]);
            }
            let e0 = None;
            return Ok(DerivedSignals {
                xi,
                eta: Vec::new(),
                psi: Vec::new(),
                varrho: Vec::new(),
                rho,
                e0,
            });
        }
        let v0 = lf.then(|| state.v0());
        let eta = self.neighbourhood(state.v(), v0);
        let psi = self.neighbourhood(state.w(), None);
        let varrho: Vec<f64> = psi.iter().zip(&eta).map(|(a, b)| a - b).collect();
        for (i, r) in rho.iter_mut().enumerate() {
            *r = self.rho_weight.quad_form(&varrho[i * n..(i + 1) * n]);
        }
        let e0 = lf.then(|| {
            state
                .v0()
                .iter()
                .zip(state.x0())
                .map(|(a, b)| a - b)
                .collect()
        });
        Ok(DerivedSignals {
            xi,
            eta,
            psi,
            varrho,
            rho,
            e0,
        })
    }

    /// Time derivative of the network state at `t`, and the stacked controls `u`.
    pub fn derivative(&self, t: f64, state: &NetworkState) -> Result<(NetworkState, Vec<f64>)> {
        let sig = self.signals(state)?;
        let (n, p) = (self.n, self.p);
        let a = &self.model.a;
        let b = &self.model.b;
        let c = &self.model.c;
        let layout = self.layout();
        let mut out = NetworkState::zeros(layout);
        let mut u = vec![0.0; self.agents * p];
        let lf = self.kind.is_leader_follower();

        let u0 = if lf {
            self.leader.input(t, state.x0(), p)
        } else {
            Vec::new()
        };

        if self.kind.is_state_feedback() {
            let bt_ctrl = self.bt_ctrl.as_ref().expect("state protocols carry BᵀP⁻¹");
            let x = state.x();
            for i in 0..self.agents {
                let xi_i = &sig.xi[i * n..(i + 1) * n];
                let gain = state.d()[i] + sig.rho[i];
                let mut ui = self.k.matvec(xi_i);
                ui.iter_mut().for_each(|v| *v *= gain);
                let dir = self.direction(&bt_ctrl.matvec(xi_i), i);
                ui.iter_mut().zip(&dir).for_each(|(v, hd)| *v -= self.beta * hd);
                let mut dx = a.matvec(&x[i * n..(i + 1) * n]);
                b.matvec_acc(1.0, &ui, &mut dx);
                out.x_mut()[i * n..(i + 1) * n].copy_from_slice(&dx);
                u[i * p..(i + 1) * p].copy_from_slice(&ui);
                out.d_mut()[i] = self.adaptive_rate(i, state.d()[i], xi_i);
            }
        } else {
            let f = self.f.as_ref().expect("output protocols carry F");
            let coupling = self.coupling.as_ref().expect("output protocols carry a coupling");
            let (x, v, w) = (state.x(), state.v(), state.w());
            for i in 0..self.agents {
                let r = i * n..(i + 1) * n;
                let vr_i = &sig.varrho[r.clone()];
                let mut ui = self.k.matvec(&w[r.clone()]);
                let mut obs_dir = Vec::new();
                if lf {
                    let bt_ctrl = self.bt_ctrl.as_ref().expect("LF output protocols carry BᵀQ");
                    let bt_obs = self.bt_obs.as_ref().expect("LF output protocols carry BᵀS");
                    let ctrl_dir = self.direction(&bt_ctrl.matvec(&sig.eta[r.clone()]), i);
                    ui.iter_mut().zip(&ctrl_dir).for_each(|(v, hd)| *v -= self.beta * hd);
                    obs_dir = self.direction(&bt_obs.matvec(vr_i), i);
                }
                // F(Cvᵢ − yᵢ)
                let resid: Vec<f64> = c
                    .matvec(&v[r.clone()])
                    .iter()
                    .zip(c.matvec(&x[r.clone()]))
                    .map(|(a, b)| a - b)
                    .collect();
                let innov = f.matvec(&resid);

                let mut dx = a.matvec(&x[r.clone()]);
                b.matvec_acc(1.0, &ui, &mut dx);
                let mut dv = a.matvec(&v[r.clone()]);
                b.matvec_acc(1.0, &ui, &mut dv);
                dv.iter_mut().zip(&innov).for_each(|(d, e)| *d += e);
                let mut dw = a.matvec(&w[r.clone()]);
                b.matvec_acc(1.0, &ui, &mut dw);
                if lf {
                    b.matvec_acc(-self.beta, &obs_dir, &mut dw);
                }
                coupling.matvec_acc(state.d()[i] + sig.rho[i], vr_i, &mut dw);
                dw.iter_mut().zip(&innov).for_each(|(d, e)| *d += e);

                out.x_mut()[r.clone()].copy_from_slice(&dx);
                out.v_mut()[r.clone()].copy_from_slice(&dv);
                out.w_mut()[r.clone()].copy_from_slice(&dw);
                u[i * p..(i + 1) * p].copy_from_slice(&ui);
                out.d_mut()[i] = self.adaptive_rate(i, state.d()[i], vr_i);
            }
            if lf {
                let (x0, v0) = (state.x0().to_vec(), state.v0().to_vec());
                let mut dv0 = a.matvec(&v0);
                b.matvec_acc(1.0, &u0, &mut dv0);
                let resid: Vec<f64> =
                    c.matvec(&v0).iter().zip(c.matvec(&x0)).map(|(a, b)| a - b).collect();
                f.matvec_acc(1.0, &resid, &mut dv0);
                out.v0_mut().copy_from_slice(&dv0);
            }
        }
        if lf {
            let mut dx0 = a.matvec(state.x0());
            b.matvec_acc(1.0, &u0, &mut dx0);
            out.x0_mut().copy_from_slice(&dx0);
        }
        Ok((out, u))
    }

    fn adaptive_rate(&self, i: usize, d: f64, z: &[f64]) -> f64 {
        let mut rate = self.d_weight.quad_form(z);
        if self.kind.is_continuous() {
            rate -= self.phi[i] * (d - 1.0);
        }
        rate
    }

    /// `(ζ̇, ϱ̇)` from the transformed closed-loop error dynamics, evaluated
    /// directly on `(ζ, ϱ, d, e₀, u₀)` rather than through the raw states.
    pub fn closed_loop_error_derivative(&self, t: f64, state: &NetworkState) -> Result<ErrorDerivative> {
        if self.kind.is_state_feedback() {
            return Err(Error::NotApplicable(
                "state-feedback protocols have no observer errors".into(),
            ));
        }
        let sig = self.signals(state)?;
        let n = self.n;
        let a = &self.model.a;
        let f = self.f.as_ref().unwrap();
        let fc = f * &self.model.c;
        let afc = a + &fc;
        let coupling = self.coupling.as_ref().unwrap();
        let zeta = sig.zeta();
        let d = state.d();
        let mut dz = vec![0.0; zeta.len()];
        let mut dr = vec![0.0; zeta.len()];
        let lf = self.kind.is_leader_follower();
        let u0 = if lf {
            self.leader.input(t, state.x0(), self.p)
        } else {
            Vec::new()
        };
        // per-agent terms that the graph then mixes
        let mut mixed: Vec<Vec<f64>> = Vec::with_capacity(self.agents);
        for j in 0..self.agents {
            let r = j * n..(j + 1) * n;
            let mut term = vec![0.0; n];
            coupling.matvec_acc(d[j] + sig.rho[j], &sig.varrho[r.clone()], &mut term);
            if lf {
                let bt_obs = self.bt_obs.as_ref().unwrap();
                let dir = self.direction(&bt_obs.matvec(&sig.varrho[r.clone()]), j);
                self.model.b.matvec_acc(-self.beta, &dir, &mut term);
            }
            mixed.push(term);
        }
        for i in 0..self.agents {
            let r = i * n..(i + 1) * n;
            dz[r.clone()].copy_from_slice(&afc.matvec(&zeta[r.clone()]));
            let mut acc = a.matvec(&sig.varrho[r.clone()]);
            for (j, term) in mixed.iter().enumerate() {
                let mij = self.m[(i, j)];
                if mij != 0.0 {
                    acc.iter_mut().zip(term).for_each(|(o, v)| *o += mij * v);
                }
            }
            if lf && self.a_i0[i] != 0.0 {
                // row sums of L̂₁ are aᵢ₀: (L̂₁ ⊗ B)(1 ⊗ u₀) + (L̂₁ ⊗ FC)(1 ⊗ e₀)
                self.model.b.matvec_acc(self.a_i0[i], &u0, &mut acc);
                fc.matvec_acc(self.a_i0[i], sig.e0.as_ref().unwrap(), &mut acc);
            }
            dr[r].copy_from_slice(&acc);
        }
        Ok(ErrorDerivative {
            zeta: dz,
            varrho: dr,
        })
    }

    /// `‖ξ‖` at `state`.
    pub fn consensus_error_norm(&self, state: &NetworkState) -> Result<f64> {
        Ok(norm2(&self.signals(state)?.xi))
    }
}

/// Derived signals of `state` under `network`.
pub fn derive_signals(network: &Network, state: &NetworkState) -> Result<DerivedSignals> {
    network.signals(state)
}

/// State derivative and stacked controls of `network` at `(t, state)`.
pub fn protocol_derivative(
    network: &Network,
    t: f64,
    state: &NetworkState,
) -> Result<(NetworkState, Vec<f64>)> {
    network.derivative(t, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gains::GainSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fill(state: &mut NetworkState, rng: &mut ChaCha8Rng) {
        for v in state.as_mut_slice() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for d in state.d_mut() {
            *d = rng.gen_range(1.0..3.0);
        }
    }

    fn line_pair() -> DirectedGraph {
        DirectedGraph::new(2, &[(0, 1), (1, 0)], false).unwrap()
    }

    fn di_gains(followers: usize, omega: f64) -> GainSet {
        GainSet::design(&AgentModel::double_integrator(), omega, followers).unwrap()
    }

    #[test]
    fn h_and_h_tilde() {
        assert_eq!(h(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(h(&[3.0, 4.0]), vec![0.6, 0.8]);
        assert_eq!(h_tilde(&[0.0, 0.0], 0.05), vec![0.0, 0.0]);
        let v = h_tilde(&[0.03, 0.0], 0.05);
        assert!((v[0] - 0.6).abs() < 1e-15 && v[1] == 0.0);
        assert_eq!(h_tilde(&[3.0, 4.0], 0.05), vec![0.6, 0.8]);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.name().parse::<ProtocolKind>().unwrap(), k);
        }
        assert!("eq2".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn consensus_manifold_has_no_coupling() {
        let model = AgentModel::double_integrator();
        let net = Network::new(
            ProtocolKind::LeaderlessC,
            &line_pair(),
            &model,
            &di_gains(2, 0.0),
            LeaderSpec::Zero,
        )
        .unwrap();
        let mut s = NetworkState::zeros(net.layout());
        for i in 0..2 {
            s.x_mut()[2 * i..2 * i + 2].copy_from_slice(&[1.0, -0.5]);
            s.v_mut()[2 * i..2 * i + 2].copy_from_slice(&[1.0, -0.5]);
            s.w_mut()[2 * i..2 * i + 2].copy_from_slice(&[0.2, 0.1]);
            s.d_mut()[i] = 1.0;
        }
        let sig = net.signals(&s).unwrap();
        assert!(sig.xi.iter().chain(&sig.eta).chain(&sig.psi).all(|v| *v == 0.0));
        let (ds, u) = net.derivative(0.0, &s).unwrap();
        let k = net.gains().k.clone().unwrap();
        let kw = k.matvec(&[0.2, 0.1])[0];
        assert_eq!(u, vec![kw, kw]);
        let want = model.derivative(&[1.0, -0.5], &[kw]).unwrap();
        assert_eq!(&ds.x()[..2], want.as_slice());
        assert_eq!(ds.d(), &[0.0, 0.0]);
    }

    #[test]
    fn two_agent_sums_by_hand() {
        let g = DirectedGraph::new(2, &[(0, 1)], false).unwrap();
        let chain_pair = DirectedGraph::new(2, &[(0, 1), (1, 0)], false).unwrap();
        assert!(!g.is_strongly_connected());
        let net = Network::new(
            ProtocolKind::LeaderlessC,
            &chain_pair,
            &AgentModel::double_integrator(),
            &di_gains(2, 0.0),
            LeaderSpec::Zero,
        )
        .unwrap();
        let mut s = NetworkState::zeros(net.layout());
        s.x_mut().copy_from_slice(&[1.0, 2.0, 4.0, 8.0]);
        s.v_mut().copy_from_slice(&[0.5, 0.0, 0.0, 1.0]);
        s.w_mut().copy_from_slice(&[3.0, 1.0, 1.0, 1.0]);
        let sig = net.signals(&s).unwrap();
        assert_eq!(sig.xi, vec![-3.0, -6.0, 3.0, 6.0]);
        assert_eq!(sig.eta, vec![0.5, -1.0, -0.5, 1.0]);
        assert_eq!(sig.psi, vec![2.0, 0.0, -2.0, 0.0]);
        assert_eq!(sig.varrho, vec![1.5, 1.0, -1.5, -1.0]);
    }

    #[test]
    fn xi_matches_kronecker_oracle() {
        let g = DirectedGraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], false).unwrap();
        let net = Network::new(
            ProtocolKind::LeaderlessB,
            &g,
            &AgentModel::double_integrator(),
            &di_gains(4, 0.0),
            LeaderSpec::Zero,
        )
        .unwrap();
        let lk = g.laplacian().l.kron(&DenseMatrix::identity(2));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mut s = NetworkState::zeros(net.layout());
            random_fill(&mut s, &mut rng);
            let sig = net.signals(&s).unwrap();
            let want = lk.matvec(s.x());
            for (a, b) in sig.xi.iter().zip(&want) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stacked_consensus_error_dynamics() {
        let g = DirectedGraph::new(3, &[(0, 1), (1, 2), (2, 0)], false).unwrap();
        let lk = g.laplacian().l.kron(&DenseMatrix::identity(2));
        let model = AgentModel::double_integrator();
        let gains = di_gains(3, 0.0);
        let bk = &model.b * gains.k.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in [ProtocolKind::LeaderlessC, ProtocolKind::LeaderlessB] {
            let net = Network::new(kind, &g, &model, &gains, LeaderSpec::Zero).unwrap();
            for _ in 0..20 {
                let mut s = NetworkState::zeros(net.layout());
                random_fill(&mut s, &mut rng);
                let sig = net.signals(&s).unwrap();
                let (ds, _) = net.derivative(0.0, &s).unwrap();
                let lhs = lk.matvec(ds.x());
                for i in 0..3 {
                    let r = 2 * i..2 * i + 2;
                    let mut rhs = model.a.matvec(&sig.xi[r.clone()]);
                    bk.matvec_acc(1.0, &sig.psi[r.clone()], &mut rhs);
                    for (a, b) in lhs[r].iter().zip(&rhs) {
                        assert!((a - b).abs() < 1e-10);
                    }
                }
            }
        }
    }

    fn leader_graph() -> DirectedGraph {
        DirectedGraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 1), (0, 3)], true).unwrap()
    }

    #[test]
    fn single_follower_equilibrium() {
        let g = DirectedGraph::new(2, &[(0, 1)], true).unwrap();
        let model = AgentModel::double_integrator();
        for kind in [ProtocolKind::LfDiscontinuous, ProtocolKind::LfContinuous] {
            let net = Network::new(kind, &g, &model, &di_gains(1, 0.0), LeaderSpec::Zero).unwrap();
            let mut s = NetworkState::zeros(net.layout());
            let x0 = [0.7, -0.2];
            s.x0_mut().copy_from_slice(&x0);
            s.v0_mut().copy_from_slice(&x0);
            s.x_mut().copy_from_slice(&x0);
            s.v_mut().copy_from_slice(&x0);
            s.d_mut()[0] = 1.0;
            let err = net.closed_loop_error_derivative(0.0, &s).unwrap();
            assert!(err.zeta.iter().chain(&err.varrho).all(|v| v.abs() < 1e-15));
            let (ds, _) = net.derivative(0.0, &s).unwrap();
            assert_eq!(ds.d()[0], 0.0);
            // x₁ and x₀ move together
            assert_eq!(ds.x(), ds.x0());
        }
    }

    /// The transformed error dynamics agree with the linear image of the raw
    /// derivative, `ζ̇ = (M⊗I)(v̇ − ẋ) − …`, to round-off.
    #[test]
    fn error_dynamics_match_raw_derivative() {
        let model = AgentModel::double_integrator();
        let sin = LeaderSpec::Sinusoid {
            amplitude: vec![0.8],
            frequency: vec![1.3],
            phase: vec![0.2],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cases = [
            (ProtocolKind::LeaderlessC, line_pair(), LeaderSpec::Zero),
            (ProtocolKind::LeaderlessB, line_pair(), LeaderSpec::Zero),
            (ProtocolKind::LfDiscontinuous, leader_graph(), sin.clone()),
            (ProtocolKind::LfContinuous, leader_graph(), sin),
        ];
        for (kind, g, leader) in cases {
            let agents = g.follower_count();
            let mut gains = di_gains(agents, 0.8);
            gains.beta = Some(1.5);
            let net = Network::new(kind, &g, &model, &gains, leader).unwrap();
            let mk = net.agent_block().kron(&DenseMatrix::identity(2));
            for _ in 0..20 {
                let mut s = NetworkState::zeros(net.layout());
                random_fill(&mut s, &mut rng);
                let t = rng.gen_range(0.0..5.0);
                let (ds, _) = net.derivative(t, &s).unwrap();
                let err = net.closed_loop_error_derivative(t, &s).unwrap();
                let ones = |v: &[f64]| -> Vec<f64> { (0..agents).flat_map(|_| v.to_vec()).collect() };
                let sub = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
                let (dx0, dv0) = if kind.is_leader_follower() {
                    (ones(ds.x0()), ones(ds.v0()))
                } else {
                    (vec![0.0; 2 * agents], vec![0.0; 2 * agents])
                };
                let deta = mk.matvec(&sub(ds.v(), &dv0));
                let dxi = mk.matvec(&sub(ds.x(), &dx0));
                let dpsi = mk.matvec(ds.w());
                let dzeta = sub(&deta, &dxi);
                let dvarrho = sub(&dpsi, &deta);
                for (a, b) in dzeta.iter().zip(&err.zeta) {
                    assert!((a - b).abs() < 1e-10, "{kind}: ζ̇ {a} vs {b}");
                }
                for (a, b) in dvarrho.iter().zip(&err.varrho) {
                    assert!((a - b).abs() < 1e-10, "{kind}: ϱ̇ {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn missing_gain_is_named() {
        let mut gains = di_gains(2, 0.0);
        gains.s = None;
        let err = Network::new(
            ProtocolKind::LeaderlessC,
            &line_pair(),
            &AgentModel::double_integrator(),
            &gains,
            LeaderSpec::Zero,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingGain { component: "S", .. }), "{err}");
    }

    #[test]
    fn graph_class_is_checked() {
        let model = AgentModel::double_integrator();
        let gains = di_gains(3, 0.0);
        let err = Network::new(ProtocolKind::LfContinuous, &line_pair(), &model, &gains, LeaderSpec::Zero);
        assert!(matches!(err, Err(Error::Config(_))));
        let chain = DirectedGraph::new(3, &[(0, 1), (1, 2)], false).unwrap();
        let err = Network::new(ProtocolKind::LeaderlessC, &chain, &model, &gains, LeaderSpec::Zero);
        assert!(matches!(err, Err(Error::GraphClass(_))));
    }

    #[test]
    fn adaptive_laws_are_nonnegative_at_floor() {
        let model = AgentModel::double_integrator();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for kind in [ProtocolKind::LfContinuous, ProtocolKind::LfStateContinuous] {
            let net = Network::new(kind, &leader_graph(), &model, &di_gains(3, 0.0), LeaderSpec::Zero)
                .unwrap();
            for _ in 0..50 {
                let mut s = NetworkState::zeros(net.layout());
                random_fill(&mut s, &mut rng);
                s.d_mut().iter_mut().for_each(|d| *d = 1.0);
                let (ds, _) = net.derivative(0.0, &s).unwrap();
                assert!(ds.d().iter().all(|v| *v >= 0.0));
            }
        }
    }
}
