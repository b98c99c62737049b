//! Proof-side constants, residual-set bounds and trace metrics.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{lambda2_lhat, left_null_vector, mmatrix_scaling};
use crate::keymat::fmt17;
use crate::linalg::{max_symmetric_eigenvalue, min_symmetric_eigenvalue, norm2, DenseMatrix};
use crate::protocols::{Network, ProtocolKind};
use crate::sim::SimulationTrace;

/// Weights, thresholds and decay rates from the stability arguments, at the
/// smallest admissible values. Fields that a protocol's argument does not
/// use are `None` or empty.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConstants {
    pub kind: ProtocolKind,
    /// Comparison level for `dᵢ`.
    pub alpha: f64,
    /// Left null vector of `L`, leaderless only.
    pub r: Vec<f64>,
    pub lambda2: Option<f64>,
    /// Diagonal scaling of `L̂₁`, leader-follower only.
    pub g: Vec<f64>,
    pub lambda0: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub delta: Option<f64>,
    /// The expressions `delta` is the minimum of.
    pub delta_candidates: Vec<f64>,
    pub pi: Vec<f64>,
    /// `−SA − AᵀS + 2CᵀC`.
    pub w: Option<DenseMatrix>,
    /// `−(QA + AᵀQ − 2Γ)` for output feedback, `−(P⁻¹A + AᵀP⁻¹ − 2Ω)` for state feedback.
    pub x: Option<DenseMatrix>,
    /// `QBBᵀQ`.
    pub big_gamma: Option<DenseMatrix>,
    pub omega: f64,
}

impl AnalysisConstants {
    /// `(name, value)` pairs for reports; absent values are skipped.
    pub fn summary(&self) -> Vec<(String, f64)> {
        let mut out = vec![("alpha".to_string(), self.alpha), ("omega".to_string(), self.omega)];
        let opt = [
            ("lambda2", self.lambda2),
            ("lambda0", self.lambda0),
            ("gamma", self.gamma),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("delta", self.delta),
        ];
        out.extend(opt.iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        for (name, m) in [("W", &self.w), ("X", &self.x)] {
            if let Some(m) = m {
                if let Ok(v) = min_symmetric_eigenvalue(m) {
                    out.push((format!("lambda_min({name})"), v));
                }
            }
        }
        for (i, p) in self.pi.iter().enumerate() {
            out.push((format!("Pi[{}]", i + 1), *p));
        }
        out
    }
}

fn positive_definite(m: &DenseMatrix, name: &str) -> Result<f64> {
    let v = min_symmetric_eigenvalue(m)?;
    if v <= 0.0 {
        return Err(Error::Certification(format!(
            "{name} is not positive definite (λ_min = {v:.3e})"
        )));
    }
    Ok(v)
}

/// Every constant the protocol's stability argument needs, for a leader
/// input bounded by `omega`.
pub fn compute_constants(network: &Network, omega: f64) -> Result<AnalysisConstants> {
    let kind = network.kind();
    let model = network.model();
    let gains = network.gains();
    let (a, b, c) = (&model.a, &model.b, &model.c);
    let at = a.transpose();
    let agents = network.agents();
    let m = network.agent_block();
    let mut k = AnalysisConstants {
        kind,
        alpha: 0.0,
        r: Vec::new(),
        lambda2: None,
        g: Vec::new(),
        lambda0: None,
        gamma: None,
        gamma1: None,
        gamma2: None,
        delta: None,
        delta_candidates: Vec::new(),
        pi: Vec::new(),
        w: None,
        x: None,
        big_gamma: None,
        omega,
    };
    let w_of = |s: &DenseMatrix| -> DenseMatrix {
        let ctc = &c.transpose() * c;
        (&(&(-&(s * a)) - &(&at * s)) + &ctc.scale(2.0)).symmetric_part()
    };

    if !kind.is_leader_follower() {
        let r = left_null_vector(m)?;
        let (_, lambda2) = lambda2_lhat(m, &r)?;
        let rmax = r.iter().cloned().fold(f64::MIN, f64::max);
        k.alpha = 5.0 * agents as f64 * rmax / lambda2;
        k.r = r;
        k.lambda2 = Some(lambda2);
        if kind == ProtocolKind::LeaderlessC {
            let w = w_of(network.rho_weight());
            positive_definite(&w, "W")?;
            k.w = Some(w);
        }
        return Ok(k);
    }

    let (g, lambda0) = mmatrix_scaling(m)?;
    let gmax = g.iter().cloned().fold(f64::MIN, f64::max);
    let gmin = g.iter().cloned().fold(f64::MAX, f64::min);
    k.lambda0 = Some(lambda0);
    let nn = agents as f64;
    let beta = gains.beta.unwrap_or(0.0);
    let a_i0 = network.leader_weights();
    let c_i: Vec<f64> = a_i0.iter().map(|ai| omega * ai + (2.0 * nn - 1.0) * beta).collect();
    let kappa = gains.kappa.clone().unwrap_or_default();
    let phi = gains.phi.clone().unwrap_or_default();
    let per = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };

    if kind.is_state_feedback() {
        k.alpha = 5.0 * gmax / (2.0 * lambda0);
        let pinv = network.rho_weight();
        let omega_m = gains.omega.as_ref().expect("checked by Network::new");
        let xt = (&(&(-&(pinv * a)) - &(&at * pinv)) + &omega_m.scale(2.0)).symmetric_part();
        let lx = positive_definite(&xt, "X")?;
        k.x = Some(xt);
        if kind.is_continuous() {
            let lmax_pinv = max_symmetric_eigenvalue(pinv)?;
            let phimin = (0..agents).map(|i| per(&phi, i)).fold(f64::MAX, f64::min);
            k.delta_candidates = vec![lx / (2.0 * lmax_pinv), phimin / 4.0];
            k.pi = (0..agents)
                .map(|i| {
                    let (ki, fi) = (per(&kappa, i), per(&phi, i));
                    g[i] * c_i[i] * ki + (1.0 / fi + lmax_pinv / (2.0 * lx)) * (c_i[i] * ki).powi(2) * g[i]
                })
                .collect();
        }
    } else {
        k.alpha = 15.0 * gmax / (4.0 * lambda0);
        let s = network.rho_weight();
        let q = gains.q.as_ref().expect("checked by Network::new");
        let f = gains.f.as_ref().expect("checked by Network::new");
        let w = w_of(s);
        let lw = positive_definite(&w, "W")?;
        let bbt = b * &b.transpose();
        let big_gamma = (&(q * &bbt) * q).symmetric_part();
        let xm = (&(&big_gamma.scale(2.0) - &(q * a)) - &(&at * q)).symmetric_part();
        let lx = positive_definite(&xm, "X")?;
        let ctc = &c.transpose() * c;
        let l2g2l2: f64 = a_i0.iter().zip(&g).map(|(ai, gi)| (ai * gi).powi(2)).sum();
        let gamma = 1.0 + 3.0 * max_symmetric_eigenvalue(&ctc)? * l2g2l2 / (lambda0 * lw);
        let qfc = &(q * f) * c;
        let qfc_norm_sq = max_symmetric_eigenvalue(&(&qfc.transpose() * &qfc))?;
        let gamma1 = 4.0 * qfc_norm_sq / (lx * lw);
        let lg = max_symmetric_eigenvalue(&big_gamma)?;
        let gamma2 = 4.0 * lg * lg / (lx * gmin * lw);
        k.gamma = Some(gamma);
        k.gamma1 = Some(gamma1);
        k.gamma2 = Some(gamma2);
        if kind.is_continuous() {
            let lmax_s = max_symmetric_eigenvalue(s)?;
            let lmax_q = max_symmetric_eigenvalue(q)?;
            let phimin = (0..agents).map(|i| per(&phi, i)).fold(f64::MAX, f64::min);
            k.delta_candidates = vec![
                lx / (2.0 * lmax_q),
                lw / (gamma1 * lmax_s),
                lw / (2.0 * gamma2 * lmax_s),
                phimin / 4.0,
            ];
            k.pi = (0..agents)
                .map(|i| {
                    let (ki, fi) = (per(&kappa, i), per(&phi, i));
                    g[i] * c_i[i] * ki + (1.0 / fi + lmax_s / (2.0 * lw)) * (c_i[i] * ki).powi(2) * g[i]
                })
                .collect();
        }
        k.w = Some(w);
        k.x = Some(xm);
        k.big_gamma = Some(big_gamma);
    }
    if !k.delta_candidates.is_empty() {
        k.delta = Some(k.delta_candidates.iter().cloned().fold(f64::MAX, f64::min));
    }
    k.g = g;
    Ok(k)
}

/// Squared radius of the residual set for `ξ̃` with its additive parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBound {
    pub bound_sq: f64,
    /// From the σ-modification, `∝ (α−1)² Σ φᵢgᵢ`.
    pub sigma_term: f64,
    /// The part of `Σ Πᵢ` linear in `κᵢ`.
    pub pi_linear_term: f64,
    /// The part of `Σ Πᵢ` quadratic in `κᵢ`.
    pub pi_quadratic_term: f64,
    /// The separate boundary-layer sum `Σ (ωaᵢ₀ + (2N−1)β)κᵢ`; zero for state feedback.
    pub kappa_term: f64,
}

impl ResidualBound {
    pub fn radius(&self) -> f64 {
        self.bound_sq.sqrt()
    }
}

/// The residual-set bound of a continuous leader-follower protocol,
/// evaluated term by term as stated.
pub fn residual_bound(network: &Network, constants: &AnalysisConstants) -> Result<ResidualBound> {
    let kind = network.kind();
    if !kind.is_continuous() {
        return Err(Error::NotApplicable(format!(
            "{kind} converges asymptotically; residual sets exist only for continuous protocols"
        )));
    }
    if constants.kind != kind {
        return Err(Error::Config(format!(
            "constants for {} used with {kind}",
            constants.kind
        )));
    }
    let gains = network.gains();
    let agents = network.agents();
    let nn = agents as f64;
    let beta = gains.beta.unwrap_or(0.0);
    let kappa = gains.kappa.clone().unwrap_or_default();
    let phi = gains.phi.clone().unwrap_or_default();
    let per = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
    let g = &constants.g;
    let alpha = constants.alpha;
    let delta = constants.delta.expect("continuous constants carry delta");
    let x = constants.x.as_ref().expect("leader-follower constants carry X");
    let lx = min_symmetric_eigenvalue(x)?;
    let ci = |i: usize| constants.omega * network.leader_weights()[i] + (2.0 * nn - 1.0) * beta;
    let sigma_sum: f64 = (0..agents).map(|i| per(&phi, i) * g[i]).sum();
    let lin_sum: f64 = (0..agents).map(|i| g[i] * ci(i) * per(&kappa, i)).sum();
    let quad_coeff = |i: usize, lmax: f64, lmin: f64| 1.0 / per(&phi, i) + lmax / (2.0 * lmin);
    let quad_sum = |lmax: f64, lmin: f64| -> f64 {
        (0..agents)
            .map(|i| quad_coeff(i, lmax, lmin) * (ci(i) * per(&kappa, i)).powi(2) * g[i])
            .sum()
    };
    let b = if kind.is_state_feedback() {
        let pinv = network.rho_weight();
        let scale = 1.0 / (min_symmetric_eigenvalue(pinv)? * delta);
        ResidualBound {
            bound_sq: 0.0,
            sigma_term: scale * 0.5 * (alpha - 1.0).powi(2) * sigma_sum,
            pi_linear_term: scale * lin_sum,
            pi_quadratic_term: scale * quad_sum(max_symmetric_eigenvalue(pinv)?, lx),
            kappa_term: 0.0,
        }
    } else {
        let q = gains.q.as_ref().expect("checked by Network::new");
        let s = network.rho_weight();
        let w = constants.w.as_ref().expect("output constants carry W");
        let gamma2 = constants.gamma2.expect("output constants carry gamma2");
        let scale = 1.0 / (min_symmetric_eigenvalue(q)? * delta);
        let kappa_sum: f64 = (0..agents).map(|i| ci(i) * per(&kappa, i)).sum();
        ResidualBound {
            bound_sq: 0.0,
            sigma_term: scale * gamma2 * 0.5 * (alpha - 1.0).powi(2) * sigma_sum,
            pi_linear_term: scale * gamma2 * lin_sum,
            pi_quadratic_term: scale
                * gamma2
                * quad_sum(max_symmetric_eigenvalue(s)?, min_symmetric_eigenvalue(w)?),
            kappa_term: scale * kappa_sum,
        }
    };
    Ok(ResidualBound {
        bound_sq: b.sigma_term + b.pi_linear_term + b.pi_quadratic_term + b.kappa_term,
        ..b
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMetrics {
    /// Start of the trailing window (last 10% of the horizon).
    pub window_start: f64,
    pub trailing_sup: f64,
    pub trailing_rms: f64,
    pub final_d: Vec<f64>,
    /// Total variation of each `dᵢ` over the trailing window.
    pub d_total_variation: Vec<f64>,
    /// Smallest `dᵢ` anywhere in the trace.
    pub d_min: f64,
    /// Largest `dᵢ` anywhere in the trace.
    pub d_max: f64,
    /// Largest absolute state entry anywhere in the trace.
    pub state_sup: f64,
    pub threshold: f64,
    /// Earliest time after which `‖ξ‖ < threshold` holds for the rest of the trace.
    pub time_to_threshold: Option<f64>,
}

impl ConsensusMetrics {
    pub fn summary(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("trailing_sup_xi".to_string(), self.trailing_sup),
            ("trailing_rms_xi".to_string(), self.trailing_rms),
            ("d_min".to_string(), self.d_min),
            ("d_max".to_string(), self.d_max),
            ("state_sup".to_string(), self.state_sup),
            (
                "time_to_threshold".to_string(),
                self.time_to_threshold.unwrap_or(f64::NAN),
            ),
        ];
        for (i, (d, tv)) in self.final_d.iter().zip(&self.d_total_variation).enumerate() {
            out.push((format!("d_final[{i}]"), *d));
            out.push((format!("d_tv[{i}]"), *tv));
        }
        out
    }
}

/// Convergence summary of a completed trace.
pub fn consensus_metrics(trace: &SimulationTrace, threshold: f64) -> Result<ConsensusMetrics> {
    if trace.is_empty() {
        return Err(Error::Input("trace is empty".into()));
    }
    let norms = trace.xi_norms();
    let t_last = *trace.times.last().unwrap();
    let window_start = 0.9 * t_last;
    let first = trace.times.iter().position(|&t| t >= window_start).unwrap();
    let tail = &norms[first..];
    let trailing_sup = tail.iter().cloned().fold(0.0, f64::max);
    let trailing_rms = (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
    let agents = trace.states[0].d().len();
    let mut tv = vec![0.0; agents];
    for w in trace.states[first..].windows(2) {
        for (i, t) in tv.iter_mut().enumerate() {
            *t += (w[1].d()[i] - w[0].d()[i]).abs();
        }
    }
    let (mut d_min, mut d_max, mut state_sup) = (f64::MAX, f64::MIN, 0.0f64);
    for s in &trace.states {
        for &d in s.d() {
            d_min = d_min.min(d);
            d_max = d_max.max(d);
        }
        state_sup = state_sup.max(s.as_slice().iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let time_to_threshold = match norms.iter().rposition(|&v| v >= threshold) {
        None => Some(trace.times[0]),
        Some(k) if k + 1 < norms.len() => Some(trace.times[k + 1]),
        Some(_) => None,
    };
    Ok(ConsensusMetrics {
        window_start,
        trailing_sup,
        trailing_rms,
        final_d: trace.states.last().unwrap().d().to_vec(),
        d_total_variation: tv,
        d_min,
        d_max,
        state_sup,
        threshold,
        time_to_threshold,
    })
}

/// Plain-text report of constants, bound and metrics.
pub fn report_text(
    name: &str,
    constants: Option<&AnalysisConstants>,
    bound: Option<&ResidualBound>,
    metrics: Option<&ConsensusMetrics>,
) -> String {
    let mut s = format!("scenario: {name}\n");
    for (k, v) in report_pairs(constants, bound, metrics) {
        let _ = writeln!(s, "{k}: {}", fmt17(v));
    }
    s
}

/// The rows of [`report_text`] as `(key, value)` pairs.
pub fn report_pairs(
    constants: Option<&AnalysisConstants>,
    bound: Option<&ResidualBound>,
    metrics: Option<&ConsensusMetrics>,
) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    if let Some(c) = constants {
        out.extend(c.summary());
    }
    if let Some(b) = bound {
        out.extend([
            ("bound_sq".to_string(), b.bound_sq),
            ("bound_sigma_term".to_string(), b.sigma_term),
            ("bound_pi_linear_term".to_string(), b.pi_linear_term),
            ("bound_pi_quadratic_term".to_string(), b.pi_quadratic_term),
            ("bound_kappa_term".to_string(), b.kappa_term),
        ]);
    }
    if let Some(m) = metrics {
        out.extend(m.summary());
    }
    out
}

/// `‖ξ‖²` over the trailing window, the quantity compared with a residual bound.
pub fn trailing_sup_sq(trace: &SimulationTrace) -> f64 {
    let t_last = trace.times.last().copied().unwrap_or(0.0);
    trace
        .times
        .iter()
        .zip(&trace.xi)
        .filter(|(t, _)| **t >= 0.9 * t_last)
        .map(|(_, xi)| norm2(xi).powi(2))
        .fold(0.0, f64::max)
}
