//! Gain synthesis through the Riccati route and certification of the
//! matrix inequalities the protocols rely on.

use std::fmt;
use std::path::Path;

use crate::agents::AgentModel;
use crate::error::{Error, Result};
use crate::keymat::KeyMatrixDoc;
use crate::linalg::{
    eigenvalues, max_symmetric_eigenvalue, min_symmetric_eigenvalue, solve_care_detailed,
    uncontrollable_unstable_mode, DenseMatrix, NumericPolicy,
};

pub const DEFAULT_KAPPA: f64 = 0.05;
pub const DEFAULT_PHI: f64 = 0.02;

/// Every controller parameter a protocol may need. Components a protocol
/// does not use may be absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GainSet {
    pub k: Option<DenseMatrix>,
    pub f: Option<DenseMatrix>,
    pub s: Option<DenseMatrix>,
    pub p: Option<DenseMatrix>,
    pub pbar: Option<DenseMatrix>,
    pub omega: Option<DenseMatrix>,
    pub q: Option<DenseMatrix>,
    pub beta: Option<f64>,
    pub kappa: Option<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct OutputGains {
    pub k: DenseMatrix,
    pub f: DenseMatrix,
    pub s: DenseMatrix,
    pub pbar: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct StateGains {
    pub k: DenseMatrix,
    pub p: DenseMatrix,
    pub omega: DenseMatrix,
}

fn check_pairs(model: &AgentModel) -> Result<()> {
    if let Some(z) = uncontrollable_unstable_mode(&model.a, &model.b)? {
        return Err(Error::NotStabilizable { re: z.re, im: z.im });
    }
    if let Some(z) = uncontrollable_unstable_mode(&model.a.transpose(), &model.c.transpose())? {
        return Err(Error::NotDetectable { re: z.re, im: z.im });
    }
    Ok(())
}

fn controller_riccati(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(solve_care_detailed(a, b, &NumericPolicy::default())?.s)
}

/// `P̄` from the observer Riccati equation, `S = P̄⁻¹`, `F = −P̄Cᵀ`, and
/// `K = −BᵀS_c` from the controller Riccati equation.
pub fn design_output_gains(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<OutputGains> {
    let model = AgentModel::new(a.clone(), b.clone(), c.clone())?;
    check_pairs(&model)?;
    let pbar = controller_riccati(&a.transpose(), &c.transpose())?;
    let s = pbar.inverse()?.symmetric_part();
    let f = -&(&pbar * &c.transpose());
    let sc = controller_riccati(a, b)?;
    let k = -&(&b.transpose() * &sc);
    Ok(OutputGains { k, f, s, pbar })
}

/// `P = S_c⁻¹`, `K = −BᵀP⁻¹`, `Ω = KᵀK`.
pub fn design_state_gains(a: &DenseMatrix, b: &DenseMatrix) -> Result<StateGains> {
    if let Some(z) = uncontrollable_unstable_mode(a, b)? {
        return Err(Error::NotStabilizable { re: z.re, im: z.im });
    }
    let sc = controller_riccati(a, b)?;
    let p = sc.inverse()?.symmetric_part();
    let k = -&(&b.transpose() * &sc);
    let omega = &k.transpose() * &k;
    Ok(StateGains { k, p, omega })
}

/// `Q` with `X = −(QA + AᵀQ − 2QBBᵀQ) ≻ 0`; the controller Riccati solution
/// gives `X = I + QBBᵀQ`.
pub fn design_q(a: &DenseMatrix, b: &DenseMatrix, k: &DenseMatrix) -> Result<DenseMatrix> {
    let closed = a + &(b * k);
    if eigenvalues(&closed)?.abscissa() >= 0.0 {
        return Err(Error::Synthesis("A + BK is not Hurwitz".into()));
    }
    controller_riccati(a, b)
}

/// `β = max(ω, override)`.
pub fn choose_beta(omega_bound: f64, override_beta: Option<f64>) -> Result<f64> {
    if !omega_bound.is_finite() || omega_bound < 0.0 {
        return Err(Error::Input(format!("leader input bound {omega_bound} must be ≥ 0")));
    }
    match override_beta {
        Some(b) if !b.is_finite() => Err(Error::Input("β override is not finite".into())),
        Some(b) => Ok(b.max(omega_bound)),
        None => Ok(omega_bound),
    }
}

impl GainSet {
    /// Fill in every absent matrix from `model`, keeping supplied ones.
    ///
    /// A supplied `S` (or `P̄`) determines `F = −S⁻¹Cᵀ`; a supplied `P`
    /// determines `K = −BᵀP⁻¹` and `Ω = P⁻¹BBᵀP⁻¹` unless those are given too.
    pub fn complete(mut self, model: &AgentModel) -> Result<Self> {
        let (a, b, c) = (&model.a, &model.b, &model.c);
        let ct = c.transpose();
        match (&self.s, &self.pbar) {
            (Some(s), None) => self.pbar = Some(s.inverse()?.symmetric_part()),
            (None, Some(pb)) => self.s = Some(pb.inverse()?.symmetric_part()),
            _ => {}
        }
        if self.s.is_none() || (self.f.is_none() && self.pbar.is_none()) {
            check_pairs(model)?;
            let pbar = controller_riccati(&a.transpose(), &ct)?;
            self.s = Some(pbar.inverse()?.symmetric_part());
            self.pbar = Some(pbar);
        }
        if self.f.is_none() {
            let pbar = self.pbar.as_ref().expect("P̄ set above");
            self.f = Some(-&(pbar * &ct));
        }
        let mut sc: Option<DenseMatrix> = None;
        let riccati = |sc: &mut Option<DenseMatrix>| -> Result<DenseMatrix> {
            if sc.is_none() {
                *sc = Some(controller_riccati(a, b)?);
            }
            Ok(sc.clone().unwrap())
        };
        if self.p.is_none() {
            self.p = Some(riccati(&mut sc)?.inverse()?.symmetric_part());
        }
        let pinv = self.p.as_ref().unwrap().inverse()?.symmetric_part();
        if self.k.is_none() {
            self.k = Some(-&(&b.transpose() * &pinv));
        }
        if self.omega.is_none() {
            let bt_pinv = &b.transpose() * &pinv;
            self.omega = Some(&bt_pinv.transpose() * &bt_pinv);
        }
        if self.q.is_none() {
            self.q = Some(riccati(&mut sc)?);
        }
        Ok(self)
    }

    /// Full design for a network of `followers` agents whose leader input
    /// is bounded by `omega`.
    pub fn design(model: &AgentModel, omega: f64, followers: usize) -> Result<Self> {
        let out = design_output_gains(&model.a, &model.b, &model.c)?;
        let st = design_state_gains(&model.a, &model.b)?;
        let q = design_q(&model.a, &model.b, &out.k)?;
        Ok(Self {
            k: Some(out.k),
            f: Some(out.f),
            s: Some(out.s),
            p: Some(st.p),
            pbar: Some(out.pbar),
            omega: Some(st.omega),
            q: Some(q),
            beta: Some(choose_beta(omega, None)?),
            kappa: Some(vec![DEFAULT_KAPPA; followers]),
            phi: Some(vec![DEFAULT_PHI; followers]),
        })
    }

    /// Broadcast scalar `κ`/`φ` to `followers` entries and default absent ones.
    pub fn with_follower_params(mut self, followers: usize) -> Result<Self> {
        for (name, slot, default) in [
            ("kappa", &mut self.kappa, DEFAULT_KAPPA),
            ("phi", &mut self.phi, DEFAULT_PHI),
        ] {
            let v = match slot.take() {
                None => vec![default; followers],
                Some(v) if v.len() == 1 => vec![v[0]; followers],
                Some(v) if v.len() == followers => v,
                Some(v) => {
                    return Err(Error::Config(format!(
                        "{name} has {} entries for {followers} followers",
                        v.len()
                    )))
                }
            };
            *slot = Some(v);
        }
        Ok(self)
    }

    pub fn to_doc(&self) -> KeyMatrixDoc {
        let mut doc = KeyMatrixDoc::new();
        for (name, m) in [
            ("K", &self.k),
            ("F", &self.f),
            ("S", &self.s),
            ("P", &self.p),
            ("Pbar", &self.pbar),
            ("Omega", &self.omega),
            ("Q", &self.q),
        ] {
            if let Some(m) = m {
                doc.insert(name, m.clone());
            }
        }
        if let Some(b) = self.beta {
            doc.insert("beta", DenseMatrix::row(&[b]));
        }
        if let Some(k) = &self.kappa {
            doc.insert("kappa", DenseMatrix::row(k));
        }
        if let Some(p) = &self.phi {
            doc.insert("phi", DenseMatrix::row(p));
        }
        doc
    }

    pub fn from_doc(doc: &KeyMatrixDoc) -> Result<Self> {
        let m = |k: &str| doc.matrix(k).cloned();
        let row = |k: &str| doc.matrix(k).map(|m| m.as_slice().to_vec());
        let beta = match row("beta") {
            Some(v) if v.len() == 1 => Some(v[0]),
            Some(_) => return Err(Error::Config("beta must be 1x1".into())),
            None => None,
        };
        Ok(Self {
            k: m("K"),
            f: m("F"),
            s: m("S"),
            p: m("P"),
            pbar: m("Pbar"),
            omega: m("Omega"),
            q: m("Q"),
            beta,
            kappa: row("kappa"),
            phi: row("phi"),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_doc().write(path)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_doc(&KeyMatrixDoc::from_file(path)?)
    }
}

/// One certified inequality: passes when `margin > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub margin: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.margin > 0.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct Certificate {
    pub checks: Vec<Check>,
}

impl Certificate {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<4} {:<34} margin {:+.6e}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.margin
            )?;
        }
        Ok(())
    }
}

/// Check every invariant that the present gain components make checkable.
/// Margins are positive when the inequality holds.
pub fn certify(model: &AgentModel, gains: &GainSet, omega_bound: f64) -> Result<Certificate> {
    let (a, b, c) = (&model.a, &model.b, &model.c);
    let mut checks = Vec::new();
    let abscissa = |m: &DenseMatrix| -> Result<f64> { Ok(eigenvalues(m)?.abscissa()) };
    let rel = |res: f64, scale: f64| 1e-8 * (1.0 + scale) - res;

    if let Some(k) = &gains.k {
        checks.push(Check {
            name: "A+BK Hurwitz",
            margin: -abscissa(&(a + &(b * k)))?,
        });
    }
    if let Some(f) = &gains.f {
        checks.push(Check {
            name: "A+FC Hurwitz",
            margin: -abscissa(&(a + &(f * c)))?,
        });
    }
    let ctc = &c.transpose() * c;
    let bbt = b * &b.transpose();
    if let Some(s) = &gains.s {
        checks.push(Check {
            name: "S positive definite",
            margin: min_symmetric_eigenvalue(&s.symmetric_part())?,
        });
        let lmi = &(&(&a.transpose() * s) + &(s * a)) - &ctc.scale(2.0);
        checks.push(Check {
            name: "A'S+SA-2C'C negative definite",
            margin: -max_symmetric_eigenvalue(&lmi.symmetric_part())?,
        });
        if let Some(f) = &gains.f {
            let expect = -&(&s.inverse()? * &c.transpose());
            checks.push(Check {
                name: "F = -S^-1 C'",
                margin: rel(f.max_abs_diff(&expect), expect.max_abs()),
            });
        }
    }
    if let Some(p) = &gains.p {
        checks.push(Check {
            name: "P positive definite",
            margin: min_symmetric_eigenvalue(&p.symmetric_part())?,
        });
        let lmi = &(&(p * &a.transpose()) + &(a * p)) - &bbt.scale(2.0);
        checks.push(Check {
            name: "PA'+AP-2BB' negative definite",
            margin: -max_symmetric_eigenvalue(&lmi.symmetric_part())?,
        });
        let pinv = p.inverse()?;
        let bt_pinv = &b.transpose() * &pinv;
        if let Some(om) = &gains.omega {
            let expect = &bt_pinv.transpose() * &bt_pinv;
            checks.push(Check {
                name: "Omega = P^-1 BB' P^-1",
                margin: rel(om.max_abs_diff(&expect), expect.max_abs()),
            });
        }
    }
    if let Some(om) = &gains.omega {
        checks.push(Check {
            name: "Omega positive semidefinite",
            margin: min_symmetric_eigenvalue(&om.symmetric_part())? + 1e-10 * (1.0 + om.max_abs()),
        });
    }
    if let Some(q) = &gains.q {
        checks.push(Check {
            name: "Q positive definite",
            margin: min_symmetric_eigenvalue(&q.symmetric_part())?,
        });
        let qb = q * b;
        let gamma = &qb * &qb.transpose();
        let x = -&(&(&(q * a) + &(&a.transpose() * q)) - &gamma.scale(2.0));
        checks.push(Check {
            name: "X = -(QA+A'Q-2QBB'Q) positive definite",
            margin: min_symmetric_eigenvalue(&x.symmetric_part())?,
        });
    }
    if let Some(beta) = gains.beta {
        checks.push(Check {
            name: "beta >= omega",
            // equality is admissible
            margin: beta - omega_bound + f64::MIN_POSITIVE,
        });
    }
    if let Some(k) = &gains.kappa {
        checks.push(Check {
            name: "kappa_i > 0",
            margin: k.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    if let Some(p) = &gains.phi {
        checks.push(Check {
            name: "phi_i > 0",
            margin: p.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    Ok(Certificate { checks })
}
