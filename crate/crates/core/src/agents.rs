//! Agent dynamics `ẋ = Ax + Bu`, `y = Cx` and the leader's input signal.

use std::path::Path;

use crate::error::{Error, Result};
use crate::keymat::KeyMatrixDoc;
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
}

impl AgentModel {
    pub fn new(a: DenseMatrix, b: DenseMatrix, c: DenseMatrix) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || b.rows() != n || c.cols() != n || b.cols() == 0 || c.rows() == 0 {
            return Err(Error::Dimension(format!(
                "model: A {}x{}, B {}x{}, C {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols(),
                c.rows(),
                c.cols()
            )));
        }
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::NonFinite("agent model"));
        }
        Ok(Self { a, b, c })
    }

    /// Double integrator with position output.
    pub fn double_integrator() -> Self {
        Self {
            a: DenseMatrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap(),
            b: DenseMatrix::column(&[0.0, 1.0]),
            c: DenseMatrix::row(&[1.0, 0.0]),
        }
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Input dimension.
    pub fn p(&self) -> usize {
        self.b.cols()
    }

    /// Output dimension.
    pub fn m(&self) -> usize {
        self.c.rows()
    }

    pub fn derivative(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() || u.len() != self.p() {
            return Err(Error::Dimension(format!(
                "agent derivative: x has {}, u has {} (expected {}, {})",
                x.len(),
                u.len(),
                self.n(),
                self.p()
            )));
        }
        let mut out = self.a.matvec(x);
        self.b.matvec_acc(1.0, u, &mut out);
        Ok(out)
    }
}

/// `Ax + Bu`.
pub fn agent_derivative(model: &AgentModel, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    model.derivative(x, u)
}

/// Chua's circuit parameters in the dimensionless form used for the leader.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChuaParams {
    pub a: f64,
    pub b: f64,
    pub m01: f64,
    pub m02: f64,
}

impl ChuaParams {
    /// `a = 9, b = 18, m₀¹ = −3/4, m₀² = −4/3`: the double-scroll regime.
    pub fn double_scroll() -> Self {
        Self {
            a: 9.0,
            b: 18.0,
            m01: -0.75,
            m02: -4.0 / 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a > 0.0 && self.b > 0.0 && self.m01 < 0.0 && self.m02 < 0.0 {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "Chua parameters need a > 0, b > 0, m01 < 0, m02 < 0 (got {self:?})"
            )))
        }
    }

    /// Linear part of the circuit. Followers share it.
    pub fn system_matrix(&self) -> DenseMatrix {
        let (a, b) = (self.a, self.b);
        DenseMatrix::from_rows(&[
            &[-a * (self.m01 + 1.0), a, 0.0],
            &[1.0, -1.0, 1.0],
            &[0.0, -b, 0.0],
        ])
        .unwrap()
    }

    /// `(A, e₁, I₃)`: the nonlinearity enters through the first state and
    /// the full state is measured.
    pub fn model(&self) -> AgentModel {
        AgentModel {
            a: self.system_matrix(),
            b: DenseMatrix::column(&[1.0, 0.0, 0.0]),
            c: DenseMatrix::identity(3),
        }
    }
}

/// `f₀(x₀) = (a/2)(m₀¹ − m₀²)(|x₀₁ + 1| − |x₀₁ − 1|)`.
pub fn chua_input(params: &ChuaParams, x0: &[f64]) -> f64 {
    let x = x0[0];
    0.5 * params.a * (params.m01 - params.m02) * ((x + 1.0).abs() - (x - 1.0).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeaderSpec {
    Zero,
    Chua(ChuaParams),
    /// `u₀,k(t) = amplitude_k · sin(frequency_k · t + phase_k)`, frequency in rad/s.
    Sinusoid {
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
        phase: Vec<f64>,
    },
}

impl LeaderSpec {
    pub fn validate(&self, model: &AgentModel) -> Result<()> {
        match self {
            LeaderSpec::Zero => Ok(()),
            LeaderSpec::Chua(p) => {
                p.validate()?;
                if model.p() != 1 || model.n() != 3 {
                    return Err(Error::Config(
                        "Chua leader needs a 3-state, single-input model".into(),
                    ));
                }
                Ok(())
            }
            LeaderSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                let p = model.p();
                if amplitude.len() != p || frequency.len() != p || phase.len() != p {
                    return Err(Error::Config(format!(
                        "sinusoid leader needs {p} amplitudes, frequencies and phases"
                    )));
                }
                if amplitude.iter().chain(frequency).chain(phase).any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("sinusoid leader"));
                }
                Ok(())
            }
        }
    }

    /// `u₀(t, x₀)`, written into `out` (length p).
    pub fn input_into(&self, t: f64, x0: &[f64], out: &mut [f64]) {
        match self {
            LeaderSpec::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            LeaderSpec::Chua(p) => out[0] = chua_input(p, x0),
            LeaderSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = amplitude[k] * (frequency[k] * t + phase[k]).sin();
                }
            }
        }
    }

    pub fn input(&self, t: f64, x0: &[f64], p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        self.input_into(t, x0, &mut out);
        out
    }

    pub fn name(&self) -> &'static str {
        match self {
            LeaderSpec::Zero => "zero",
            LeaderSpec::Chua(_) => "chua",
            LeaderSpec::Sinusoid { .. } => "sinusoid",
        }
    }
}

/// Certified bound `ω ≥ sup‖u₀‖`.
pub fn leader_omega(spec: &LeaderSpec) -> f64 {
    match spec {
        LeaderSpec::Zero => 0.0,
        // |f₀| saturates at (a/2)|m₀¹ − m₀²|·2
        LeaderSpec::Chua(p) => p.a * (p.m01 - p.m02).abs(),
        LeaderSpec::Sinusoid { amplitude, .. } => {
            amplitude.iter().map(|a| a * a).sum::<f64>().sqrt()
        }
    }
}

/// Agent model plus leader description, as stored in a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: AgentModel,
    pub leader: LeaderSpec,
}

impl ModelFile {
    pub fn from_doc(doc: &KeyMatrixDoc) -> Result<Self> {
        let get = |k: &str| {
            doc.matrix(k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("model file lacks matrix `{k}`")))
        };
        let model = AgentModel::new(get("A")?, get("B")?, get("C")?)?;
        let need = |k: &str| -> Result<f64> {
            doc.attr_f64(k)?
                .ok_or_else(|| Error::Config(format!("model file lacks `{k}`")))
        };
        let leader = match doc.attr("leader").unwrap_or("zero") {
            "zero" => LeaderSpec::Zero,
            "chua" => LeaderSpec::Chua(ChuaParams {
                a: need("chua.a")?,
                b: need("chua.b")?,
                m01: need("chua.m01")?,
                m02: need("chua.m02")?,
            }),
            "sinusoid" => {
                let row = |k: &str| -> Result<Vec<f64>> {
                    Ok(get(k)?.as_slice().to_vec())
                };
                LeaderSpec::Sinusoid {
                    amplitude: row("leader.amplitude")?,
                    frequency: row("leader.frequency")?,
                    phase: row("leader.phase")?,
                }
            }
            other => return Err(Error::Config(format!("unknown leader variant `{other}`"))),
        };
        leader.validate(&model)?;
        Ok(Self { model, leader })
    }

    pub fn to_doc(&self) -> KeyMatrixDoc {
        let mut doc = KeyMatrixDoc::new();
        doc.set_attr("leader", self.leader.name());
        match &self.leader {
            LeaderSpec::Zero => {}
            LeaderSpec::Chua(p) => {
                doc.set_attr("chua.a", p.a);
                doc.set_attr("chua.b", p.b);
                doc.set_attr("chua.m01", p.m01);
                doc.set_attr("chua.m02", p.m02);
            }
            LeaderSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                doc.insert("leader.amplitude", DenseMatrix::row(amplitude));
                doc.insert("leader.frequency", DenseMatrix::row(frequency));
                doc.insert("leader.phase", DenseMatrix::row(phase));
            }
        }
        doc.insert("A", self.model.a.clone());
        doc.insert("B", self.model.b.clone());
        doc.insert("C", self.model.c.clone());
        doc
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_doc(&KeyMatrixDoc::from_file(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn double_integrator_derivative() {
        let m = AgentModel::double_integrator();
        assert_eq!(m.derivative(&[0.0, 0.0], &[0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(m.derivative(&[1.0, 2.0], &[3.0]).unwrap(), vec![2.0, 3.0]);
        assert!(m.derivative(&[1.0], &[3.0]).is_err());
    }

    #[test]
    fn derivative_matches_naive_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (n, p) = (rng.gen_range(1..5), rng.gen_range(1..3));
            let a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..n * p).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let model = AgentModel::new(
                DenseMatrix::from_row_major(n, n, a.clone()).unwrap(),
                DenseMatrix::from_row_major(n, p, b.clone()).unwrap(),
                DenseMatrix::identity(n),
            )
            .unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = agent_derivative(&model, &x, &u).unwrap();
            for i in 0..n {
                let mut want = 0.0;
                for j in 0..n {
                    want += a[i * n + j] * x[j];
                }
                for j in 0..p {
                    want += b[i * p + j] * u[j];
                }
                assert!((got[i] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn chua_input_values() {
        let p = ChuaParams::double_scroll();
        assert_eq!(chua_input(&p, &[0.0, 5.0, 5.0]), 0.0);
        assert!((chua_input(&p, &[1.0, 0.0, 0.0]) - 5.25).abs() < 1e-12);
        assert!((chua_input(&p, &[7.0, 0.0, 0.0]) - 5.25).abs() < 1e-12);
        assert!((chua_input(&p, &[0.5, 0.0, 0.0]) - 2.625).abs() < 1e-12);
        assert!((leader_omega(&LeaderSpec::Chua(p)) - 5.25).abs() < 1e-12);
    }

    #[test]
    fn chua_is_odd_lipschitz_and_bounded() {
        let p = ChuaParams::double_scroll();
        let lip = p.a * (p.m01 - p.m02).abs();
        let omega = leader_omega(&LeaderSpec::Chua(p));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let x = rng.gen_range(-5.0..5.0);
            let y = rng.gen_range(-5.0..5.0);
            let fx = chua_input(&p, &[x]);
            assert!((fx + chua_input(&p, &[-x])).abs() < 1e-12);
            assert!((fx - chua_input(&p, &[y])).abs() <= lip * (x - y).abs() + 1e-12);
            assert!(fx.abs() <= omega + 1e-12);
        }
    }

    #[test]
    fn omega_of_simple_leaders() {
        assert_eq!(leader_omega(&LeaderSpec::Zero), 0.0);
        let s = LeaderSpec::Sinusoid {
            amplitude: vec![2.0],
            frequency: vec![1.0],
            phase: vec![0.0],
        };
        assert_eq!(leader_omega(&s), 2.0);
    }

    #[test]
    fn chua_matrix_entries() {
        let a = ChuaParams::double_scroll().system_matrix();
        assert_eq!(a.row_slice(0), &[-2.25, 9.0, 0.0]);
        assert_eq!(a.row_slice(2), &[0.0, -18.0, 0.0]);
    }

    #[test]
    fn model_file_round_trip() {
        let f = ModelFile {
            model: ChuaParams::double_scroll().model(),
            leader: LeaderSpec::Chua(ChuaParams::double_scroll()),
        };
        let back = ModelFile::from_doc(
            &KeyMatrixDoc::parse(&f.to_doc().to_text(), "mem").unwrap(),
        )
        .unwrap();
        assert_eq!(back, f);
    }
}
