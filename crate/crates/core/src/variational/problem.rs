use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::energy::{EnergyProblem, SolverConfig};
use super::integrand::{BoundedIntegrand, ConcaveQuadratic, DetPlusVp, Integrand, NonAutonomousVp, VpIntegrand};
use crate::error::{Error, Result};
use crate::field::{Domain, GridField};
use crate::operators::{builtin, DifferentialOperator, OperatorDef};

/// A builtin name (`"symmetric_gradient:2"`) or an inline definition.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorRef {
    Builtin(String),
    Inline(OperatorDef),
}

impl OperatorRef {
    pub fn build(&self) -> Result<DifferentialOperator<f64>> {
        match self {
            OperatorRef::Builtin(name) => builtin(name),
            OperatorRef::Inline(def) => DifferentialOperator::try_from(def),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrandDef {
    /// `vp`, `nonautonomous`, `concave_quadratic`, `det_plus_vp`, `bounded`,
    /// or `custom` together with `name` set to one of these.
    pub kind: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
}

impl IntegrandDef {
    pub fn build(&self) -> Result<Arc<dyn Integrand>> {
        let kind = if self.kind == "custom" {
            self.name
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("custom integrand needs a `name`".into()))?
        } else {
            self.kind.as_str()
        };
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| Error::InvalidArgument(format!("integrand `{kind}` needs `{what}`")))
        };
        Ok(match kind {
            "vp" => Arc::new(VpIntegrand::new(need(self.p, "p")?)?),
            "nonautonomous" => Arc::new(NonAutonomousVp::new(need(self.p, "p")?, need(self.sigma, "sigma")?)?),
            "concave_quadratic" => Arc::new(ConcaveQuadratic),
            "det_plus_vp" => Arc::new(DetPlusVp::new(need(self.mu, "mu")?, self.p.unwrap_or(2.0))?),
            "bounded" => Arc::new(BoundedIntegrand),
            other => return Err(Error::InvalidArgument(format!("unknown integrand kind `{other}`"))),
        })
    }
}

/// Boundary datum: a path to an AQCF field file or a generated profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatumDef {
    File(String),
    Generated(GeneratedDatum),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratedDatum {
    /// `u(x) = M x + b` with `M` given row by row (`N x n`).
    Affine {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    /// `u_c(x) = amplitude sin(2 pi f x_c' + c) cos(pi f x_c'')`, see
    /// [`sinusoidal_datum`].
    Sinusoidal { amplitude: f64, frequency: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainDef {
    Torus {
        shape: Vec<usize>,
        #[serde(default)]
        mean_strain: Option<Vec<f64>>,
    },
    Dirichlet {
        shape: Vec<usize>,
        datum: DatumDef,
    },
}

/// Problem description as read from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemDef {
    pub operator: OperatorRef,
    pub integrand: IntegrandDef,
    pub domain: DomainDef,
    #[serde(default)]
    pub solver: SolverConfig,
}

pub type SolverDef = SolverConfig;

impl ProblemDef {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds the problem; relative datum paths are resolved against `base`.
    pub fn build(&self, base: &Path) -> Result<(EnergyProblem, SolverConfig)> {
        let op = self.operator.build()?;
        let f = self.integrand.build()?;
        let problem = match &self.domain {
            DomainDef::Torus { shape, mean_strain } => EnergyProblem::periodic(&op, f, shape, mean_strain.clone())?,
            DomainDef::Dirichlet { shape, datum } => {
                let field = match datum {
                    DatumDef::File(path) => {
                        let field = GridField::<f64>::load(base.join(path))?;
                        if field.shape() != shape.as_slice() {
                            return Err(Error::InvalidArgument(format!(
                                "datum shape {:?} differs from domain shape {shape:?}",
                                field.shape()
                            )));
                        }
                        field
                    }
                    DatumDef::Generated(GeneratedDatum::Affine { matrix, offset }) => {
                        affine_datum(shape, matrix, offset.as_deref())?
                    }
                    DatumDef::Generated(GeneratedDatum::Sinusoidal { amplitude, frequency }) => {
                        sinusoidal_datum(shape, op.dim_v(), *amplitude, *frequency)?
                    }
                };
                EnergyProblem::dirichlet(&op, f, &field)?
            }
        };
        Ok((problem, self.solver.clone()))
    }
}

/// Reads and builds a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<(EnergyProblem, SolverConfig)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let def = ProblemDef::from_json(&text)?;
    def.build(path.parent().unwrap_or(Path::new(".")))
}

fn vertex_field(shape: &[usize], components: usize, f: impl Fn(&[f64], &mut [f64])) -> Result<GridField<f64>> {
    let mut field = GridField::<f64>::zeros(shape.to_vec(), components)?;
    let pts = field.points();
    let n = shape.len();
    let mut x = vec![0.0; n];
    let mut out = vec![0.0; components];
    for p in 0..pts {
        let mut q = p;
        for a in (0..n).rev() {
            x[a] = (q % shape[a]) as f64 / (shape[a] - 1) as f64;
            q /= shape[a];
        }
        f(&x, &mut out);
        for (c, v) in out.iter().enumerate() {
            field.values_mut()[c * pts + p] = *v;
        }
    }
    field.domain = Domain::ClosedBox;
    Ok(field)
}

/// `u(x) = M x + b` sampled at the vertices of `[0,1]^n`.
pub fn affine_datum(shape: &[usize], matrix: &[Vec<f64>], offset: Option<&[f64]>) -> Result<GridField<f64>> {
    let n = shape.len();
    let big_n = matrix.len();
    if big_n == 0 || matrix.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(format!("affine datum needs an N x {n} matrix")));
    }
    if offset.is_some_and(|b| b.len() != big_n) {
        return Err(Error::DimensionMismatch { context: "affine offset", expected: big_n, found: offset.unwrap().len() });
    }
    vertex_field(shape, big_n, |x, out| {
        for (c, row) in matrix.iter().enumerate() {
            out[c] = row.iter().zip(x).map(|(m, xa)| m * xa).sum::<f64>() + offset.map_or(0.0, |b| b[c]);
        }
    })
}

/// Smooth oscillating datum on the vertices of `[0,1]^n`:
/// `u_c(x) = amplitude sin(2 pi f x_{c mod n} + c) cos(pi f x_{(c+1) mod n})`.
pub fn sinusoidal_datum(shape: &[usize], components: usize, amplitude: f64, frequency: f64) -> Result<GridField<f64>> {
    let n = shape.len();
    let tau = std::f64::consts::TAU;
    vertex_field(shape, components, |x, out| {
        for (c, o) in out.iter_mut().enumerate() {
            let a = x[c % n];
            let b = x[(c + 1) % n];
            *o = amplitude * (tau * frequency * a + c as f64).sin() * (0.5 * tau * frequency * b).cos();
        }
    })
}
