//! Manufactured solutions, signed L^p errors and convergence rates.
//!
//! `example1` is the spline-cutoff singular solution on the unit square,
//! `u = 10 psi(r) * (-r^{3/2} sin(3 theta / 2))` with polar coordinates
//! centred at `(0.5, 0)`. `example2` is the re-entrant corner forcing on the
//! L-shape built from `w = sin(2 pi (r - b)^2) - 0.5`, `b = 0.91`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fespace::{lp_norm, FeFunction};
use crate::mesh::{Domain, Point};

pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Point) -> Vector2<f64> + Send + Sync>;

/// Support radius of the cutoff.
pub const PSI_SUPPORT: f64 = 0.45;

/// Degree-9 polynomial cutoff with `psi(0) = 1`, vanishing derivatives of
/// orders 1..=4 at 0 and of orders 0..=4 at the support radius.
///
/// Coefficients are stored in the normalized variable `s = r / PSI_SUPPORT`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplinePsi {
    pub coefficients: [f64; 10],
    pub support: f64,
}

fn falling(j: usize, k: usize) -> f64 {
    (0..k).map(|i| (j - i) as f64).product()
}

/// Solves the 10x10 endpoint system in the monomial basis.
pub fn build_psi() -> Result<SplinePsi> {
    let mut m = DMatrix::zeros(10, 10);
    let mut rhs = DVector::zeros(10);
    for k in 0..5 {
        // d^k/ds^k at s = 0 picks out k! c_k.
        m[(k, k)] = falling(k, k);
        // d^k/ds^k at s = 1.
        for j in k..10 {
            m[(5 + k, j)] = falling(j, k);
        }
    }
    rhs[0] = 1.0;
    let c = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem("cutoff polynomial"))?;
    Ok(SplinePsi {
        coefficients: std::array::from_fn(|k| c[k]),
        support: PSI_SUPPORT,
    })
}

impl SplinePsi {
    /// `k`-th derivative with respect to `r`.
    pub fn derivative(&self, r: f64, k: usize) -> f64 {
        if !(0.0..self.support).contains(&r) {
            return 0.0;
        }
        let s = r / self.support;
        let mut acc = 0.0;
        for j in (k..10).rev() {
            acc = acc * s + self.coefficients[j] * falling(j, k);
        }
        acc / self.support.powi(k as i32)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.derivative(r, 0)
    }
}

/// Exact contact information on the boundary walk.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactContact {
    /// Arc-length coordinates of the critical points.
    pub critical_points: Vec<f64>,
    /// Arc intervals where the solution is positive (no contact).
    pub non_contact: Vec<(f64, f64)>,
}

#[derive(Clone)]
pub struct ManufacturedSolution {
    pub name: &'static str,
    pub domain: Domain,
    pub u: Option<ScalarField>,
    pub grad_u: Option<VectorField>,
    pub f: ScalarField,
    pub exact_contact: Option<ExactContact>,
}

impl std::fmt::Debug for ManufacturedSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedSolution")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("has_exact", &self.u.is_some())
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleName {
    Example1,
    Example2,
    /// `f = 1` on the unit square, exact solution `u = 1`.
    Constant,
}

impl ExampleName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExampleName::Example1 => "example1",
            ExampleName::Example2 => "example2",
            ExampleName::Constant => "constant",
        }
    }
}

impl std::str::FromStr for ExampleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(ExampleName::Example1),
            "example2" => Ok(ExampleName::Example2),
            "constant" => Ok(ExampleName::Constant),
            other => Err(Error::config(
                "example",
                format!("unknown example `{other}`"),
            )),
        }
    }
}

/// Example registry.
pub fn example(name: ExampleName, literal_example2_sign: bool) -> Result<ManufacturedSolution> {
    match name {
        ExampleName::Example1 => example1(),
        ExampleName::Example2 => Ok(example2(literal_example2_sign)),
        ExampleName::Constant => Ok(constant()),
    }
}

/// Polar coordinates about `(0.5, 0)`, with the angle taken from `arccos`
/// so that it lies in `[0, pi]`.
fn polar_example1(x: &Point) -> (f64, f64) {
    let dx = x.x - 0.5;
    let r = (dx * dx + x.y * x.y).sqrt();
    if r == 0.0 {
        return (0.0, 0.0);
    }
    (r, (dx / r).clamp(-1.0, 1.0).acos())
}

pub fn example1() -> Result<ManufacturedSolution> {
    let psi = Arc::new(build_psi()?);

    let p = psi.clone();
    let u = move |x: &Point| {
        let (r, theta) = polar_example1(x);
        -10.0 * p.value(r) * r.powf(1.5) * (1.5 * theta).sin()
    };

    let p = psi.clone();
    let grad_u = move |x: &Point| {
        let (r, theta) = polar_example1(x);
        if r == 0.0 {
            return Vector2::zeros();
        }
        let (s, c) = (1.5 * theta).sin_cos();
        let du_dr = -10.0 * s * (p.derivative(r, 1) * r.powf(1.5) + 1.5 * p.value(r) * r.sqrt());
        let du_dtheta_over_r = -15.0 * p.value(r) * r.sqrt() * c;
        let (st, ct) = theta.sin_cos();
        Vector2::new(
            du_dr * ct - du_dtheta_over_r * st,
            du_dr * st + du_dtheta_over_r * ct,
        )
    };

    // r^{3/2} sin(3 theta / 2) is harmonic, so
    // -Laplace(u) + u = 10 sin(3 theta / 2) (r^{3/2} (psi'' - psi) + 4 r^{1/2} psi').
    let p = psi;
    let f = move |x: &Point| {
        let (r, theta) = polar_example1(x);
        let radial =
            r.powf(1.5) * (p.derivative(r, 2) - p.value(r)) + 4.0 * r.sqrt() * p.derivative(r, 1);
        10.0 * (1.5 * theta).sin() * radial
    };

    Ok(ManufacturedSolution {
        name: "example1",
        domain: Domain::UnitSquare,
        u: Some(Arc::new(u)),
        grad_u: Some(Arc::new(grad_u)),
        f: Arc::new(f),
        exact_contact: Some(ExactContact {
            critical_points: vec![0.5 - PSI_SUPPORT, 0.5],
            non_contact: vec![(0.5 - PSI_SUPPORT, 0.5)],
        }),
    })
}

pub const EXAMPLE2_B: f64 = 0.91;
/// Radius below which `example2` forcing is evaluated at this radius instead.
pub const EXAMPLE2_R_FLOOR: f64 = 1e-8;

/// Profile `w(r)` and its first two radial derivatives.
pub fn example2_profile(r: f64) -> (f64, f64, f64) {
    let d = r - EXAMPLE2_B;
    let g = 2.0 * PI * d * d;
    let g1 = 4.0 * PI * d;
    let g2 = 4.0 * PI;
    let (s, c) = g.sin_cos();
    (s - 0.5, c * g1, -s * g1 * g1 + c * g2)
}

/// Re-entrant corner forcing `f = Laplace(w) + w` (or `-Laplace(w) + w` when
/// `literal_sign` is false), `r` measured from the re-entrant corner.
///
/// `w'(0) != 0`, so the `w'/r` term makes `f` grow like `1/r` at the corner;
/// evaluation clamps `r` to [`EXAMPLE2_R_FLOOR`].
pub fn example2(literal_sign: bool) -> ManufacturedSolution {
    let sign = if literal_sign { 1.0 } else { -1.0 };
    let f = move |x: &Point| {
        let r = x.coords.norm().max(EXAMPLE2_R_FLOOR);
        let (w, w1, w2) = example2_profile(r);
        sign * (w2 + w1 / r) + w
    };
    ManufacturedSolution {
        name: "example2",
        domain: Domain::LShape,
        u: None,
        grad_u: None,
        f: Arc::new(f),
        exact_contact: None,
    }
}

pub fn constant() -> ManufacturedSolution {
    ManufacturedSolution {
        name: "constant",
        domain: Domain::UnitSquare,
        u: Some(Arc::new(|_: &Point| 1.0)),
        grad_u: Some(Arc::new(|_: &Point| Vector2::zeros())),
        f: Arc::new(|_: &Point| 1.0),
        exact_contact: Some(ExactContact {
            critical_points: Vec::new(),
            non_contact: Vec::new(),
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedErrors {
    /// `||(u - U)_+||_{L^p}`
    pub pos: f64,
    /// `||(u - U)_-||_{L^p}`
    pub neg: f64,
    pub total: f64,
}

/// Positive part, negative part and full `L^p` norm of `u - U`.
pub fn signed_lp_errors(
    uh: &FeFunction,
    ms: &ManufacturedSolution,
    p: f64,
) -> Result<SignedErrors> {
    let u = ms.u.as_ref().ok_or(Error::NoExactSolution)?;
    let mesh = uh.mesh();
    let err = |t: usize, bary: [f64; 3], x: &Point| u(x) - uh.eval_local(t, bary);
    Ok(SignedErrors {
        pos: lp_norm(mesh, |t, b, x| err(t, b, x).max(0.0), p)?,
        neg: lp_norm(mesh, |t, b, x| err(t, b, x).min(0.0), p)?,
        total: lp_norm(mesh, err, p)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EocTable {
    /// Rate between each consecutive pair of points.
    pub pairwise: Vec<f64>,
    /// Least-squares slope of `log e` against `log x` over the last four points.
    pub tail_slope: f64,
}

pub const EOC_TAIL: usize = 4;

/// Experimental orders of convergence from `(x, error)` pairs, where `x` is
/// either a mesh size or a degree-of-freedom count.
pub fn eoc(values: &[(f64, f64)]) -> Result<EocTable> {
    if values.len() < 2 {
        return Err(Error::DegenerateInput("need at least two points".into()));
    }
    if values
        .iter()
        .any(|&(x, e)| !(x > 0.0 && e > 0.0 && x.is_finite() && e.is_finite()))
    {
        return Err(Error::DegenerateInput(
            "sizes and errors must be positive and finite".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = values.iter().map(|&(x, e)| (x.ln(), e.ln())).collect();
    let mut pairwise = Vec::with_capacity(values.len() - 1);
    for w in logs.windows(2) {
        let dx = w[1].0 - w[0].0;
        if dx == 0.0 {
            return Err(Error::DegenerateInput("repeated abscissa".into()));
        }
        pairwise.push((w[1].1 - w[0].1) / dx);
    }
    let tail = &logs[logs.len().saturating_sub(EOC_TAIL)..];
    Ok(EocTable {
        pairwise,
        tail_slope: least_squares_slope(tail),
    })
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
