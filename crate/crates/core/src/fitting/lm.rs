//! Damped Gauss-Newton (Levenberg-Marquardt) least squares with a
//! central-difference Jacobian.
//!
//! Parameters live in an internal coordinate: log-transformed parameters are
//! optimized as `ln(value)` so they stay positive, linear ones are clamped to
//! their bounds after every step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: f64,
    pub transform: Transform,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Param {
    pub fn linear(name: &str, value: f64) -> Self {
        Param {
            name: name.into(),
            value,
            transform: Transform::Linear,
            lower: None,
            upper: None,
        }
    }

    pub fn positive(name: &str, value: f64) -> Self {
        Param {
            name: name.into(),
            value,
            transform: Transform::Log,
            lower: None,
            upper: None,
        }
    }

    pub fn bounded(mut self, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    fn to_internal(&self, v: f64) -> f64 {
        match self.transform {
            Transform::Linear => v,
            Transform::Log => v.ln(),
        }
    }

    fn to_external(&self, u: f64) -> f64 {
        let v = match self.transform {
            Transform::Linear => u,
            Transform::Log => u.exp(),
        };
        self.clamp(v)
    }

    fn clamp(&self, mut v: f64) -> f64 {
        if let Some(lo) = self.lower {
            v = v.max(lo);
        }
        if let Some(hi) = self.upper {
            v = v.min(hi);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    /// Stop when an accepted step lowers `R` by less than this fraction.
    pub ftol: f64,
    /// Stop when the largest cosine between the residual and a Jacobian
    /// column drops below this.
    pub gtol: f64,
    pub max_iterations: usize,
    /// Relative finite-difference step.
    pub diff_step: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            ftol: 1e-12,
            gtol: 1e-10,
            max_iterations: 500,
            diff_step: 1e-6,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Relative improvement of `R` fell below `ftol`.
    Residual,
    /// Residual orthogonal to the Jacobian within `gtol`.
    Gradient,
    /// Residuals vanish.
    ExactFit,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<NamedValue>,
    /// Sum of squared residuals.
    pub residual_sum: f64,
    pub n_points: usize,
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    pub termination: Termination,
    /// Largest residual/Jacobian-column cosine at the returned point.
    pub gradient_norm: f64,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.parameters
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.value)
    }

    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }

    /// Mean squared residual.
    pub fn residual_per_point(&self) -> f64 {
        self.residual_sum / self.n_points as f64
    }
}

/// Points to fit. `weights`, when present, multiply the residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let d = Dataset {
            x,
            y,
            weights: None,
        };
        d.check_shape()?;
        Ok(d)
    }

    fn check_shape(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::invalid("x and y lengths differ"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.x.len() {
                return Err(Error::invalid("weights length differs from data"));
            }
        }
        if self.x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("x must be strictly increasing"));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("data contains non-finite values"));
        }
        Ok(())
    }

    pub fn validate(&self, n_params: usize) -> Result<()> {
        self.check_shape()?;
        if self.x.len() < n_params + 1 {
            return Err(Error::invalid(format!(
                "{} points cannot constrain {} parameters",
                self.x.len(),
                n_params
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

struct Problem<'a, F> {
    model: F,
    data: &'a Dataset,
    params: &'a [Param],
}

impl<F: Fn(f64, &[f64]) -> f64> Problem<'_, F> {
    fn external(&self, u: &DVector<f64>) -> Vec<f64> {
        self.params
            .iter()
            .zip(u.iter())
            .map(|(p, &ui)| p.to_external(ui))
            .collect()
    }

    fn residuals(&self, u: &DVector<f64>) -> DVector<f64> {
        let theta = self.external(u);
        let d = self.data;
        DVector::from_iterator(
            d.len(),
            (0..d.len()).map(|k| {
                let r = (self.model)(d.x[k], &theta) - d.y[k];
                match &d.weights {
                    Some(w) => w[k] * r,
                    None => r,
                }
            }),
        )
    }

    fn jacobian(&self, u: &DVector<f64>, step: f64) -> DMatrix<f64> {
        let n = self.data.len();
        let mut jac = DMatrix::zeros(n, u.len());
        let mut probe = u.clone();
        for j in 0..u.len() {
            let h = step * u[j].abs().max(1.0);
            probe[j] = u[j] + h;
            let up = self.residuals(&probe);
            probe[j] = u[j] - h;
            let down = self.residuals(&probe);
            probe[j] = u[j];
            jac.set_column(j, &((up - down) / (2.0 * h)));
        }
        jac
    }

    /// Internal coordinates clamped to the bounds.
    fn project(&self, u: &mut DVector<f64>) {
        for (p, ui) in self.params.iter().zip(u.iter_mut()) {
            let v = p.clamp(p.to_external(*ui));
            *ui = p.to_internal(v);
        }
    }
}

fn gradient_cosine(jac: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    (0..jac.ncols())
        .map(|j| {
            let col = jac.column(j);
            let cn = col.norm();
            if cn == 0.0 {
                0.0
            } else {
                (col.dot(r) / (cn * rn)).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Minimize `sum_k (model(x_k, theta) - y_k)^2` over `theta`, starting at
/// the values in `init`.
///
/// Exhausting `max_iterations` is not an error: the best point found is
/// returned with `converged = false`.
pub fn nlls_minimize<F>(
    model: F,
    data: &Dataset,
    init: &[Param],
    options: &LmOptions,
) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    data.validate(init.len())?;
    for p in init {
        if !p.value.is_finite() {
            return Err(Error::invalid(format!(
                "initial `{}` is not finite",
                p.name
            )));
        }
        if p.transform == Transform::Log && !(p.value > 0.0) {
            return Err(Error::invalid(format!(
                "initial `{}` must be positive",
                p.name
            )));
        }
    }
    let problem = Problem {
        model,
        data,
        params: init,
    };
    let n_params = init.len();

    let mut u = DVector::from_iterator(
        n_params,
        init.iter().map(|p| p.to_internal(p.clamp(p.value))),
    );
    let mut r = problem.residuals(&u);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::invalid(
            "model is not finite at the initial parameters",
        ));
    }
    let mut jac = problem.jacobian(&u, options.diff_step);
    let col_max = (0..n_params)
        .map(|j| jac.column(j).norm())
        .fold(0.0, f64::max);
    for j in 0..n_params {
        if jac.column(j).norm() <= 1e-14 * col_max || col_max == 0.0 {
            return Err(Error::SingularJacobian(init[j].name.clone()));
        }
    }

    let mut damping = options.initial_damping;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    while iterations < options.max_iterations {
        if cost == 0.0 {
            termination = Termination::ExactFit;
            break;
        }
        if gradient_cosine(&jac, &r) <= options.gtol {
            termination = Termination::Gradient;
            break;
        }
        iterations += 1;

        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let diag: Vec<f64> = (0..n_params).map(|j| jtj[(j, j)].max(1e-300)).collect();

        let mut accepted = false;
        let mut stalled = false;
        while !accepted {
            let mut a = jtj.clone();
            for j in 0..n_params {
                a[(j, j)] += damping * diag[j];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    damping *= 10.0;
                    if damping > 1e20 {
                        stalled = true;
                        break;
                    }
                    continue;
                }
            };
            let mut trial = &u + step;
            problem.project(&mut trial);
            let r_trial = problem.residuals(&trial);
            let trial_cost = r_trial.norm_squared();
            if trial_cost.is_finite() && trial_cost < cost {
                let improvement = (cost - trial_cost) / cost;
                u = trial;
                r = r_trial;
                cost = trial_cost;
                damping = (damping / 3.0).max(1e-15);
                accepted = true;
                if improvement < options.ftol {
                    stalled = true;
                }
            } else {
                damping *= 4.0;
                if damping > 1e20 {
                    stalled = true;
                    break;
                }
            }
        }
        if stalled {
            termination = Termination::Residual;
            break;
        }
        jac = problem.jacobian(&u, options.diff_step);
    }

    let gradient_norm = gradient_cosine(&problem.jacobian(&u, options.diff_step), &r);
    let theta = problem.external(&u);
    Ok(FitResult {
        parameters: init
            .iter()
            .zip(theta)
            .map(|(p, value)| NamedValue {
                name: p.name.clone(),
                value,
            })
            .collect(),
        residual_sum: cost,
        n_points: data.len(),
        n_params,
        converged: termination != Termination::MaxIterations,
        iterations,
        termination,
        gradient_norm,
    })
}
