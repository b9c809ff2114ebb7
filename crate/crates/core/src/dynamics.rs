//! Discrete-time controlled systems `x⁺ = f(x, u)` with box constraints.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, EvalError, Result};
use crate::expr::{Arith, Expr, Tape, Var};
use crate::interval::{Interval, IntervalBox};

/// A constrained discrete-time system.
///
/// Besides states and inputs a model may read exogenous variables
/// ([`Var::Exo`]); decomposed subsystems use them for upstream states they do
/// not own. `exo_box` is the static range assumed for those variables when no
/// per-cell information is available.
#[derive(Clone, Debug)]
pub struct SystemModel {
    name: String,
    equations: Vec<Expr>,
    tapes: Vec<Tape>,
    state_box: IntervalBox,
    input_box: IntervalBox,
    exo_box: IntervalBox,
    tolerance: f64,
}

fn check_box(b: &IntervalBox, what: &str) -> Result<()> {
    if !b.is_finite() {
        return Err(Error::InvalidBox(format!("{what} box has non-finite bounds")));
    }
    Ok(())
}

impl SystemModel {
    pub fn new(
        name: impl Into<String>,
        equations: Vec<Expr>,
        state_box: IntervalBox,
        input_box: IntervalBox,
    ) -> Result<Self> {
        Self::with_exogenous(name, equations, state_box, input_box, IntervalBox::empty_dims())
    }

    pub fn with_exogenous(
        name: impl Into<String>,
        equations: Vec<Expr>,
        state_box: IntervalBox,
        input_box: IntervalBox,
        exo_box: IntervalBox,
    ) -> Result<Self> {
        let n = state_box.dim();
        if n == 0 {
            return Err(Error::InvalidModel("state dimension must be at least 1".into()));
        }
        if equations.len() != n {
            return Err(Error::DimensionMismatch {
                what: "equations vs state box",
                expected: n,
                got: equations.len(),
            });
        }
        check_box(&state_box, "state")?;
        check_box(&input_box, "input")?;
        check_box(&exo_box, "exogenous")?;
        for (k, eq) in equations.iter().enumerate() {
            for v in eq.variables() {
                let ok = match v {
                    Var::State(i) => i < n,
                    Var::Input(i) => i < input_box.dim(),
                    Var::Exo(i) => i < exo_box.dim(),
                };
                if !ok {
                    return Err(Error::InvalidModel(format!(
                        "equation {} references {v:?} outside the declared dimensions",
                        k + 1
                    )));
                }
            }
        }
        let tapes = equations.iter().map(Tape::compile).collect();
        Ok(Self {
            name: name.into(),
            equations,
            tapes,
            state_box,
            input_box,
            exo_box,
            tolerance: 1e-9,
        })
    }

    /// Absolute slack allowed when checking that an evaluation point lies in X.
    pub fn set_domain_tolerance(&mut self, tol: f64) {
        self.tolerance = tol;
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_box.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input_box.dim()
    }

    pub fn exo_dim(&self) -> usize {
        self.exo_box.dim()
    }

    pub fn equations(&self) -> &[Expr] {
        &self.equations
    }

    pub fn state_box(&self) -> &IntervalBox {
        &self.state_box
    }

    pub fn input_box(&self) -> &IntervalBox {
        &self.input_box
    }

    pub fn exo_box(&self) -> &IntervalBox {
        &self.exo_box
    }

    /// True when every equation is polynomial of degree ≤ 1 in the inputs.
    pub fn is_affine_in_input(&self) -> bool {
        let is_input = |v: Var| matches!(v, Var::Input(_));
        self.equations
            .iter()
            .all(|e| matches!(e.degree_in(&is_input), Some(0 | 1)))
    }

    fn check_dims(&self, x: usize, u: usize, e: usize) -> core::result::Result<(), EvalError> {
        for (what, expected, got) in [
            ("state", self.state_dim(), x),
            ("input", self.input_dim(), u),
            ("exogenous", self.exo_dim(), e),
        ] {
            if expected != got {
                return Err(EvalError::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }

    /// Pointwise evaluation of `f(x, u)`.
    pub fn evaluate(&self, x: &[f64], u: &[f64]) -> core::result::Result<Vec<f64>, EvalError> {
        self.evaluate_with_exo(x, u, &[])
    }

    pub fn evaluate_with_exo(&self, x: &[f64], u: &[f64], e: &[f64]) -> core::result::Result<Vec<f64>, EvalError> {
        self.check_dims(x.len(), u.len(), e.len())?;
        let tol = self.tolerance;
        let inside = self
            .state_box
            .intervals()
            .iter()
            .zip(x)
            .all(|(iv, &v)| v >= iv.lo() - tol && v <= iv.hi() + tol);
        if !inside {
            return Err(EvalError::OutsideDomain);
        }
        let mut stack = Vec::new();
        let mut out = Vec::with_capacity(self.tapes.len());
        for (k, t) in self.tapes.iter().enumerate() {
            let v = t.eval(x, u, e, &mut stack)?;
            if !v.is_finite() {
                return Err(EvalError::NonFinite { component: k });
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Guaranteed interval enclosure of `{f(x,u) : x ∈ xbox, u ∈ ubox}`.
    pub fn evaluate_interval(
        &self,
        xbox: &IntervalBox,
        ubox: &IntervalBox,
    ) -> core::result::Result<IntervalBox, EvalError> {
        self.evaluate_interval_with_exo(xbox, ubox, &self.exo_box)
    }

    pub fn evaluate_interval_with_exo(
        &self,
        xbox: &IntervalBox,
        ubox: &IntervalBox,
        ebox: &IntervalBox,
    ) -> core::result::Result<IntervalBox, EvalError> {
        let mut out = Vec::with_capacity(self.tapes.len());
        self.eval_into(
            xbox.intervals(),
            ubox.intervals(),
            ebox.intervals(),
            &mut Vec::new(),
            &mut out,
        )?;
        Ok(IntervalBox::new(out))
    }

    /// Allocation-free evaluation used on hot paths; `out` is overwritten.
    pub fn eval_into<T: Arith + Finite>(
        &self,
        x: &[T],
        u: &[T],
        e: &[T],
        stack: &mut Vec<T>,
        out: &mut Vec<T>,
    ) -> core::result::Result<(), EvalError> {
        self.check_dims(x.len(), u.len(), e.len())?;
        out.clear();
        for (k, t) in self.tapes.iter().enumerate() {
            let v = t.eval(x, u, e, stack)?;
            if !v.is_finite_value() {
                return Err(EvalError::NonFinite { component: k });
            }
            out.push(v);
        }
        Ok(())
    }
}

/// Finiteness check shared by scalar and interval evaluation.
pub trait Finite {
    fn is_finite_value(&self) -> bool;
}

impl Finite for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Finite for Interval {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

/// Continuous-time model `dx/dt = f(x, u)`.
#[derive(Clone, Debug)]
pub struct OdeModel {
    pub name: String,
    pub field: Vec<Expr>,
    pub state_box: IntervalBox,
    pub input_box: IntervalBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Discretization {
    #[default]
    ExplicitEuler,
    /// Heun's method (explicit trapezoidal, second order).
    Heun,
}

/// Explicit Euler discretization `x⁺ = x + step·f(x, u)`.
pub fn discretize_ode(ode: &OdeModel, step: f64) -> Result<SystemModel> {
    discretize_ode_with(ode, step, Discretization::ExplicitEuler)
}

pub fn discretize_ode_with(ode: &OdeModel, step: f64, scheme: Discretization) -> Result<SystemModel> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidModel(format!("step must be positive, got {step}")));
    }
    let n = ode.state_box.dim();
    if ode.field.len() != n {
        return Err(Error::DimensionMismatch {
            what: "vector field vs state box",
            expected: n,
            got: ode.field.len(),
        });
    }
    let euler: Vec<Expr> = (0..n)
        .map(|i| Expr::state(i) + Expr::Const(step) * ode.field[i].clone())
        .collect();
    let equations: Vec<Expr> = match scheme {
        Discretization::ExplicitEuler => euler,
        Discretization::Heun => {
            let predicted = |v: Var| match v {
                Var::State(j) => euler[j].clone(),
                other => Expr::Var(other),
            };
            (0..n)
                .map(|i| {
                    let f_pred = ode.field[i].substitute(&predicted);
                    Expr::state(i) + Expr::Const(0.5 * step) * (ode.field[i].clone() + f_pred)
                })
                .collect()
        }
    };
    let equations = equations.iter().map(Expr::simplify).collect();
    SystemModel::new(
        ode.name.clone(),
        equations,
        ode.state_box.clone(),
        ode.input_box.clone(),
    )
}

/// Ordered state-index blocks of a cascade `x_i⁺ = f_i(x_i, u_i) + g_i(x_{i-1})`.
///
/// `couplings[i]` lists the indices of block `i-1` that block `i` reads; it is
/// empty for block 0 and for blocks without an upstream dependency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CascadeStructure {
    blocks: Vec<Vec<usize>>,
    couplings: Vec<Vec<usize>>,
}

impl CascadeStructure {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>, couplings: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidCascade("no blocks".into()));
        }
        if couplings.len() != blocks.len() {
            return Err(Error::InvalidCascade("one coupling list per block required".into()));
        }
        let mut seen = alloc::vec![false; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidCascade(format!("block {} is empty", b + 1)));
            }
            for &i in block {
                if i >= n || seen[i] {
                    return Err(Error::InvalidCascade(format!(
                        "state index {} repeated or out of range in block {}",
                        i + 1,
                        b + 1
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidCascade("blocks do not cover every state".into()));
        }
        if !couplings[0].is_empty() {
            return Err(Error::InvalidCascade("block 1 cannot have an upstream coupling".into()));
        }
        for b in 1..blocks.len() {
            if let Some(&i) = couplings[b].iter().find(|i| !blocks[b - 1].contains(i)) {
                return Err(Error::InvalidCascade(format!(
                    "block {} reads state {} which is not in block {}",
                    b + 1,
                    i + 1,
                    b
                )));
            }
        }
        let mut blocks = blocks;
        let mut couplings = couplings;
        blocks.iter_mut().for_each(|b| b.sort_unstable());
        couplings.iter_mut().for_each(|c| {
            c.sort_unstable();
            c.dedup();
        });
        Ok(Self { blocks, couplings })
    }

    /// Derives the couplings from the model's equations and checks that no
    /// block reads beyond its immediate upstream neighbour.
    pub fn infer(model: &SystemModel, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n = model.state_dim();
        let mut block_of = alloc::vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            for &i in block {
                if i < n {
                    block_of[i] = b;
                }
            }
        }
        let mut couplings = alloc::vec![Vec::new(); blocks.len()];
        for (b, block) in blocks.iter().enumerate() {
            for &i in block {
                if i >= n {
                    continue;
                }
                for v in model.equations()[i].variables() {
                    let Var::State(j) = v else { continue };
                    let bj = block_of[j];
                    if bj == b {
                        continue;
                    }
                    if b == 0 || bj != b - 1 {
                        return Err(Error::InvalidCascade(format!(
                            "equation for x{} reads x{} outside its block and the immediate upstream block",
                            i + 1,
                            j + 1
                        )));
                    }
                    couplings[b].push(j);
                }
            }
        }
        Self::new(n, blocks, couplings)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn couplings(&self) -> &[Vec<usize>] {
        &self.couplings
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

impl core::fmt::Display for SystemModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(f, "{}", self.name)?;
        for (i, e) in self.equations.iter().enumerate() {
            writeln!(f, "  x{}+ = {}", i + 1, e)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{default_resolver, parse};
    use alloc::string::ToString;
    use alloc::vec;

    fn model(eqs: &[&str], n: usize, m: usize) -> SystemModel {
        SystemModel::new(
            "test",
            eqs.iter().map(|s| parse(s, &default_resolver).unwrap()).collect(),
            IntervalBox::cube(n, -5.0, 5.0),
            IntervalBox::cube(m, -1.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn scalar_doubling_interval_image() {
        let m = model(&["2*x1 + u1"], 1, 1);
        let r = m
            .evaluate_interval(
                &IntervalBox::from_bounds(&[-5.0], &[-2.5]).unwrap(),
                &IntervalBox::from_bounds(&[-1.0], &[1.0]).unwrap(),
            )
            .unwrap();
        assert_eq!(r.intervals()[0], Interval::new(-11.0, -4.0));
    }

    #[test]
    fn degenerate_boxes_collapse_to_point() {
        let m = model(&["2*x1 + x2 + u1", "x1 - 3*x2"], 2, 1);
        let x = [0.75, -1.5];
        let u = [0.25];
        let p = m.evaluate(&x, &u).unwrap();
        let r = m
            .evaluate_interval(&IntervalBox::point(&x), &IntervalBox::point(&u))
            .unwrap();
        assert_eq!(r.lo(), p);
        assert_eq!(r.hi(), p);
    }

    #[test]
    fn square_uses_even_power() {
        let m = model(&["x1^2"], 1, 0);
        let r = m
            .evaluate_interval(
                &IntervalBox::from_bounds(&[-1.0], &[2.0]).unwrap(),
                &IntervalBox::empty_dims(),
            )
            .unwrap();
        assert_eq!(r.intervals()[0], Interval::new(0.0, 4.0));
    }

    #[test]
    fn dimension_errors() {
        let m = model(&["2*x1 + u1"], 1, 1);
        assert!(matches!(
            m.evaluate(&[0.0, 1.0], &[0.0]),
            Err(EvalError::DimensionMismatch { .. })
        ));
        assert!(matches!(m.evaluate(&[7.0], &[0.0]), Err(EvalError::OutsideDomain)));
        let bad = SystemModel::new(
            "bad",
            vec![Expr::state(1)],
            IntervalBox::cube(1, 0.0, 1.0),
            IntervalBox::empty_dims(),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn non_finite_results_are_rejected() {
        let m = model(&["x1 / (x1 - x1)"], 1, 0);
        assert!(matches!(
            m.evaluate(&[1.0], &[]),
            Err(EvalError::NonFinite { component: 0 })
        ));
        let r = m.evaluate_interval(&IntervalBox::point(&[1.0]), &IntervalBox::empty_dims());
        assert!(matches!(r, Err(EvalError::DivisionByZeroInterval { .. })));
    }

    #[test]
    fn euler_on_integrator() {
        let ode = OdeModel {
            name: "integrator".into(),
            field: vec![Expr::input(0)],
            state_box: IntervalBox::cube(1, -1.0, 1.0),
            input_box: IntervalBox::cube(1, -1.0, 1.0),
        };
        let m = discretize_ode(&ode, 1.0).unwrap();
        assert_eq!(m.equations()[0].to_string(), "x1 + u1");
        assert!(discretize_ode(&ode, 0.0).is_err());
    }

    #[test]
    fn heun_matches_hand_expansion() {
        // dx/dt = -x: Heun gives x + h/2(-x - (x - h x)) = x(1 - h + h²/2)
        let ode = OdeModel {
            name: "decay".into(),
            field: vec![-Expr::state(0)],
            state_box: IntervalBox::cube(1, -1.0, 1.0),
            input_box: IntervalBox::empty_dims(),
        };
        let m = discretize_ode_with(&ode, 0.5, Discretization::Heun).unwrap();
        let v = m.evaluate(&[0.8], &[]).unwrap()[0];
        assert!((v - 0.8 * 0.625).abs() < 1e-15);
    }

    #[test]
    fn cascade_inference() {
        let m = model(&["2*x1 + u1", "x1 + 2*x2", "x2 + 2*x3"], 3, 1);
        let c = CascadeStructure::infer(&m, vec![vec![0], vec![1], vec![2]]).unwrap();
        assert_eq!(c.couplings(), &[vec![], vec![0], vec![1]]);
        let skip = model(&["2*x1 + u1", "x1 + 2*x2", "x1 + 2*x3"], 3, 1);
        assert!(CascadeStructure::infer(&skip, vec![vec![0], vec![1], vec![2]]).is_err());
        assert!(CascadeStructure::new(3, vec![vec![0], vec![1]], vec![vec![], vec![]]).is_err());
    }

    #[test]
    fn affine_detection() {
        assert!(model(&["x1^2 + u1"], 1, 1).is_affine_in_input());
        assert!(!model(&["x1 + u1^2"], 1, 1).is_affine_in_input());
    }
}
