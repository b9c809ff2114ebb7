//! Built-in example systems.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{discretize_ode, CascadeStructure, OdeModel, SystemModel};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::interval::IntervalBox;

pub const BUILTIN_NAMES: &[&str] = &[
    "doubling",
    "example1",
    "example2",
    "linear3",
    "nonlinear3",
    "cstr6",
    "cstr6-neg",
];

/// A registry model with its cascade structure and default grouping.
///
/// Groupings list 0-based block indices per subsystem.
#[derive(Clone, Debug)]
pub struct BuiltinModel {
    pub model: SystemModel,
    pub cascade: Option<CascadeStructure>,
    pub default_grouping: Option<Vec<Vec<usize>>>,
}

/// Sign convention for the first-order reaction term of the CSTR cascade.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CstrVariant {
    /// `-x + Da₁x + u` exactly as printed (cancels to `u` for Da₁ = 1).
    Verbatim,
    /// `-x - Da₁x + u`, the consumption reading of the same term.
    NegativeDa1,
}

fn x(i: usize) -> Expr {
    Expr::state(i)
}

fn u(i: usize) -> Expr {
    Expr::input(i)
}

pub fn builtin_model(name: &str) -> Result<BuiltinModel> {
    match name {
        "doubling" => doubling(),
        "example1" => example1(),
        "example2" => example2(),
        "linear3" => linear3(),
        "nonlinear3" => nonlinear3(),
        "cstr6" => cstr6(CstrVariant::Verbatim),
        "cstr6-neg" => cstr6(CstrVariant::NegativeDa1),
        other => Err(Error::UnknownModel(String::from(other))),
    }
}

fn singleton_blocks(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![i]).collect()
}

/// Scalar `x⁺ = 2x + u` on `[-5, 5]`, `U = [-1, 1]`; largest CIS is `[-1, 1]`.
pub fn doubling() -> Result<BuiltinModel> {
    let model = SystemModel::new(
        "doubling",
        vec![2.0 * x(0) + u(0)],
        IntervalBox::cube(1, -5.0, 5.0),
        IntervalBox::cube(1, -1.0, 1.0),
    )?;
    Ok(BuiltinModel {
        model,
        cascade: None,
        default_grouping: None,
    })
}

/// Decoupled pair `x⁺ = diag(2, 2) x + I u`.
pub fn example1() -> Result<BuiltinModel> {
    let model = SystemModel::new(
        "example1",
        vec![2.0 * x(0) + u(0), 2.0 * x(1) + u(1)],
        IntervalBox::cube(2, -5.0, 5.0),
        IntervalBox::cube(2, -1.0, 1.0),
    )?;
    let cascade = CascadeStructure::infer(&model, singleton_blocks(2))?;
    Ok(BuiltinModel {
        model,
        cascade: Some(cascade),
        default_grouping: Some(vec![vec![0], vec![1]]),
    })
}

/// Series pair `x⁺ = [[2, 0], [1, 2]] x + I u`.
pub fn example2() -> Result<BuiltinModel> {
    let model = SystemModel::new(
        "example2",
        vec![2.0 * x(0) + u(0), x(0) + 2.0 * x(1) + u(1)],
        IntervalBox::cube(2, -5.0, 5.0),
        IntervalBox::cube(2, -1.0, 1.0),
    )?;
    let cascade = CascadeStructure::infer(&model, singleton_blocks(2))?;
    Ok(BuiltinModel {
        model,
        cascade: Some(cascade),
        default_grouping: Some(vec![vec![0], vec![1]]),
    })
}

/// Three-state linear cascade with lower-bidiagonal A and `B = e₁`.
pub fn linear3() -> Result<BuiltinModel> {
    let model = SystemModel::new(
        "linear3",
        vec![2.0 * x(0) + u(0), x(0) + 2.0 * x(1), x(1) + 2.0 * x(2)],
        IntervalBox::cube(3, -5.0, 5.0),
        IntervalBox::cube(1, -1.0, 1.0),
    )?;
    let cascade = CascadeStructure::infer(&model, singleton_blocks(3))?;
    Ok(BuiltinModel {
        model,
        cascade: Some(cascade),
        default_grouping: Some(vec![vec![0, 1], vec![1, 2]]),
    })
}

/// Three-state quadratic cascade `xᵢ⁺ = xᵢ² + x_{i-1}`, driven by `u` at the head.
pub fn nonlinear3() -> Result<BuiltinModel> {
    let model = SystemModel::new(
        "nonlinear3",
        vec![x(0).pow(2) + u(0), x(1).pow(2) + x(0), x(2).pow(2) + x(1)],
        IntervalBox::cube(3, -5.0, 5.0),
        IntervalBox::cube(1, -1.0, 1.0),
    )?;
    let cascade = CascadeStructure::infer(&model, singleton_blocks(3))?;
    Ok(BuiltinModel {
        model,
        cascade: Some(cascade),
        default_grouping: Some(vec![vec![0, 1], vec![1, 2]]),
    })
}

pub const DA1: f64 = 1.0;
pub const DA2: f64 = 2.0;

/// Continuous-time three-reactor cascade (dimensionless, `A → B → C`).
pub fn cstr6_ode(variant: CstrVariant) -> OdeModel {
    let first_order = |i: usize| match variant {
        CstrVariant::Verbatim => -x(i) + DA1 * x(i),
        CstrVariant::NegativeDa1 => -x(i) - DA1 * x(i),
    };
    let second_order = |i: usize| -x(i) + DA2 * x(i).pow(2);
    OdeModel {
        name: String::from(match variant {
            CstrVariant::Verbatim => "cstr6",
            CstrVariant::NegativeDa1 => "cstr6-neg",
        }),
        field: vec![
            first_order(0) + u(0),
            second_order(1) - DA1 * x(0),
            first_order(2) + x(0),
            second_order(3) - DA1 * x(2) + x(1),
            first_order(4) + x(2),
            second_order(5) - DA1 * x(4) + x(3),
        ],
        state_box: IntervalBox::cube(6, 0.0, 1.0),
        input_box: IntervalBox::cube(1, 0.0, 1.0),
    }
}

/// Euler-discretized (step 1) six-state CSTR cascade.
///
/// Blocks are the three reactors; the default grouping pairs consecutive
/// reactors with the middle reactor shared.
pub fn cstr6(variant: CstrVariant) -> Result<BuiltinModel> {
    let model = discretize_ode(&cstr6_ode(variant), 1.0)?;
    let cascade = CascadeStructure::infer(&model, vec![vec![0, 1], vec![2, 3], vec![4, 5]])?;
    Ok(BuiltinModel {
        model,
        cascade: Some(cascade),
        default_grouping: Some(vec![vec![0, 1], vec![1, 2]]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    /// Dense matrix-vector oracle for the linear registry entries.
    fn affine(a: &[&[f64]], b: &[&[f64]], x: &[f64], u: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(ar, br)| {
                ar.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + br.iter().zip(u).map(|(p, q)| p * q).sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn example1_evaluations() {
        let m = builtin_model("example1").unwrap().model;
        assert_eq!(m.evaluate(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), [0.0, 0.0]);
        let got = m.evaluate(&[1.0, -1.0], &[1.0, -1.0]).unwrap();
        let want = affine(
            &[&[2.0, 0.0], &[0.0, 2.0]],
            &[&[1.0, 0.0], &[0.0, 1.0]],
            &[1.0, -1.0],
            &[1.0, -1.0],
        );
        assert_eq!(got, want);
        assert_eq!(got, [3.0, -3.0]);
    }

    #[test]
    fn linear3_matches_matrices() {
        let m = builtin_model("linear3").unwrap().model;
        let a: &[&[f64]] = &[&[2.0, 0.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 1.0, 2.0]];
        let b: &[&[f64]] = &[&[1.0], &[0.0], &[0.0]];
        for (xv, uv) in [
            ([1.0, -2.0, 0.5], [0.25]),
            ([-4.5, 3.25, 1.125], [-1.0]),
            ([0.0, 0.0, 5.0], [1.0]),
        ] {
            assert_eq!(m.evaluate(&xv, &uv).unwrap(), affine(a, b, &xv, &uv));
        }
        assert_eq!(m.state_box(), &IntervalBox::cube(3, -5.0, 5.0));
        assert_eq!(m.input_box(), &IntervalBox::cube(1, -1.0, 1.0));
    }

    #[test]
    fn nonlinear3_hand_values() {
        let m = builtin_model("nonlinear3").unwrap().model;
        assert_eq!(m.evaluate(&[1.0, 1.0, 1.0], &[0.0]).unwrap(), [1.0, 2.0, 2.0]);
    }

    #[test]
    fn cstr6_equations() {
        let bm = builtin_model("cstr6").unwrap();
        let m = &bm.model;
        let eqs: Vec<_> = m.equations().iter().map(|e| e.to_string()).collect();
        assert_eq!(eqs[0], "x1 + u1");
        assert_eq!(eqs[1], "-x1 + 2.0*x2^2");
        assert_eq!(eqs[2], "x1 + x3");
        assert_eq!(eqs[3], "x2 - x3 + 2.0*x4^2");
        assert_eq!(m.state_box(), &IntervalBox::cube(6, 0.0, 1.0));
        assert_eq!(m.input_box(), &IntervalBox::cube(1, 0.0, 1.0));
        assert_eq!(m.evaluate(&[0.0; 6], &[0.0]).unwrap(), [0.0; 6]);
        let c = bm.cascade.unwrap();
        assert_eq!(c.couplings()[1], vec![0, 1]);
        assert_eq!(c.couplings()[2], vec![2, 3]);
    }

    #[test]
    fn cstr6_negative_variant() {
        let m = builtin_model("cstr6-neg").unwrap().model;
        assert_eq!(m.equations()[0].to_string(), "-x1 + u1");
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin_model("nope"), Err(Error::UnknownModel(_))));
        for name in BUILTIN_NAMES {
            builtin_model(name).unwrap();
        }
    }
}
