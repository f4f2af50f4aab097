//! Strong-stability-preserving Runge-Kutta steps in α-β form.
//!
//! Stage `i` is the convex combination `Σ_k α_ik z^(i,k)` with
//! `z^(i,k) = w^(k) + (β_ik/α_ik) dt L(w^(k))`, and every forward-Euler
//! substep is delegated to a caller-provided stepper that also limits.

use serde::{Deserialize, Serialize};

use crate::error::{SolverError, TableauError};
use crate::state::StateField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SspMethod {
    Fe,
    Ssp22,
    Ssp33,
    Ssp43,
}

impl SspMethod {
    pub fn tableau(self) -> AlphaBetaTableau {
        let builtin = builtin_tableaus();
        let name = match self {
            SspMethod::Fe => "fe",
            SspMethod::Ssp22 => "ssp22",
            SspMethod::Ssp33 => "ssp33",
            SspMethod::Ssp43 => "ssp43",
        };
        builtin.into_iter().find(|t| t.name == name).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBetaTableau {
    pub name: String,
    /// Row `i` holds `α_{i+1,k}` for `k = 0..=i`.
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    /// Time offset `γ_k` of `L(w^(k))`, in units of `dt`.
    gamma: Vec<f64>,
    c_os: f64,
}

impl AlphaBetaTableau {
    pub fn new(name: &str, alpha: Vec<Vec<f64>>, beta: Vec<Vec<f64>>, gamma: Vec<f64>) -> Result<Self, TableauError> {
        let stages = alpha.len();
        if stages == 0 || beta.len() != stages || gamma.len() != stages {
            return Err(TableauError::Shape(format!(
                "{} alpha rows, {} beta rows, {} stage times",
                stages,
                beta.len(),
                gamma.len()
            )));
        }
        let mut c_os = f64::INFINITY;
        for row in 0..stages {
            if alpha[row].len() != row + 1 || beta[row].len() != row + 1 {
                return Err(TableauError::Shape(format!("row {row} must have {} entries", row + 1)));
            }
            for col in 0..=row {
                let (a, b) = (alpha[row][col], beta[row][col]);
                if a < 0.0 || b < 0.0 {
                    return Err(TableauError::Negative { row, col });
                }
                if a == 0.0 && b != 0.0 {
                    return Err(TableauError::BetaWithoutAlpha { row, col });
                }
                if a > 0.0 && b > 0.0 {
                    c_os = c_os.min(a / b);
                }
            }
            let sum: f64 = alpha[row].iter().sum();
            if (sum - 1.0).abs() > 1e-14 {
                return Err(TableauError::RowSum { row, sum });
            }
        }
        if !(c_os.is_finite() && c_os > 0.0) {
            return Err(TableauError::NoSspCoefficient);
        }
        Ok(AlphaBetaTableau { name: name.to_string(), alpha, beta, gamma, c_os })
    }

    pub fn stages(&self) -> usize {
        self.alpha.len()
    }

    pub fn c_os(&self) -> f64 {
        self.c_os
    }

    pub fn alpha(&self, row: usize, col: usize) -> f64 {
        self.alpha[row][col]
    }

    pub fn beta(&self, row: usize, col: usize) -> f64 {
        self.beta[row][col]
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma[k]
    }
}

/// Forward Euler, SSPRK(2,2), SSPRK(3,3) and SSPRK(4,3).
pub fn builtin_tableaus() -> Vec<AlphaBetaTableau> {
    let t = |name, alpha, beta, gamma| AlphaBetaTableau::new(name, alpha, beta, gamma).unwrap();
    vec![
        t("fe", vec![vec![1.0]], vec![vec![1.0]], vec![0.0]),
        t("ssp22", vec![vec![1.0], vec![0.5, 0.5]], vec![vec![1.0], vec![0.0, 0.5]], vec![0.0, 1.0]),
        t(
            "ssp33",
            vec![vec![1.0], vec![0.75, 0.25], vec![1.0 / 3.0, 0.0, 2.0 / 3.0]],
            vec![vec![1.0], vec![0.0, 0.25], vec![0.0, 0.0, 2.0 / 3.0]],
            vec![0.0, 1.0, 0.5],
        ),
        t(
            "ssp43",
            vec![vec![1.0], vec![0.0, 1.0], vec![2.0 / 3.0, 0.0, 1.0 / 3.0], vec![0.0, 0.0, 0.0, 1.0]],
            vec![vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0 / 6.0], vec![0.0, 0.0, 0.0, 0.5]],
            vec![0.0, 0.5, 1.0, 0.5],
        ),
    ]
}

/// One forward-Euler substep `w ↦ w + τ L(t, w)`, already limited.
pub trait Substep {
    fn substep(&mut self, w: &StateField, t: f64, tau: f64) -> Result<StateField, SolverError>;

    /// Called with every completed stage; an error aborts the step.
    fn stage_done(&mut self, _stage: usize, _w: &StateField) -> Result<(), SolverError> {
        Ok(())
    }
}

/// Advance `u` from `t` by `dt`.
pub fn ssp_step(
    stepper: &mut dyn Substep,
    u: &StateField,
    t: f64,
    dt: f64,
    tableau: &AlphaBetaTableau,
) -> Result<StateField, SolverError> {
    let mut stages: Vec<StateField> = vec![u.clone()];
    for i in 0..tableau.stages() {
        let wrap = |e: SolverError| match e {
            SolverError::Cfl { .. } => e,
            _ => SolverError::Stage { stage: i + 1, source: Box::new(e) },
        };
        let mut terms: Vec<(f64, StateField)> = Vec::new();
        for k in 0..=i {
            let (a, b) = (tableau.alpha(i, k), tableau.beta(i, k));
            if a == 0.0 {
                continue;
            }
            if b == 0.0 {
                terms.push((a, stages[k].clone()));
            } else {
                let z = stepper.substep(&stages[k], t + tableau.gamma(k) * dt, b / a * dt).map_err(wrap)?;
                terms.push((a, z));
            }
        }
        let w = if terms.len() == 1 && terms[0].0 == 1.0 {
            terms.pop().unwrap().1
        } else {
            let refs: Vec<(f64, &StateField)> = terms.iter().map(|(a, f)| (*a, f)).collect();
            StateField::combine(&refs)
        };
        stepper.stage_done(i + 1, &w).map_err(wrap)?;
        stages.push(w);
    }
    Ok(stages.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::State;

    struct Linear {
        rate: f64,
        calls: usize,
    }

    impl Substep for Linear {
        fn substep(&mut self, w: &StateField, _t: f64, tau: f64) -> Result<StateField, SolverError> {
            self.calls += 1;
            Ok(StateField::new(1, w.values().iter().map(|v| *v + tau * self.rate * *v).collect()))
        }
    }

    fn advance(method: SspMethod, rate: f64, dt: f64, steps: usize) -> f64 {
        let tableau = method.tableau();
        let mut stepper = Linear { rate, calls: 0 };
        let mut u = StateField::new(1, vec![State::scalar(1.0)]);
        for n in 0..steps {
            u = ssp_step(&mut stepper, &u, n as f64 * dt, dt, &tableau).unwrap();
        }
        u[0][0]
    }

    #[test]
    fn builtin_coefficients() {
        let all = builtin_tableaus();
        let c: Vec<f64> = all.iter().map(|t| t.c_os()).collect();
        assert_eq!(c, vec![1.0, 1.0, 1.0, 2.0]);
        let ssp33 = SspMethod::Ssp33.tableau();
        assert_eq!(ssp33.alpha(2, 0), 1.0 / 3.0);
        assert_eq!(ssp33.alpha(2, 2), 2.0 / 3.0);
        let ssp22 = SspMethod::Ssp22.tableau();
        assert_eq!((ssp22.alpha(1, 0), ssp22.alpha(1, 1)), (0.5, 0.5));
    }

    #[test]
    fn validator_rejects_bad_tableaus() {
        // Midpoint rule: β_20 + α_21 / 2 = 0 forces a negative entry or a
        // β without α.
        for a21 in [0.0, 0.25, 0.5, 1.0] {
            let res = AlphaBetaTableau::new(
                "midpoint",
                vec![vec![1.0], vec![1.0 - a21, a21]],
                vec![vec![0.5], vec![-0.5 * a21, 1.0]],
                vec![0.0, 0.5],
            );
            assert!(res.is_err());
        }
        assert!(matches!(
            AlphaBetaTableau::new("x", vec![vec![0.5]], vec![vec![1.0]], vec![0.0]),
            Err(TableauError::RowSum { .. })
        ));
        assert!(matches!(
            AlphaBetaTableau::new("x", vec![vec![1.0], vec![1.0]], vec![vec![1.0], vec![1.0]], vec![0.0, 0.0]),
            Err(TableauError::Shape(_))
        ));
    }

    #[test]
    fn forward_euler_is_one_substep() {
        let mut stepper = Linear { rate: -2.0, calls: 0 };
        let u = StateField::new(1, vec![State::scalar(1.0)]);
        let v = ssp_step(&mut stepper, &u, 0.0, 0.1, &SspMethod::Fe.tableau()).unwrap();
        assert_eq!(stepper.calls, 1);
        assert!((v[0][0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn ssp33_matches_taylor_polynomial() {
        let (lambda, dt): (f64, f64) = (-1.0, 1e-2);
        let z = lambda * dt;
        let taylor = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
        let one = advance(SspMethod::Ssp33, lambda, dt, 1);
        assert!((one - taylor).abs() < 1e-14);
        assert!((one - z.exp()).abs() < 1e-9);
    }

    #[test]
    fn observed_temporal_orders() {
        let exact = (-1.0f64).exp();
        for (method, expected) in [(SspMethod::Ssp22, 1.9), (SspMethod::Ssp33, 2.8), (SspMethod::Ssp43, 2.8)] {
            let e1 = (advance(method, -1.0, 0.1, 10) - exact).abs();
            let e2 = (advance(method, -1.0, 0.05, 20) - exact).abs();
            assert!((e1 / e2).log2() >= expected, "{method:?}");
        }
    }
}
