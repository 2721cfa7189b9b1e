//! Normal-order (leftmost-outermost) reduction with δ-rules for arithmetic
//! and the integer-zero conditional. Normal order is what makes recursion
//! through the fixed-point combinator terminate: the conditional discards
//! the untaken branch before it is ever reduced.

use thiserror::Error;

use super::{substitute, Expr};

/// One edge in a path from the root of a term to a subterm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStep {
    AppFn,
    AppArg,
    AbsBody,
    PrimArg(usize),
    IfCond,
    IfThen,
    IfElse,
}

pub type RedexPath = Vec<PathStep>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// `(λx. e) a → e[x := a]`
    Beta,
    /// Arithmetic or conditional evaluation on integer values.
    Delta,
}

#[derive(Debug, Clone)]
pub struct TraceStep {
    pub path: RedexPath,
    pub before: Expr,
    pub after: Expr,
    pub kind: StepKind,
}

#[derive(Debug, Clone)]
pub struct ReductionTrace {
    pub steps: Vec<TraceStep>,
    pub terminated: bool,
    pub fuel_used: usize,
}

#[derive(Debug, Error)]
#[error("fuel exhausted after {} steps; term did not reach normal form", trace.fuel_used)]
pub struct FuelExhausted {
    pub partial: Expr,
    pub trace: ReductionTrace,
}

pub const DEFAULT_FUEL: usize = 10_000;

fn step_inner(e: &Expr, path: &mut RedexPath) -> Option<(Expr, StepKind)> {
    match e {
        Expr::Var(_) | Expr::Int(_) => None,
        Expr::App(f, a) => {
            if let Expr::Abs(param, body) = f.as_ref() {
                return Some((substitute(body, param, a), StepKind::Beta));
            }
            path.push(PathStep::AppFn);
            if let Some((f2, kind)) = step_inner(f, path) {
                return Some((Expr::app(f2, (**a).clone()), kind));
            }
            path.pop();
            path.push(PathStep::AppArg);
            if let Some((a2, kind)) = step_inner(a, path) {
                return Some((Expr::app((**f).clone(), a2), kind));
            }
            path.pop();
            None
        }
        Expr::Abs(param, body) => {
            path.push(PathStep::AbsBody);
            if let Some((b2, kind)) = step_inner(body, path) {
                return Some((Expr::Abs(param.clone(), Box::new(b2)), kind));
            }
            path.pop();
            None
        }
        Expr::IfZero(cond, then, els) => {
            if let Some(v) = cond.as_int() {
                let chosen = if v == 0 { then } else { els };
                return Some(((**chosen).clone(), StepKind::Delta));
            }
            path.push(PathStep::IfCond);
            if let Some((c2, kind)) = step_inner(cond, path) {
                return Some((
                    Expr::if_zero(c2, (**then).clone(), (**els).clone()),
                    kind,
                ));
            }
            path.pop();
            path.push(PathStep::IfThen);
            if let Some((t2, kind)) = step_inner(then, path) {
                return Some((
                    Expr::if_zero((**cond).clone(), t2, (**els).clone()),
                    kind,
                ));
            }
            path.pop();
            path.push(PathStep::IfElse);
            if let Some((e2, kind)) = step_inner(els, path) {
                return Some((
                    Expr::if_zero((**cond).clone(), (**then).clone(), e2),
                    kind,
                ));
            }
            path.pop();
            None
        }
        Expr::Prim(op, args) => {
            if args.len() == 2 {
                if let (Some(a), Some(b)) = (args[0].as_int(), args[1].as_int()) {
                    return Some((Expr::Int(op.apply(a, b)), StepKind::Delta));
                }
            }
            for (i, arg) in args.iter().enumerate() {
                path.push(PathStep::PrimArg(i));
                if let Some((a2, kind)) = step_inner(arg, path) {
                    let mut new_args = args.clone();
                    new_args[i] = a2;
                    return Some((Expr::Prim(*op, new_args), kind));
                }
                path.pop();
            }
            None
        }
    }
}

/// Performs exactly one leftmost-outermost β- or δ-step, or returns `None`
/// when `e` is already in normal form.
pub fn beta_step(e: &Expr) -> Option<Expr> {
    step_inner(e, &mut Vec::new()).map(|(e2, _)| e2)
}

/// Like [`beta_step`], also reporting where the redex sat and which rule
/// fired.
pub fn beta_step_traced(e: &Expr) -> Option<(Expr, RedexPath, StepKind)> {
    let mut path = Vec::new();
    step_inner(e, &mut path).map(|(e2, kind)| (e2, path, kind))
}

/// Reduces to normal form, recording every step. `fuel` bounds the number
/// of steps; on exhaustion the partial trace and the term reached so far
/// come back in the error.
pub fn normalize(e: &Expr, fuel: usize) -> Result<(Expr, ReductionTrace), FuelExhausted> {
    let mut current = e.clone();
    let mut steps = Vec::new();
    let mut used = 0;
    loop {
        let mut path = Vec::new();
        match step_inner(&current, &mut path) {
            None => {
                return Ok((
                    current,
                    ReductionTrace {
                        steps,
                        terminated: true,
                        fuel_used: used,
                    },
                ));
            }
            Some((next, kind)) => {
                if used == fuel {
                    return Err(FuelExhausted {
                        partial: current,
                        trace: ReductionTrace {
                            steps,
                            terminated: false,
                            fuel_used: used,
                        },
                    });
                }
                steps.push(TraceStep {
                    path,
                    before: current.clone(),
                    after: next.clone(),
                    kind,
                });
                current = next;
                used += 1;
            }
        }
    }
}
