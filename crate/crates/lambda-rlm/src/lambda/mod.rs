//! Untyped λ-calculus with normal-order reduction, extended with integer
//! literals, primitive arithmetic, and an integer-zero conditional so that
//! recursion through the Y combinator is executable on concrete numbers.

mod parser;
mod pretty;
mod reduce;

pub use parser::{parse_expr, SyntaxError};
pub use pretty::{render, render_with_span};
pub use reduce::{
    beta_step, beta_step_traced, normalize, FuelExhausted, ReductionTrace, StepKind, TraceStep,
    DEFAULT_FUEL,
};

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimOp {
    Add,
    Sub,
    Mul,
    Eq,
}

impl PrimOp {
    pub fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            PrimOp::Add => a.wrapping_add(b),
            PrimOp::Sub => a.wrapping_sub(b),
            PrimOp::Mul => a.wrapping_mul(b),
            PrimOp::Eq => i64::from(a == b),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            PrimOp::Add => "+",
            PrimOp::Sub => "-",
            PrimOp::Mul => "*",
            PrimOp::Eq => "=",
        }
    }
}

/// A λ-term. Applications associate left when parsed; `IfZero` takes the
/// `then` branch when its condition reduces to the integer zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Var(String),
    Abs(String, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    Int(i64),
    Prim(PrimOp, Vec<Expr>),
    IfZero(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_owned())
    }

    pub fn abs(param: &str, body: Expr) -> Expr {
        Expr::Abs(param.to_owned(), Box::new(body))
    }

    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::App(Box::new(f), Box::new(a))
    }

    pub fn int(v: i64) -> Expr {
        Expr::Int(v)
    }

    pub fn prim(op: PrimOp, a: Expr, b: Expr) -> Expr {
        Expr::Prim(op, vec![a, b])
    }

    pub fn if_zero(cond: Expr, then: Expr, els: Expr) -> Expr {
        Expr::IfZero(Box::new(cond), Box::new(then), Box::new(els))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Expr::Int(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

/// Free variables of `e`.
pub fn free_vars(e: &Expr) -> BTreeSet<String> {
    fn walk(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match e {
            Expr::Var(name) => {
                if !bound.iter().any(|b| b == name) {
                    out.insert(name.clone());
                }
            }
            Expr::Abs(param, body) => {
                bound.push(param.clone());
                walk(body, bound, out);
                bound.pop();
            }
            Expr::App(f, a) => {
                walk(f, bound, out);
                walk(a, bound, out);
            }
            Expr::Int(_) => {}
            Expr::Prim(_, args) => {
                for a in args {
                    walk(a, bound, out);
                }
            }
            Expr::IfZero(c, t, els) => {
                walk(c, bound, out);
                walk(t, bound, out);
                walk(els, bound, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(e, &mut Vec::new(), &mut out);
    out
}

fn all_names(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Var(name) => {
            out.insert(name.clone());
        }
        Expr::Abs(param, body) => {
            out.insert(param.clone());
            all_names(body, out);
        }
        Expr::App(f, a) => {
            all_names(f, out);
            all_names(a, out);
        }
        Expr::Int(_) => {}
        Expr::Prim(_, args) => {
            for a in args {
                all_names(a, out);
            }
        }
        Expr::IfZero(c, t, els) => {
            all_names(c, out);
            all_names(t, out);
            all_names(els, out);
        }
    }
}

fn split_suffix(name: &str) -> (&str, u64) {
    let digits = name.chars().rev().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 || digits == name.len() {
        return (name, 0);
    }
    let split = name.len() - digits;
    let suffix = name[split..].parse().unwrap_or(0);
    (&name[..split], suffix)
}

/// Picks `base<k>` where `k` is one above the largest numeric suffix on
/// `base` occurring anywhere in the given terms. Deterministic.
fn fresh_name(original: &str, terms: &[&Expr]) -> String {
    let (base, own_suffix) = split_suffix(original);
    let mut names = BTreeSet::new();
    for term in terms {
        all_names(term, &mut names);
    }
    let mut max_suffix = own_suffix;
    for name in &names {
        let (b, s) = split_suffix(name);
        if b == base {
            max_suffix = max_suffix.max(s);
        }
    }
    format!("{base}{}", max_suffix + 1)
}

/// Capture-avoiding substitution `e[x := a]`. Binders that would capture a
/// free variable of `a` are renamed with a fresh numeric suffix first.
pub fn substitute(e: &Expr, x: &str, a: &Expr) -> Expr {
    match e {
        Expr::Var(name) => {
            if name == x {
                a.clone()
            } else {
                e.clone()
            }
        }
        Expr::Int(_) => e.clone(),
        Expr::Abs(param, body) => {
            if param == x {
                e.clone()
            } else if free_vars(a).contains(param) && free_vars(body).contains(x) {
                let fresh = fresh_name(param, &[body, a]);
                let renamed = substitute(body, param, &Expr::var(&fresh));
                Expr::Abs(fresh, Box::new(substitute(&renamed, x, a)))
            } else {
                Expr::Abs(param.clone(), Box::new(substitute(body, x, a)))
            }
        }
        Expr::App(f, arg) => Expr::app(substitute(f, x, a), substitute(arg, x, a)),
        Expr::Prim(op, args) => {
            Expr::Prim(*op, args.iter().map(|e| substitute(e, x, a)).collect())
        }
        Expr::IfZero(c, t, els) => Expr::if_zero(
            substitute(c, x, a),
            substitute(t, x, a),
            substitute(els, x, a),
        ),
    }
}

/// Structural equality up to consistent renaming of bound variables.
pub fn alpha_eq(a: &Expr, b: &Expr) -> bool {
    fn walk(a: &Expr, b: &Expr, env_a: &mut Vec<String>, env_b: &mut Vec<String>) -> bool {
        match (a, b) {
            (Expr::Var(x), Expr::Var(y)) => {
                let ia = env_a.iter().rposition(|n| n == x);
                let ib = env_b.iter().rposition(|n| n == y);
                match (ia, ib) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (Expr::Abs(px, bx), Expr::Abs(py, by)) => {
                env_a.push(px.clone());
                env_b.push(py.clone());
                let r = walk(bx, by, env_a, env_b);
                env_a.pop();
                env_b.pop();
                r
            }
            (Expr::App(f1, a1), Expr::App(f2, a2)) => {
                walk(f1, f2, env_a, env_b) && walk(a1, a2, env_a, env_b)
            }
            (Expr::Int(x), Expr::Int(y)) => x == y,
            (Expr::Prim(o1, xs), Expr::Prim(o2, ys)) => {
                o1 == o2
                    && xs.len() == ys.len()
                    && xs.iter().zip(ys).all(|(x, y)| walk(x, y, env_a, env_b))
            }
            (Expr::IfZero(c1, t1, e1), Expr::IfZero(c2, t2, e2)) => {
                walk(c1, c2, env_a, env_b)
                    && walk(t1, t2, env_a, env_b)
                    && walk(e1, e2, env_a, env_b)
            }
            _ => false,
        }
    }
    walk(a, b, &mut Vec::new(), &mut Vec::new())
}

/// The fixed-point combinator `λf. (λx. f (x x)) (λx. f (x x))`.
pub fn y_combinator() -> Expr {
    let half = Expr::abs(
        "x",
        Expr::app(
            Expr::var("f"),
            Expr::app(Expr::var("x"), Expr::var("x")),
        ),
    );
    Expr::abs("f", Expr::app(half.clone(), half))
}

/// The non-recursive factorial recipe
/// `λf. λn. ifz n then 1 else n * (f (n - 1))`; pair with [`y_combinator`]
/// to obtain factorial.
pub fn factorial_recipe() -> Expr {
    Expr::abs(
        "f",
        Expr::abs(
            "n",
            Expr::if_zero(
                Expr::var("n"),
                Expr::int(1),
                Expr::prim(
                    PrimOp::Mul,
                    Expr::var("n"),
                    Expr::app(
                        Expr::var("f"),
                        Expr::prim(PrimOp::Sub, Expr::var("n"), Expr::int(1)),
                    ),
                ),
            ),
        ),
    )
}

/// The canonical divergent term `(λx. x x) (λx. x x)`.
pub fn omega() -> Expr {
    let half = Expr::abs("x", Expr::app(Expr::var("x"), Expr::var("x")));
    Expr::app(half.clone(), half)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_vars_cases() {
        assert!(free_vars(&parse_expr("\\x. x").unwrap()).is_empty());
        let fv = free_vars(&parse_expr("\\x. y").unwrap());
        assert_eq!(fv.into_iter().collect::<Vec<_>>(), vec!["y"]);
        let fv = free_vars(&parse_expr("x (\\x. x)").unwrap());
        assert_eq!(fv.into_iter().collect::<Vec<_>>(), vec!["x"]);
    }

    #[test]
    fn substitute_capture_avoidance_renames() {
        // (λy. x)[x := y] must not capture: λy1. y
        let e = parse_expr("\\y. x").unwrap();
        let out = substitute(&e, "x", &Expr::var("y"));
        assert_eq!(out, Expr::abs("y1", Expr::var("y")));
        assert!(alpha_eq(&out, &Expr::abs("w", Expr::var("y"))));
    }

    #[test]
    fn substitute_free_occurrences() {
        let e = parse_expr("x x").unwrap();
        let id = parse_expr("\\v. v").unwrap();
        assert_eq!(substitute(&e, "x", &id), Expr::app(id.clone(), id));
    }

    #[test]
    fn substitute_bound_occurrence_untouched() {
        let e = parse_expr("\\x. x").unwrap();
        assert_eq!(substitute(&e, "x", &Expr::var("a")), e);
    }

    #[test]
    fn fresh_name_skips_existing_suffixes() {
        // body mentions y and y3: fresh must be y4
        let body = parse_expr("y3 x").unwrap();
        let replacement = Expr::var("y");
        assert_eq!(fresh_name("y", &[&body, &replacement]), "y4");
    }

    #[test]
    fn alpha_eq_distinguishes_free_vars() {
        let a = parse_expr("\\x. x y").unwrap();
        let b = parse_expr("\\z. z y").unwrap();
        let c = parse_expr("\\z. z w").unwrap();
        assert!(alpha_eq(&a, &b));
        assert!(!alpha_eq(&a, &c));
    }

    #[test]
    fn y_combinator_shape() {
        let y = y_combinator();
        let expected = parse_expr("\\f. (\\x. f (x x)) (\\x. f (x x))").unwrap();
        assert_eq!(y, expected);
    }
}
