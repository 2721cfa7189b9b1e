//! Precedence-aware printer whose output re-parses to an α-equivalent term.
//! `render_with_span` additionally reports the character range occupied by
//! the subterm at a given path, which the CLI uses to underline redexes.

use super::reduce::{PathStep, RedexPath};
use super::{Expr, PrimOp};

// Binding strength, loosest to tightest. A child is parenthesized when its
// own level is below what its position requires.
const LEVEL_EXPR: u8 = 0;
const LEVEL_CMP: u8 = 1;
const LEVEL_ADD: u8 = 2;
const LEVEL_MUL: u8 = 3;
const LEVEL_APP: u8 = 4;
const LEVEL_ATOM: u8 = 5;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Abs(..) | Expr::IfZero(..) => LEVEL_EXPR,
        Expr::Prim(PrimOp::Eq, _) => LEVEL_CMP,
        Expr::Prim(PrimOp::Add, _) | Expr::Prim(PrimOp::Sub, _) => LEVEL_ADD,
        Expr::Prim(PrimOp::Mul, _) => LEVEL_MUL,
        Expr::App(..) => LEVEL_APP,
        Expr::Var(_) | Expr::Int(_) => LEVEL_ATOM,
    }
}

struct Renderer {
    out: String,
    chars: usize,
    span: Option<(usize, usize)>,
}

impl Renderer {
    fn push(&mut self, s: &str) {
        self.out.push_str(s);
        self.chars += s.chars().count();
    }
}

fn descend<'a>(path: Option<&'a [PathStep]>, step: PathStep) -> Option<&'a [PathStep]> {
    match path {
        Some([first, rest @ ..]) if *first == step => Some(rest),
        _ => None,
    }
}

fn go(e: &Expr, required: u8, path: Option<&[PathStep]>, r: &mut Renderer) {
    let here = matches!(path, Some([]));
    let start = r.chars;
    let paren = level(e) < required;
    if paren {
        r.push("(");
    }
    match e {
        Expr::Var(name) => r.push(name),
        Expr::Int(v) => r.push(&v.to_string()),
        Expr::Abs(param, body) => {
            r.push("λ");
            r.push(param);
            r.push(". ");
            go(body, LEVEL_EXPR, descend(path, PathStep::AbsBody), r);
        }
        Expr::App(f, a) => {
            go(f, LEVEL_APP, descend(path, PathStep::AppFn), r);
            r.push(" ");
            go(a, LEVEL_ATOM, descend(path, PathStep::AppArg), r);
        }
        Expr::Prim(op, args) if args.len() == 2 => {
            let (left_req, right_req) = match op {
                PrimOp::Eq => (LEVEL_ADD, LEVEL_ADD),
                PrimOp::Add | PrimOp::Sub => (LEVEL_ADD, LEVEL_MUL),
                PrimOp::Mul => (LEVEL_MUL, LEVEL_APP),
            };
            go(&args[0], left_req, descend(path, PathStep::PrimArg(0)), r);
            r.push(" ");
            r.push(op.symbol());
            r.push(" ");
            go(&args[1], right_req, descend(path, PathStep::PrimArg(1)), r);
        }
        Expr::Prim(op, args) => {
            // non-binary prim nodes do not arise from the parser
            r.push(op.symbol());
            for (i, a) in args.iter().enumerate() {
                r.push(" ");
                go(a, LEVEL_ATOM, descend(path, PathStep::PrimArg(i)), r);
            }
        }
        Expr::IfZero(c, t, els) => {
            r.push("ifz ");
            go(c, LEVEL_EXPR, descend(path, PathStep::IfCond), r);
            r.push(" then ");
            go(t, LEVEL_EXPR, descend(path, PathStep::IfThen), r);
            r.push(" else ");
            go(els, LEVEL_EXPR, descend(path, PathStep::IfElse), r);
        }
    }
    if paren {
        r.push(")");
    }
    if here {
        r.span = Some((start, r.chars));
    }
}

pub fn render(e: &Expr) -> String {
    render_with_span(e, None).0
}

/// Renders `e`; when `target` names a subterm, also returns the character
/// range (start, end) that subterm occupies in the output.
pub fn render_with_span(e: &Expr, target: Option<&RedexPath>) -> (String, Option<(usize, usize)>) {
    let mut r = Renderer {
        out: String::new(),
        chars: 0,
        span: None,
    };
    go(e, LEVEL_EXPR, target.map(Vec::as_slice), &mut r);
    (r.out, r.span)
}
