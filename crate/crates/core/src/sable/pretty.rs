use std::fmt::Write as _;

use super::*;

const IND: &str = "    ";

/// Canonical rendering; parsing it back yields the same program.
pub fn pretty(program: &SableProgram) -> String {
    let mut out = String::new();
    for (i, t) in program.traversals.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        traversal(&mut out, t);
    }
    out
}

fn traversal(out: &mut String, t: &TraversalDef) {
    let _ = writeln!(out, "traversal {}:", t.name);
    for imp in &t.imports {
        let _ = writeln!(
            out,
            "{IND}fromTraversal {} importAspect {}",
            imp.traversal,
            imp.aspects.join(", ")
        );
    }
    if let Some(a) = &t.annotation {
        match &a.path {
            Some(p) => {
                let _ = writeln!(
                    out,
                    "{IND}sourceAnnotation {} {}",
                    a.var,
                    AspectValue::Str(p.clone())
                );
            }
            None => {
                let _ = writeln!(out, "{IND}sourceAnnotation {}", a.var);
            }
        }
    }
    for a in &t.aspects {
        let _ = writeln!(out, "{IND}aspect {} aspectType {}", a.name, a.ty);
    }
    for tr in &t.triggers {
        let _ = writeln!(out, "{IND}triggerFrom {} atValue {}", tr.aspect, tr.value);
    }
    if !t.utilities.is_empty() || !t.utility_imports.is_empty() {
        let _ = writeln!(out, "{IND}utility:");
        for (_, text) in &t.utility_imports {
            let _ = writeln!(out, "{IND}{IND}{text}");
        }
        for u in &t.utilities {
            let _ = writeln!(out, "{IND}{IND}def {}({}):", u.name, u.params.join(", "));
            block(out, &u.body, 3);
        }
    }
    for p in &t.pointcuts {
        let mut head = p.label.clone();
        for param in &p.params {
            head.push_str(", ");
            head.push_str(param);
        }
        let _ = writeln!(out, "{IND}pointcut({head}):");
        block(out, &p.body, 2);
    }
    for m in &t.merges {
        let _ = writeln!(out, "{IND}mergeAspects({}, {}):", m.params.0, m.params.1);
        block(out, &m.body, 2);
    }
}

fn block(out: &mut String, body: &[Stmt], depth: usize) {
    if body.is_empty() {
        let _ = writeln!(out, "{}pass", IND.repeat(depth));
    }
    for s in body {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = IND.repeat(depth);
    match &s.kind {
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{pad}{} = {}", target_str(target), expr_top(value));
        }
        StmtKind::AugAssign { target, op, value } => {
            let _ = writeln!(
                out,
                "{pad}{} {}= {}",
                target_str(target),
                op.symbol(),
                expr(value)
            );
        }
        StmtKind::If { branches, orelse } => {
            for (i, (c, b)) in branches.iter().enumerate() {
                let kw = if i == 0 { "if" } else { "elif" };
                let _ = writeln!(out, "{pad}{kw} {}:", expr(c));
                block(out, b, depth + 1);
            }
            if !orelse.is_empty() {
                let _ = writeln!(out, "{pad}else:");
                block(out, orelse, depth + 1);
            }
        }
        StmtKind::For { target, iter, body } => {
            let _ = writeln!(out, "{pad}for {} in {}:", target_str(target), expr(iter));
            block(out, body, depth + 1);
        }
        StmtKind::Return(None) => {
            let _ = writeln!(out, "{pad}return");
        }
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "{pad}return {}", expr_top(e));
        }
        StmtKind::Raise(None) => {
            let _ = writeln!(out, "{pad}raise");
        }
        StmtKind::Raise(Some(e)) => {
            let _ = writeln!(out, "{pad}raise {}", expr(e));
        }
        StmtKind::Pass => {
            let _ = writeln!(out, "{pad}pass");
        }
        StmtKind::Expr(e) => {
            let _ = writeln!(out, "{pad}{}", expr_top(e));
        }
    }
}

fn target_str(t: &Target) -> String {
    match t {
        Target::Name(n) => n.clone(),
        Target::Subscript(v, i) => format!("{}[{}]", atom(v), expr(i)),
        Target::Tuple(ts) => format!("({})", tuple_items(ts.iter().map(target_str).collect())),
    }
}

fn tuple_items(items: Vec<String>) -> String {
    if items.len() == 1 {
        format!("{},", items[0])
    } else {
        items.join(", ")
    }
}

/// Bare tuples are allowed at statement level.
fn expr_top(e: &Expr) -> String {
    expr(e)
}

fn list(items: &[Expr]) -> String {
    items.iter().map(expr).collect::<Vec<_>>().join(", ")
}

fn is_simple(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Name(_)
            | ExprKind::Lit(_)
            | ExprKind::List(_)
            | ExprKind::Tuple(_)
            | ExprKind::Set(_)
            | ExprKind::Dict(_)
            | ExprKind::Call(..)
            | ExprKind::Method(..)
            | ExprKind::Subscript(..)
    )
}

fn atom(e: &Expr) -> String {
    if is_simple(e) && !matches!(&e.kind, ExprKind::Lit(AspectValue::Int(i)) if *i < 0) {
        expr(e)
    } else {
        format!("({})", expr(e))
    }
}

fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Name(n) => n.clone(),
        ExprKind::Lit(v) => v.to_string(),
        ExprKind::List(xs) => format!("[{}]", list(xs)),
        ExprKind::Tuple(xs) => format!("({})", tuple_items(xs.iter().map(expr).collect())),
        ExprKind::Set(xs) if xs.is_empty() => "set()".into(),
        ExprKind::Set(xs) => format!("{{{}}}", list(xs)),
        ExprKind::Dict(pairs) => format!(
            "{{{}}}",
            pairs
                .iter()
                .map(|(k, v)| format!("{}: {}", expr(k), expr(v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        ExprKind::Bin(op, a, b) => format!("{} {} {}", atom(a), op.symbol(), atom(b)),
        ExprKind::Unary(UnaryOp::Not, a) => format!("not {}", atom(a)),
        ExprKind::Unary(UnaryOp::Neg, a) => format!("-{}", atom(a)),
        ExprKind::And(a, b) => format!("{} and {}", atom(a), atom(b)),
        ExprKind::Or(a, b) => format!("{} or {}", atom(a), atom(b)),
        ExprKind::Compare(a, rest) => {
            let mut s = atom(a);
            for (op, x) in rest {
                let _ = write!(s, " {} {}", op.symbol(), atom(x));
            }
            s
        }
        ExprKind::IfExp { cond, then, orelse } => {
            format!("{} if {} else {}", atom(then), atom(cond), atom(orelse))
        }
        ExprKind::Call(f, args) => format!("{}({})", atom(f), list(args)),
        ExprKind::Method(r, m, args) => format!("{}.{m}({})", atom(r), list(args)),
        ExprKind::Subscript(v, i) => format!("{}[{}]", atom(v), expr(i)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_stable() {
        let src = "traversal T:\n\tsourceAnnotation ann\n\taspect X aspectType set\n\ttriggerFrom X atValue 'a'\n\tutility:\n\t\tdef f(a, b):\n\t\t\treturn len(a & b) > 0 and not (a - b <= {1, -2})\n\tpointcut(Exp, e):\n\t\tX = f(X, {}) if X is not None else set()\n\t\tl = [1, (2, 3)]; l.append(-1); l[-1] = {'k': True}\n\t\tfor a, b in l: pass\n";
        let once = pretty(&parse_program(src).unwrap());
        let twice = pretty(&parse_program(&once).unwrap());
        assert_eq!(once, twice);
    }
}
