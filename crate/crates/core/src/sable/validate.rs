use std::collections::BTreeSet;

use super::*;

pub const PRIMITIVES: &[&str] = &[
    "currentPoint",
    "getAspect",
    "enterLoop",
    "getExprSymbs",
    "getDescrSymbs",
];

pub const BUILTINS: &[&str] = &[
    "len",
    "set",
    "list",
    "dict",
    "str",
    "int",
    "bool",
    "deepcopy",
    "type",
    "sorted",
    "ValueError",
    "TypeError",
    "RuntimeError",
    "Exception",
];

fn fail(line: usize, message: String) -> SableError {
    SableError::Validation { line, message }
}

pub fn validate(program: &SableProgram) -> Result<(), SableError> {
    let mut seen = BTreeSet::new();
    for t in &program.traversals {
        if !seen.insert(t.name.as_str()) {
            return Err(fail(t.line, format!("duplicate traversal `{}`", t.name)));
        }
    }
    for t in &program.traversals {
        traversal(program, t)?;
    }
    Ok(())
}

fn traversal(program: &SableProgram, t: &TraversalDef) -> Result<(), SableError> {
    let name = &t.name;
    let mut aspects = BTreeSet::new();
    for a in &t.aspects {
        if !aspects.insert(a.name.as_str()) {
            return Err(fail(
                a.line,
                format!("duplicate aspect `{}` in traversal `{name}`", a.name),
            ));
        }
    }
    let mut imported = BTreeSet::new();
    for imp in &t.imports {
        let Some(src) = program.traversal(&imp.traversal) else {
            return Err(fail(
                imp.line,
                format!(
                    "traversal `{name}` imports from unknown traversal `{}`",
                    imp.traversal
                ),
            ));
        };
        for a in &imp.aspects {
            if src.aspect_type(a).is_none() {
                return Err(fail(
                    imp.line,
                    format!("traversal `{}` declares no aspect `{a}`", imp.traversal),
                ));
            }
            if aspects.contains(a.as_str()) {
                return Err(fail(
                    imp.line,
                    format!("imported aspect `{a}` is also declared in traversal `{name}`"),
                ));
            }
            imported.insert(a.as_str());
        }
    }
    for tr in &t.triggers {
        if !aspects.contains(tr.aspect.as_str()) && !imported.contains(tr.aspect.as_str()) {
            return Err(fail(
                tr.line,
                format!("triggerFrom names undeclared aspect `{}`", tr.aspect),
            ));
        }
    }
    if let Some((line, text)) = t.utility_imports.first() {
        return Err(fail(
            *line,
            format!("`{text}`: imports are not supported in utility blocks"),
        ));
    }
    let mut utils = BTreeSet::new();
    for u in &t.utilities {
        if !utils.insert(u.name.as_str()) {
            return Err(fail(u.line, format!("duplicate utility `{}`", u.name)));
        }
    }
    let mut labels = BTreeSet::new();
    for p in &t.pointcuts {
        if p.label.parse::<StatementLabel>().is_err() {
            return Err(fail(
                p.line,
                format!("unknown statement label `{}`", p.label),
            ));
        }
        if !labels.insert(p.label.as_str()) {
            return Err(fail(
                p.line,
                format!(
                    "pointcut `{}` used more than once in traversal `{name}`",
                    p.label
                ),
            ));
        }
    }
    if t.merges.len() > 1 {
        return Err(fail(
            t.merges[1].line,
            format!("more than one mergeAspects in traversal `{name}`"),
        ));
    }

    let mut globals: BTreeSet<&str> = aspects.iter().copied().collect();
    globals.extend(imported.iter().copied());
    globals.extend(utils.iter().copied());
    globals.extend(BUILTINS);
    globals.extend(PRIMITIVES.iter().filter(|p| **p != "currentPoint"));
    if let Some(a) = &t.annotation {
        globals.insert(a.var.as_str());
    }

    for u in &t.utilities {
        scope(&u.params, &u.body, &globals, &BTreeSet::new())?;
    }
    let mut pc_globals = globals.clone();
    pc_globals.insert("currentPoint");
    for p in &t.pointcuts {
        let mut readonly: BTreeSet<&str> = p.params.iter().map(String::as_str).collect();
        readonly.extend(imported.iter().copied());
        scope(&p.params, &p.body, &pc_globals, &readonly)?;
    }
    for m in &t.merges {
        let params = vec![m.params.0.clone(), m.params.1.clone()];
        scope(&params, &m.body, &globals, &BTreeSet::new())?;
    }
    Ok(())
}

fn scope(
    params: &[String],
    body: &[Stmt],
    globals: &BTreeSet<&str>,
    readonly: &BTreeSet<&str>,
) -> Result<(), SableError> {
    let mut locals: BTreeSet<String> = params.iter().cloned().collect();
    let mut stores = Vec::new();
    collect_stores(body, &mut stores);
    for (line, n) in &stores {
        if readonly.contains(n.as_str()) {
            return Err(fail(
                *line,
                format!("cannot assign to read-only name `{n}`"),
            ));
        }
        locals.insert(n.clone());
    }
    let mut uses = Vec::new();
    collect_uses(body, &mut uses);
    for (line, n) in uses {
        if !locals.contains(&n) && !globals.contains(n.as_str()) {
            return Err(fail(line, format!("unresolved name `{n}`")));
        }
    }
    Ok(())
}

fn target_names(t: &Target, line: usize, out: &mut Vec<(usize, String)>) {
    match t {
        Target::Name(n) => out.push((line, n.clone())),
        Target::Tuple(ts) => ts.iter().for_each(|t| target_names(t, line, out)),
        Target::Subscript(..) => {}
    }
}

fn collect_stores(body: &[Stmt], out: &mut Vec<(usize, String)>) {
    for s in body {
        match &s.kind {
            StmtKind::Assign { target, .. } | StmtKind::AugAssign { target, .. } => {
                target_names(target, s.line, out)
            }
            StmtKind::For { target, body, .. } => {
                target_names(target, s.line, out);
                collect_stores(body, out);
            }
            StmtKind::If { branches, orelse } => {
                branches.iter().for_each(|(_, b)| collect_stores(b, out));
                collect_stores(orelse, out);
            }
            _ => {}
        }
    }
}

fn target_uses(t: &Target, out: &mut Vec<(usize, String)>) {
    match t {
        Target::Name(_) => {}
        Target::Tuple(ts) => ts.iter().for_each(|t| target_uses(t, out)),
        Target::Subscript(v, i) => {
            expr_uses(v, out);
            expr_uses(i, out);
        }
    }
}

fn collect_uses(body: &[Stmt], out: &mut Vec<(usize, String)>) {
    for s in body {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                target_uses(target, out);
                expr_uses(value, out);
            }
            StmtKind::AugAssign { target, value, .. } => {
                if let Target::Name(n) = target {
                    out.push((s.line, n.clone()));
                }
                target_uses(target, out);
                expr_uses(value, out);
            }
            StmtKind::If { branches, orelse } => {
                for (c, b) in branches {
                    expr_uses(c, out);
                    collect_uses(b, out);
                }
                collect_uses(orelse, out);
            }
            StmtKind::For { iter, body, .. } => {
                expr_uses(iter, out);
                collect_uses(body, out);
            }
            StmtKind::Return(e) | StmtKind::Raise(e) => {
                if let Some(e) = e {
                    expr_uses(e, out);
                }
            }
            StmtKind::Expr(e) => expr_uses(e, out),
            StmtKind::Pass => {}
        }
    }
}

pub(crate) fn expr_uses(e: &Expr, out: &mut Vec<(usize, String)>) {
    match &e.kind {
        ExprKind::Name(n) => out.push((e.line, n.clone())),
        ExprKind::Lit(_) => {}
        ExprKind::List(xs) | ExprKind::Tuple(xs) | ExprKind::Set(xs) => {
            xs.iter().for_each(|x| expr_uses(x, out))
        }
        ExprKind::Dict(pairs) => pairs.iter().for_each(|(k, v)| {
            expr_uses(k, out);
            expr_uses(v, out);
        }),
        ExprKind::Bin(_, a, b)
        | ExprKind::And(a, b)
        | ExprKind::Or(a, b)
        | ExprKind::Subscript(a, b) => {
            expr_uses(a, out);
            expr_uses(b, out);
        }
        ExprKind::Unary(_, a) => expr_uses(a, out),
        ExprKind::Compare(a, rest) => {
            expr_uses(a, out);
            rest.iter().for_each(|(_, x)| expr_uses(x, out));
        }
        ExprKind::IfExp { cond, then, orelse } => {
            expr_uses(cond, out);
            expr_uses(then, out);
            expr_uses(orelse, out);
        }
        ExprKind::Call(f, args) => {
            expr_uses(f, out);
            args.iter().for_each(|x| expr_uses(x, out));
        }
        ExprKind::Method(r, _, args) => {
            expr_uses(r, out);
            args.iter().for_each(|x| expr_uses(x, out));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(text: &str) -> Result<(), SableError> {
        parse_sable(text).map(|_| ())
    }

    fn message(text: &str) -> String {
        match check(text).unwrap_err() {
            SableError::Validation { message, .. } => message,
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn duplicates() {
        assert_eq!(
            message("traversal A:\n  aspect X aspectType set\ntraversal A:\n  aspect Y aspectType set\n"),
            "duplicate traversal `A`"
        );
        assert_eq!(
            message("traversal A:\n  aspect X aspectType set\n  aspect X aspectType bool\n"),
            "duplicate aspect `X` in traversal `A`"
        );
        assert_eq!(
            message(
                "traversal A:\n  pointcut(Assign, l, r): pass\n  pointcut(Assign, l, r): pass\n"
            ),
            "pointcut `Assign` used more than once in traversal `A`"
        );
        assert_eq!(
            message(
                "traversal A:\n  mergeAspects(a, b): return a\n  mergeAspects(a, b): return b\n"
            ),
            "more than one mergeAspects in traversal `A`"
        );
    }

    #[test]
    fn names_and_labels() {
        assert_eq!(
            message("traversal A:\n  pointcut(Assing, l, r): pass\n"),
            "unknown statement label `Assing`"
        );
        assert_eq!(
            message("traversal A:\n  triggerFrom V atValue True\n"),
            "triggerFrom names undeclared aspect `V`"
        );
        assert_eq!(
            message("traversal A:\n  pointcut(Exp, e): X = foo(e)\n"),
            "unresolved name `foo`"
        );
        assert_eq!(
            message("traversal A:\n  pointcut(Exp, e): e = 1\n"),
            "cannot assign to read-only name `e`"
        );
        assert_eq!(
            message("traversal A:\n  utility:\n    def f(x): return currentPoint\n"),
            "unresolved name `currentPoint`"
        );
        assert_eq!(
            message("traversal A:\n  utility:\n    import os\n"),
            "`import os`: imports are not supported in utility blocks"
        );
        assert_eq!(
            message("traversal A:\n  fromTraversal B importAspect X\n"),
            "traversal `A` imports from unknown traversal `B`"
        );
    }

    #[test]
    fn function_level_scoping() {
        check(
            "traversal A:\n  aspect X aspectType set\n  pointcut(Exp, e):\n    if True:\n      y = 1\n    X = {y}\n",
        )
        .unwrap();
        check(
            "traversal A:\n  aspect X aspectType set\n  utility:\n    def f(a):\n      for k in a:\n        b = k\n      return X\n",
        )
        .unwrap();
    }
}
