//! Ownership template and constraint generation.
//!
//! Every reference-typed variable carries one template per program point;
//! each syntactic site emits the constraints its typing rule demands, all
//! guarded by the path condition of the site.

use super::{FunOwnSig, IndexExpansion, OwnError, OwnProblem, OwnTemplate, TForm, TTerm};
use crate::formula::{Cmp, Formula, LinTerm};
use crate::scope::ScopeEnv;
use crate::simple_types::{SimpleType, SimpleTypeTable};
use crate::syntax::ast::{free_vars, Atom, Def, Expr, Program, Rhs};
use std::collections::BTreeMap;

/// Seed for generating constraints of an expression outside any function,
/// used by tests that mirror worked examples.
#[derive(Debug, Clone)]
pub struct FragmentSetup {
    pub scope_ints: Vec<String>,
    pub ptr_vars: Vec<String>,
    pub guard: Formula,
}

/// Generates templates and constraints for a whole core program.
pub fn gen_templates_and_constraints(
    p: &Program,
    table: &SimpleTypeTable,
) -> Result<OwnProblem, OwnError> {
    check_supported(p, table)?;
    let mut prob = OwnProblem::default();

    // Signatures first so recursion and forward calls see them.
    for (name, def) in &p.defs {
        let sig_types = &table.funs[name];
        let int_formals: Vec<String> = def
            .params
            .iter()
            .zip(&sig_types.params)
            .filter(|(_, t)| !t.is_ref())
            .map(|(x, _)| x.clone())
            .collect();
        let mut sig = FunOwnSig {
            int_formals: int_formals.clone(),
            ..Default::default()
        };
        for (x, t) in def.params.iter().zip(&sig_types.params) {
            if t.is_ref() {
                let pre = prob.fresh_template(&int_formals, format!("{name}:{x} pre"));
                let post = prob.fresh_template(&int_formals, format!("{name}:{x} post"));
                sig.ptr_pre.insert(x.clone(), pre);
                sig.ptr_post.insert(x.clone(), post);
            }
        }
        if sig_types.ret.is_ref() {
            sig.ret_ptr = Some(prob.fresh_template(&int_formals, format!("{name}:ret")));
        }
        prob.fun_sigs.insert(name.clone(), sig);
    }

    for (name, def) in &p.defs {
        gen_def(&mut prob, table, p, def, name)?;
    }

    let mut walker = Walker {
        prob: &mut prob,
        table,
        fun_params: param_names(p),
    };
    let main_env = OwnEnv {
        scope: ScopeEnv::new(),
        ptrs: BTreeMap::new(),
    };
    walker.walk(&p.main, main_env)?;

    Ok(prob)
}

/// Generates constraints for a bare expression under a seeded environment,
/// with no enclosing function (so no post-state flows at the leaves).
pub fn gen_own_constraints_for_fragment(
    e: &Expr,
    table: &SimpleTypeTable,
    setup: &FragmentSetup,
) -> Result<OwnProblem, OwnError> {
    let mut prob = OwnProblem::default();
    let mut env = OwnEnv {
        scope: ScopeEnv::new(),
        ptrs: BTreeMap::new(),
    };
    for x in &setup.scope_ints {
        env.scope.bind_root(x);
    }
    env.scope.guard = setup.guard.clone();
    for v in &setup.ptr_vars {
        let t = prob.fresh_template(&setup.scope_ints, format!("fragment:{v} entry"));
        env.ptrs.insert(v.clone(), t);
    }
    let mut walker = Walker {
        prob: &mut prob,
        table,
        fun_params: BTreeMap::new(),
    };
    walker.walk(e, env)?;
    Ok(prob)
}

fn param_names(p: &Program) -> BTreeMap<String, Vec<String>> {
    p.defs
        .iter()
        .map(|(name, def)| (name.clone(), def.params.clone()))
        .collect()
}

fn gen_def(
    prob: &mut OwnProblem,
    table: &SimpleTypeTable,
    p: &Program,
    def: &Def,
    name: &str,
) -> Result<(), OwnError> {
    let sig = prob.fun_sigs[name].clone();
    let mut env = OwnEnv {
        scope: ScopeEnv::new(),
        ptrs: BTreeMap::new(),
    };
    for x in &sig.int_formals {
        env.scope.bind_root(x);
    }
    for (x, t) in &sig.ptr_pre {
        env.ptrs.insert(x.clone(), *t);
    }
    let leaves = {
        let mut walker = Walker {
            prob,
            table,
            fun_params: param_names(p),
        };
        walker.walk(&def.body, env)?
    };
    for leaf in &leaves {
        let guard = leaf.env.scope.guard.clone();
        // Pointer formals flow into their post templates.
        let ret_ptr_var = match &leaf.value {
            Atom::Var(v) if leaf.env.ptrs.contains_key(v) => Some(v.clone()),
            _ => None,
        };
        for (formal, post_id) in &sig.ptr_post {
            let Some(cur) = leaf.env.ptrs.get(formal) else {
                continue;
            };
            if ret_ptr_var.as_deref() == Some(formal.as_str()) {
                continue; // handled below as a split with the return value
            }
            let body = flow_body(
                &prob.templates[*cur].clone(),
                &prob.templates[*post_id].clone(),
                None,
            );
            prob.push_constraint(format!("{name}: return flow for {formal}"), &guard, body);
        }
        // The leaf value, when it is a pointer, flows into the return
        // template; a pointer that is also a formal splits between the
        // return and its post state.
        if let Some(v) = &ret_ptr_var {
            let ret_id = sig
                .ret_ptr
                .expect("pointer-valued leaf in an int-returning function");
            let cur = prob.templates[leaf.env.ptrs[v]].clone();
            let ret_t = prob.templates[ret_id].clone();
            match sig.ptr_post.get(v) {
                Some(post_id) => {
                    let post_t = prob.templates[*post_id].clone();
                    prob.push_constraint(
                        format!("{name}: return value flow"),
                        &guard,
                        flow_body(&cur, &ret_t, None),
                    );
                    prob.push_constraint(
                        format!("{name}: return flow for {v}"),
                        &guard,
                        flow_body(&cur, &post_t, None),
                    );
                    prob.push_constraint(
                        format!("{name}: return split of {v}"),
                        &guard,
                        split_disjunction(&cur, &ret_t, None, &post_t, None),
                    );
                }
                None => {
                    prob.push_constraint(
                        format!("{name}: return value flow"),
                        &guard,
                        flow_body(&cur, &ret_t, None),
                    );
                }
            }
        }
    }
    Ok(())
}

/// Rejects programs outside the inference fragment.
fn check_supported(p: &Program, table: &SimpleTypeTable) -> Result<(), OwnError> {
    for (x, t) in &table.vars {
        if t.ref_depth() > 1 {
            return Err(OwnError::Unsupported(format!(
                "nested pointers (variable `{x}` has type {t})"
            )));
        }
    }
    for (f, sig) in &table.funs {
        for (k, t) in sig.params.iter().enumerate() {
            if t.ref_depth() > 1 {
                return Err(OwnError::Unsupported(format!(
                    "nested pointers (parameter {k} of `{f}`)"
                )));
            }
        }
        if sig.ret.ref_depth() > 1 {
            return Err(OwnError::Unsupported(format!(
                "nested pointers (return type of `{f}`)"
            )));
        }
    }
    fn no_alias_deref(e: &Expr) -> Result<(), OwnError> {
        match e {
            Expr::Value(_, _) => Ok(()),
            Expr::Let { rhs, body, .. } => {
                if let Rhs::Expr(inner) = rhs {
                    no_alias_deref(inner)?;
                }
                no_alias_deref(body)
            }
            Expr::If {
                then_branch,
                else_branch,
                ..
            }
            | Expr::IfNp {
                then_branch,
                else_branch,
                ..
            } => {
                no_alias_deref(then_branch)?;
                no_alias_deref(else_branch)
            }
            Expr::Assign { body, .. }
            | Expr::Assert { body, .. }
            | Expr::AliasAddPtr { body, .. } => no_alias_deref(body),
            Expr::AliasDeref { .. } => Err(OwnError::Unsupported(
                "alias(x = *y) requires nested pointers".into(),
            )),
        }
    }
    for def in p.defs.values() {
        no_alias_deref(&def.body)?;
    }
    no_alias_deref(&p.main)
}

#[derive(Debug, Clone)]
struct OwnEnv {
    scope: ScopeEnv,
    /// Pointer variable -> current template id.
    ptrs: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
struct Leaf {
    env: OwnEnv,
    value: Atom,
}

struct Walker<'a, 'b> {
    prob: &'a mut OwnProblem,
    table: &'b SimpleTypeTable,
    /// Parameter names of every definition, for call-site substitution.
    fun_params: BTreeMap<String, Vec<String>>,
}

/// Containment-plus-ownership flow `r_from >= r_to` for interval templates:
/// `lo_from <= lo_to + shift`, `hi_to + shift <= hi_from`, `o_from >= o_to`.
/// The shift places `to`'s indices in `from`'s coordinates.
fn flow_body(from: &OwnTemplate, to: &OwnTemplate, shift: Option<&LinTerm>) -> TForm {
    let (lo_to, hi_to) = shifted_bounds(to, shift);
    TForm::And(vec![
        TForm::Atom(Cmp::Le, from.lo.clone(), lo_to),
        TForm::Atom(Cmp::Le, hi_to, from.hi.clone()),
        TForm::Atom(Cmp::Ge, from.own(), to.own()),
    ])
}

fn shifted_bounds(t: &OwnTemplate, shift: Option<&LinTerm>) -> (TTerm, TTerm) {
    match shift {
        None => (t.lo.clone(), t.hi.clone()),
        Some(s) => (t.lo.add_lin(s), t.hi.add_lin(s)),
    }
}

/// No-double-count disjunction for splitting `parent` into `a` and `b`:
/// either the ownership values sum within the parent's, or the two child
/// intervals are disjoint.
fn split_disjunction(
    parent: &OwnTemplate,
    a: &OwnTemplate,
    shift_a: Option<&LinTerm>,
    b: &OwnTemplate,
    shift_b: Option<&LinTerm>,
) -> TForm {
    let (lo_a, hi_a) = shifted_bounds(a, shift_a);
    let (lo_b, hi_b) = shifted_bounds(b, shift_b);
    TForm::Or(vec![
        TForm::Atom(Cmp::Ge, parent.own(), a.own().add(&b.own())),
        TForm::Atom(Cmp::Lt, hi_b, lo_a),
        TForm::Atom(Cmp::Lt, hi_a, lo_b),
    ])
}

/// Index variable of pointwise merge constraints. Source names never
/// contain `$`, so this cannot collide with program variables.
const MERGE_IDX: &str = "$i";

/// Pointwise bound `r_xp(i - s) + r_yp(i) <= r_x(i - s) + r_y(i)` expanded
/// over the membership patterns of the four intervals; `i` ranges over the
/// base pointer's coordinates.
fn merge_body(
    x: &OwnTemplate,
    y: &OwnTemplate,
    xp: &OwnTemplate,
    yp: &OwnTemplate,
    shift: &LinTerm,
) -> TForm {
    let i = LinTerm::var(MERGE_IDX);
    // In y-coordinates, x-indexed templates occupy [lo + s, hi + s].
    let mem = |t: &OwnTemplate, shifted: bool| -> (TTerm, TTerm) {
        if shifted {
            (t.lo.add_lin(shift), t.hi.add_lin(shift))
        } else {
            (t.lo.clone(), t.hi.clone())
        }
    };
    let slots: [(&OwnTemplate, bool); 4] = [(xp, true), (yp, false), (x, true), (y, false)];
    let mut clauses = Vec::new();
    // Pattern bit k set = index inside slot k's interval.
    for pattern in 0u8..16 {
        let after_x = pattern & 1 != 0;
        let after_y = pattern & 2 != 0;
        if !after_x && !after_y {
            continue; // 0 <= anything, ownership values are nonnegative
        }
        let before_x = pattern & 4 != 0;
        let before_y = pattern & 8 != 0;
        let mut sum_after = TTerm::constant(0);
        if after_x {
            sum_after = sum_after.add(&xp.own());
        }
        if after_y {
            sum_after = sum_after.add(&yp.own());
        }
        let mut sum_before = TTerm::constant(0);
        if before_x {
            sum_before = sum_before.add(&x.own());
        }
        if before_y {
            sum_before = sum_before.add(&y.own());
        }
        // not(pattern) || sum_after <= sum_before
        let mut disjuncts = Vec::new();
        for (k, (slot, shifted)) in slots.iter().enumerate() {
            let (lo, hi) = mem(slot, *shifted);
            let inside = pattern & (1 << k) != 0;
            let it = TTerm::from_linterm(&i);
            if inside {
                // negation of membership: i < lo or i > hi
                disjuncts.push(TForm::Atom(Cmp::Lt, it.clone(), lo));
                disjuncts.push(TForm::Atom(Cmp::Gt, it, hi));
            } else {
                // negation of non-membership: lo <= i <= hi
                disjuncts.push(TForm::And(vec![
                    TForm::Atom(Cmp::Le, lo, it.clone()),
                    TForm::Atom(Cmp::Le, it, hi),
                ]));
            }
        }
        disjuncts.push(TForm::Atom(Cmp::Le, sum_after, sum_before));
        clauses.push(TForm::Or(disjuncts));
    }
    TForm::And(clauses)
}

/// Pointwise bound `r_yp(i) <= r_x(i - s) + r_y(i)` for a full transfer
/// into the base pointer; `i` ranges over the base's coordinates.
fn merge_transfer_body(
    x: &OwnTemplate,
    y: &OwnTemplate,
    yp: &OwnTemplate,
    shift: &LinTerm,
) -> TForm {
    let i = TTerm::from_linterm(&LinTerm::var(MERGE_IDX));
    let sources: [(&OwnTemplate, bool); 2] = [(x, true), (y, false)];
    let (lo_yp, hi_yp) = (yp.lo.clone(), yp.hi.clone());
    let mut clauses = Vec::new();
    for pattern in 0u8..4 {
        let mut sum = TTerm::constant(0);
        let mut disjuncts = vec![
            TForm::Atom(Cmp::Lt, i.clone(), lo_yp.clone()),
            TForm::Atom(Cmp::Gt, i.clone(), hi_yp.clone()),
        ];
        for (k, (t, shifted)) in sources.iter().enumerate() {
            let (lo, hi) = shifted_bounds(t, shifted.then_some(shift));
            if pattern & (1 << k) != 0 {
                sum = sum.add(&t.own());
                disjuncts.push(TForm::Atom(Cmp::Lt, i.clone(), lo));
                disjuncts.push(TForm::Atom(Cmp::Gt, i.clone(), hi));
            } else {
                disjuncts.push(TForm::And(vec![
                    TForm::Atom(Cmp::Le, lo, i.clone()),
                    TForm::Atom(Cmp::Le, i.clone(), hi),
                ]));
            }
        }
        disjuncts.push(TForm::Atom(Cmp::Le, yp.own(), sum));
        clauses.push(TForm::Or(disjuncts));
    }
    TForm::And(clauses)
}

impl Walker<'_, '_> {
    fn is_ptr(&self, x: &str) -> bool {
        self.table.var(x).map(SimpleType::is_ref).unwrap_or(false)
    }

    fn walk(&mut self, e: &Expr, env: OwnEnv) -> Result<Vec<Leaf>, OwnError> {
        match e {
            Expr::Value(a, _) => Ok(vec![Leaf {
                env,
                value: a.clone(),
            }]),
            Expr::Let { var, rhs, body, .. } => self.walk_let(var, rhs, body, env),
            Expr::IfNp {
                var,
                then_branch,
                else_branch,
                ..
            } => {
                let mut env_t = env.clone();
                env_t.scope.enter_branch(var, true);
                let mut leaves = self.walk(then_branch, env_t)?;
                let mut env_e = env;
                env_e.scope.enter_branch(var, false);
                leaves.extend(self.walk(else_branch, env_e)?);
                Ok(leaves)
            }
            Expr::Assign { var, body, .. } => {
                let mut env = env;
                let guard = env.scope.guard.clone();
                let cur_id = env.ptrs[var];
                let cur = self.prob.templates[cur_id].clone();
                let zero = TTerm::constant(0);
                self.prob.push_constraint(
                    format!("assign {var}: full ownership at 0"),
                    &guard,
                    TForm::And(vec![
                        TForm::Atom(Cmp::Eq, cur.own(), TTerm::constant(1)),
                        TForm::Atom(Cmp::Le, cur.lo.clone(), zero.clone()),
                        TForm::Atom(Cmp::Le, zero, cur.hi.clone()),
                    ]),
                );
                let next_id = self
                    .prob
                    .fresh_template(&env.scope.roots, format!("{var} after assign"));
                let next = self.prob.templates[next_id].clone();
                self.prob.push_constraint(
                    format!("assign {var}: flow"),
                    &guard,
                    flow_body(&cur, &next, None),
                );
                env.ptrs.insert(var.clone(), next_id);
                self.walk(body, env)
            }
            Expr::Assert { body, .. } => self.walk(body, env),
            Expr::AliasAddPtr {
                var,
                base,
                offset,
                body,
                ..
            } => {
                let mut env = env;
                if var != base {
                    let guard = env.scope.guard.clone();
                    let s = env.scope.atom_term(offset);
                    let x = self.prob.templates[env.ptrs[var]].clone();
                    let y = self.prob.templates[env.ptrs[base]].clone();
                    // Auto-inserted aliases always merge a pointer that is
                    // dead afterwards; then everything transfers into the
                    // base and only one new template is needed.
                    let var_dead = !free_vars(body).contains(var);
                    if var_dead {
                        let yp_id = self
                            .prob
                            .fresh_template(&env.scope.roots, format!("{base} after alias"));
                        let yp = self.prob.templates[yp_id].clone();
                        let mut breakpoints = Vec::new();
                        for (t, shifted) in [(&yp, false), (&x, true), (&y, false)] {
                            let (lo, hi) = shifted_bounds(t, shifted.then_some(&s));
                            breakpoints.push(lo);
                            breakpoints.push(hi.add_lin(&LinTerm::constant(1)));
                        }
                        self.prob.push_constraint_expanded(
                            format!("alias {var} = {base} + {offset}: pointwise merge"),
                            &guard,
                            merge_transfer_body(&x, &y, &yp, &s),
                            Some(IndexExpansion {
                                var: MERGE_IDX.to_string(),
                                breakpoints,
                            }),
                        );
                        env.ptrs.remove(var);
                        env.ptrs.insert(base.clone(), yp_id);
                    } else {
                        let xp_id = self
                            .prob
                            .fresh_template(&env.scope.roots, format!("{var} after alias"));
                        let yp_id = self
                            .prob
                            .fresh_template(&env.scope.roots, format!("{base} after alias"));
                        let xp = self.prob.templates[xp_id].clone();
                        let yp = self.prob.templates[yp_id].clone();
                        // In base coordinates, pieces start at each interval's
                        // lower bound and end after each upper bound.
                        let mut breakpoints = Vec::new();
                        for (t, shifted) in [(&xp, true), (&yp, false), (&x, true), (&y, false)]
                        {
                            let (lo, hi) = shifted_bounds(t, shifted.then_some(&s));
                            breakpoints.push(lo);
                            breakpoints.push(hi.add_lin(&LinTerm::constant(1)));
                        }
                        self.prob.push_constraint_expanded(
                            format!("alias {var} = {base} + {offset}: pointwise merge"),
                            &guard,
                            merge_body(&x, &y, &xp, &yp, &s),
                            Some(IndexExpansion {
                                var: MERGE_IDX.to_string(),
                                breakpoints,
                            }),
                        );
                        env.ptrs.insert(var.clone(), xp_id);
                        env.ptrs.insert(base.clone(), yp_id);
                    }
                }
                self.walk(body, env)
            }
            Expr::AliasDeref { .. } => Err(OwnError::Unsupported(
                "alias(x = *y) requires nested pointers".into(),
            )),
            Expr::If { .. } => unreachable!("surface conditional after desugaring"),
        }
    }

    fn walk_let(
        &mut self,
        var: &str,
        rhs: &Rhs,
        body: &Expr,
        mut env: OwnEnv,
    ) -> Result<Vec<Leaf>, OwnError> {
        let guard = env.scope.guard.clone();
        match rhs {
            Rhs::Atom(Atom::Var(y)) if self.is_ptr(y) => {
                // Pointer copy splits the source's ownership.
                let live_after = free_vars(body).contains(y);
                if !live_after {
                    let t = env.ptrs.remove(y).expect("pointer without template");
                    env.ptrs.insert(var.to_string(), t);
                } else {
                    let src = self.prob.templates[env.ptrs[y]].clone();
                    let t_var = self
                        .prob
                        .fresh_template(&env.scope.roots, format!("{var} copy of {y}"));
                    let t_y = self
                        .prob
                        .fresh_template(&env.scope.roots, format!("{y} after copy"));
                    let tv = self.prob.templates[t_var].clone();
                    let ty = self.prob.templates[t_y].clone();
                    self.prob.push_constraint(
                        format!("copy {var} = {y}: flow to copy"),
                        &guard,
                        flow_body(&src, &tv, None),
                    );
                    self.prob.push_constraint(
                        format!("copy {var} = {y}: flow to source"),
                        &guard,
                        flow_body(&src, &ty, None),
                    );
                    self.prob.push_constraint(
                        format!("copy {var} = {y}: split"),
                        &guard,
                        split_disjunction(&src, &tv, None, &ty, None),
                    );
                    env.ptrs.insert(var.to_string(), t_var);
                    env.ptrs.insert(y.clone(), t_y);
                }
                self.walk(body, env)
            }
            Rhs::Deref(y) => {
                let t = self.prob.templates[env.ptrs[y]].clone();
                let zero = TTerm::constant(0);
                self.prob.push_constraint(
                    format!("deref {y}: positive ownership at 0"),
                    &guard,
                    TForm::And(vec![
                        TForm::Atom(Cmp::Gt, t.own(), TTerm::constant(0)),
                        TForm::Atom(Cmp::Le, t.lo.clone(), zero.clone()),
                        TForm::Atom(Cmp::Le, zero, t.hi.clone()),
                    ]),
                );
                env.scope.bind_int(var, rhs);
                self.walk(body, env)
            }
            Rhs::AddPtr(y, z) => {
                let s = env.scope.atom_term(z);
                let parent = self.prob.templates[env.ptrs[y]].clone();
                let after_id = self
                    .prob
                    .fresh_template(&env.scope.roots, format!("{y} after pointer add"));
                let child_id = self
                    .prob
                    .fresh_template(&env.scope.roots, format!("{var} = {y} + {z}"));
                let after = self.prob.templates[after_id].clone();
                let child = self.prob.templates[child_id].clone();
                self.prob.push_constraint(
                    format!("ptr-add {var} = {y} + {z}: flow to {y}"),
                    &guard,
                    flow_body(&parent, &after, None),
                );
                self.prob.push_constraint(
                    format!("ptr-add {var} = {y} + {z}: child containment"),
                    &guard,
                    flow_body(&parent, &child, Some(&s)),
                );
                self.prob.push_constraint(
                    format!("ptr-add {var} = {y} + {z}: no double count"),
                    &guard,
                    split_disjunction(&parent, &after, None, &child, Some(&s)),
                );
                env.ptrs.insert(y.clone(), after_id);
                env.ptrs.insert(var.to_string(), child_id);
                self.walk(body, env)
            }
            Rhs::MkArray(n) => {
                let t_id = self
                    .prob
                    .fresh_template(&env.scope.roots, format!("{var} = alloc {n}"));
                let t = self.prob.templates[t_id].clone();
                self.prob.push_constraint(
                    format!("alloc {var}: exact block [0, {}]", n - 1u8),
                    &guard,
                    TForm::And(vec![
                        TForm::Atom(Cmp::Eq, t.lo.clone(), TTerm::constant(0)),
                        TForm::Atom(Cmp::Eq, t.hi.clone(), TTerm::constant(n - 1u8)),
                        TForm::Atom(Cmp::Eq, t.own(), TTerm::constant(1)),
                    ]),
                );
                env.ptrs.insert(var.to_string(), t_id);
                self.walk(body, env)
            }
            Rhs::Call(f, args) => {
                let sig = self.prob.fun_sigs[f].clone();
                let def_params = self.defs_params(f);
                let sigma = self.call_sigma(&env, f, args, &def_params);
                // Argument templates flow into the callee's instantiated
                // pre-templates; duplicate pointer actuals must also split.
                let mut seen: BTreeMap<String, Vec<usize>> = BTreeMap::new();
                for (formal, actual) in def_params.iter().zip(args) {
                    let Some(pre_id) = sig.ptr_pre.get(formal) else {
                        continue;
                    };
                    let a = actual.as_var().expect("core call argument");
                    let cur = self.prob.templates[env.ptrs[a]].clone();
                    let pre = instantiate_template(&self.prob.templates[*pre_id], &sigma);
                    self.prob.push_constraint(
                        format!("call {f}: argument {a} into {formal}"),
                        &guard,
                        flow_body(&cur, &pre, None),
                    );
                    if let Some(prev) = seen.get(a) {
                        for other_id in prev {
                            let other = instantiate_template(
                                &self.prob.templates[*other_id],
                                &sigma,
                            );
                            self.prob.push_constraint(
                                format!("call {f}: {a} passed twice"),
                                &guard,
                                split_disjunction(&cur, &pre, None, &other, None),
                            );
                        }
                    }
                    seen.entry(a.to_string()).or_default().push(*pre_id);
                }
                // Post-templates flow back into fresh templates for the
                // pointer actuals.
                for (formal, actual) in def_params.iter().zip(args) {
                    let Some(post_id) = sig.ptr_post.get(formal) else {
                        continue;
                    };
                    let a = actual.as_var().expect("core call argument");
                    let post = instantiate_template(&self.prob.templates[*post_id], &sigma);
                    let after_id = self
                        .prob
                        .fresh_template(&env.scope.roots, format!("{a} after call to {f}"));
                    let after = self.prob.templates[after_id].clone();
                    self.prob.push_constraint(
                        format!("call {f}: result flow back into {a}"),
                        &guard,
                        flow_body(&post, &after, None),
                    );
                    env.ptrs.insert(a.to_string(), after_id);
                }
                // The bound variable: an integer result is an opaque root, a
                // pointer result flows from the return template.
                match sig.ret_ptr {
                    Some(ret_id) => {
                        let ret = instantiate_template(&self.prob.templates[ret_id], &sigma);
                        let var_id = self
                            .prob
                            .fresh_template(&env.scope.roots, format!("{var} from call to {f}"));
                        let var_t = self.prob.templates[var_id].clone();
                        self.prob.push_constraint(
                            format!("call {f}: return value into {var}"),
                            &guard,
                            flow_body(&ret, &var_t, None),
                        );
                        env.ptrs.insert(var.to_string(), var_id);
                    }
                    None => {
                        env.scope.bind_int(var, rhs);
                    }
                }
                self.walk(body, env)
            }
            Rhs::Expr(inner) => {
                let leaves = self.walk(inner, env.clone())?;
                self.join(var, body, env, leaves)
            }
            // Remaining forms bind integers.
            _ => {
                env.scope.bind_int(var, rhs);
                self.walk(body, env)
            }
        }
    }

    fn defs_params(&self, f: &str) -> Vec<String> {
        // Parameter names in order; the simple table stores types by name.
        self.fun_params
            .get(f)
            .cloned()
            .expect("callee signature exists")
    }

    /// Maps callee int formals to the linear terms of the actuals.
    fn call_sigma(
        &self,
        env: &OwnEnv,
        f: &str,
        args: &[Atom],
        params: &[String],
    ) -> BTreeMap<String, LinTerm> {
        let mut sigma = BTreeMap::new();
        let _ = f;
        for (formal, actual) in params.iter().zip(args) {
            if !self.is_ptr(formal) {
                sigma.insert(formal.clone(), env.scope.atom_term(actual));
            }
        }
        sigma
    }

    /// Rejoins the leaves of a nested let-bound expression with the
    /// continuation, restoring the lexical scope of the binding site.
    fn join(
        &mut self,
        var: &str,
        body: &Expr,
        outer: OwnEnv,
        leaves: Vec<Leaf>,
    ) -> Result<Vec<Leaf>, OwnError> {
        let var_is_ptr = self.is_ptr(var);
        let body_free = free_vars(body);
        if leaves.len() == 1 {
            let leaf = leaves.into_iter().next().unwrap();
            let mut env = outer;
            // Pointer state survives the join; branch-local templates for
            // out-of-scope pointers are simply dropped.
            let mut ptrs = BTreeMap::new();
            for name in env.ptrs.keys() {
                if let Some(t) = leaf.env.ptrs.get(name) {
                    ptrs.insert(name.clone(), *t);
                }
            }
            if var_is_ptr {
                let v = leaf
                    .value
                    .as_var()
                    .expect("pointer-valued leaf is a variable");
                let src_id = leaf.env.ptrs[v];
                if env.ptrs.contains_key(v) && body_free.contains(v) {
                    // The value aliases a live outer pointer: split.
                    let src = self.prob.templates[src_id].clone();
                    let t_var =
                        self.prob
                            .fresh_template(&env.scope.roots, format!("{var} from block"));
                    let t_v = self
                        .prob
                        .fresh_template(&env.scope.roots, format!("{v} after block"));
                    let tv = self.prob.templates[t_var].clone();
                    let tv2 = self.prob.templates[t_v].clone();
                    let guard = env.scope.guard.clone();
                    self.prob.push_constraint(
                        format!("block result {var}: flow"),
                        &guard,
                        flow_body(&src, &tv, None),
                    );
                    self.prob.push_constraint(
                        format!("block result {var}: source flow"),
                        &guard,
                        flow_body(&src, &tv2, None),
                    );
                    self.prob.push_constraint(
                        format!("block result {var}: split"),
                        &guard,
                        split_disjunction(&src, &tv, None, &tv2, None),
                    );
                    ptrs.insert(var.to_string(), t_var);
                    ptrs.insert(v.to_string(), t_v);
                } else {
                    ptrs.remove(v);
                    ptrs.insert(var.to_string(), src_id);
                }
            } else {
                // Integer result: keep an exact definition when it only
                // mentions roots that stay in scope, otherwise a fresh root.
                let term = leaf.env.scope.atom_term(&leaf.value);
                let mut fv = std::collections::BTreeSet::new();
                term.free_vars(&mut fv);
                let surviving = fv.iter().all(|x| env.scope.roots.contains(x));
                if surviving {
                    env.scope.lin_defs.insert(var.to_string(), term);
                } else {
                    env.scope.bind_root(var);
                }
            }
            env.ptrs = ptrs;
            return self.walk(body, env);
        }

        // Several leaves: join templates for the live outer pointers and the
        // bound variable, fed from every leaf under its guard.
        let mut env = outer;
        let live: Vec<String> = env
            .ptrs
            .keys()
            .filter(|name| body_free.contains(*name))
            .cloned()
            .collect();
        let mut join_ids = BTreeMap::new();
        for q in &live {
            let id = self
                .prob
                .fresh_template(&env.scope.roots, format!("{q} after join"));
            join_ids.insert(q.clone(), id);
        }
        let var_join = if var_is_ptr {
            Some(
                self.prob
                    .fresh_template(&env.scope.roots, format!("{var} from join")),
            )
        } else {
            env.scope.bind_root(var);
            None
        };
        for leaf in &leaves {
            let guard = leaf.env.scope.guard.clone();
            let value_var = leaf.value.as_var();
            for q in &live {
                let src = self.prob.templates[leaf.env.ptrs[q]].clone();
                let dst = self.prob.templates[join_ids[q]].clone();
                if var_is_ptr && value_var == Some(q.as_str()) {
                    // The leaf returns a live pointer: split between the
                    // join template of the variable and of the pointer.
                    let vt = self.prob.templates[var_join.unwrap()].clone();
                    self.prob.push_constraint(
                        format!("join {var}: flow from {q}"),
                        &guard,
                        flow_body(&src, &vt, None),
                    );
                    self.prob.push_constraint(
                        format!("join: flow {q}"),
                        &guard,
                        flow_body(&src, &dst, None),
                    );
                    self.prob.push_constraint(
                        format!("join {var}: split with {q}"),
                        &guard,
                        split_disjunction(&src, &vt, None, &dst, None),
                    );
                } else {
                    self.prob.push_constraint(
                        format!("join: flow {q}"),
                        &guard,
                        flow_body(&src, &dst, None),
                    );
                }
            }
            if var_is_ptr && value_var.map(|v| !live.contains(&v.to_string())).unwrap_or(false) {
                let v = value_var.unwrap();
                let src = self.prob.templates[leaf.env.ptrs[v]].clone();
                let vt = self.prob.templates[var_join.unwrap()].clone();
                self.prob.push_constraint(
                    format!("join {var}: flow from leaf"),
                    &guard,
                    flow_body(&src, &vt, None),
                );
            }
        }
        env.ptrs = join_ids;
        if let Some(id) = var_join {
            env.ptrs.insert(var.to_string(), id);
        }
        self.walk(body, env)
    }
}

/// Instantiates a callee signature template at a call site, substituting the
/// formals by the actuals' linear terms.
fn instantiate_template(t: &OwnTemplate, sigma: &BTreeMap<String, LinTerm>) -> OwnTemplate {
    let mut lo = t.lo.clone();
    let mut hi = t.hi.clone();
    for (formal, term) in sigma {
        lo = lo.subst_universal(formal, term);
        hi = hi.subst_universal(formal, term);
    }
    OwnTemplate {
        id: t.id,
        scope: t.scope.clone(),
        lo,
        hi,
        own_sym: t.own_sym.clone(),
        label: format!("{} (instantiated)", t.label),
    }
}
