//! AST traversal that raises the four detection flags and collects the
//! tensor-operation census with estimated element counts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ast::{Ast, BinOpKind, Node, NodeKind};
use super::DetectionFlags;

/// Tunables for the traversal. Framework and operation lists default to the
/// deep-learning stacks the classifier targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    /// Root module names whose import raises `dl_import`.
    pub framework_roots: BTreeSet<String>,
    /// Call names (last attribute component) treated as tensor operations.
    pub tensor_ops: BTreeSet<String>,
    /// Constructor call names whose integer-literal arguments define a shape.
    pub shape_constructors: BTreeSet<String>,
    /// Element count at or above which an operation counts as big.
    pub big_op_threshold: u64,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        let strs = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        AnalyzerConfig {
            framework_roots: strs(&["torch", "tensorflow"]),
            tensor_ops: strs(&[
                "matmul", "mm", "bmm", "conv1d", "conv2d", "conv3d", "einsum",
            ]),
            shape_constructors: strs(&["rand", "randn", "zeros", "ones", "empty"]),
            big_op_threshold: 1_000_000,
        }
    }
}

/// One observed tensor operation. `elements` is `None` when operand shapes
/// could not be resolved statically; unknown counts as small, never big.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusEntry {
    pub op: String,
    pub elements: Option<u64>,
    pub line: u32,
}

/// Known shape bindings within one scope: name -> dims. A name assigned more
/// than once, or introduced as a function parameter, maps to `None` (shape
/// unknown) so the analysis never over-claims.
pub type Bindings = BTreeMap<String, Option<Vec<u64>>>;

struct Scanner<'a> {
    cfg: &'a AnalyzerConfig,
    flags: DetectionFlags,
    census: Vec<CensusEntry>,
}

/// Walk the tree and compute detection flags plus the operation census.
pub fn scan_flags(ast: &Ast, cfg: &AnalyzerConfig) -> (DetectionFlags, Vec<CensusEntry>) {
    let mut scanner = Scanner {
        cfg,
        flags: DetectionFlags::default(),
        census: Vec::new(),
    };
    scanner.collect_imports(&ast.body);
    let module_bindings = collect_bindings(&ast.body, &[], cfg);
    scanner.walk_block(&ast.body, &module_bindings, false);
    (scanner.flags, scanner.census)
}

/// Estimate the element count of a recognized tensor operation or shape
/// constructor, resolving operand shapes through the given bindings.
/// Returns `None` ("unknown") when any operand is unresolvable.
pub fn estimate_tensor_elements(call: &Node, bindings: &Bindings) -> Option<u64> {
    estimate_call(call, bindings, &AnalyzerConfig::default())
}

fn product(dims: &[u64]) -> Option<u64> {
    dims.iter().try_fold(1u64, |acc, d| acc.checked_mul(*d))
}

/// Shape of a constructor call with all-integer-literal dimensions.
fn literal_constructor_shape(node: &Node, cfg: &AnalyzerConfig) -> Option<Vec<u64>> {
    let NodeKind::Call { func, args, kwargs } = &node.kind else {
        return None;
    };
    let path = func.attribute_path()?;
    let last = *path.last()?;
    if !cfg.shape_constructors.contains(last) || !kwargs.is_empty() || args.is_empty() {
        return None;
    }
    let mut dims = Vec::with_capacity(args.len());
    for arg in args {
        match &arg.kind {
            NodeKind::IntLit { value } => dims.push(*value),
            _ => return None,
        }
    }
    Some(dims)
}

fn collect_bindings(block: &[Node], params: &[String], cfg: &AnalyzerConfig) -> Bindings {
    let mut bindings = Bindings::new();
    for p in params {
        bindings.insert(p.clone(), None);
    }
    for stmt in block {
        if let NodeKind::Assign { target, value } = &stmt.kind {
            if let NodeKind::Name { id } = &target.kind {
                let shape = literal_constructor_shape(value, cfg);
                match bindings.get(id) {
                    // Second assignment: single-assignment dataflow gives up.
                    Some(_) => {
                        bindings.insert(id.clone(), None);
                    }
                    None => {
                        bindings.insert(id.clone(), shape);
                    }
                }
            }
        }
    }
    bindings
}

fn resolve_operand(node: &Node, bindings: &Bindings, cfg: &AnalyzerConfig) -> Option<u64> {
    match &node.kind {
        NodeKind::Name { id } => product(bindings.get(id)?.as_ref()?),
        NodeKind::Call { .. } => product(&literal_constructor_shape(node, cfg)?),
        _ => None,
    }
}

fn estimate_call(call: &Node, bindings: &Bindings, cfg: &AnalyzerConfig) -> Option<u64> {
    let NodeKind::Call { func, args, .. } = &call.kind else {
        return None;
    };
    // A bare shape constructor estimates to its own element count.
    if let Some(dims) = literal_constructor_shape(call, cfg) {
        return product(&dims);
    }
    let mut operands: Vec<&Node> = Vec::new();
    // A method receiver is an operand only when its root name is bound in
    // the current scope: `a.matmul(b)` contributes `a`, while module paths
    // like `torch.matmul(a, b)` or `torch.linalg.matmul(a, b)` do not.
    if let NodeKind::Attribute { value, .. } = &func.kind {
        let root_bound = value
            .attribute_path()
            .and_then(|p| p.first().map(|r| bindings.contains_key(*r)))
            .unwrap_or(true);
        if root_bound {
            operands.push(value);
        }
    }
    for arg in args {
        match &arg.kind {
            // Literal scalars and einsum subscript strings are not tensors.
            NodeKind::IntLit { .. } | NodeKind::FloatLit { .. } | NodeKind::StrLit { .. } => {}
            _ => operands.push(arg),
        }
    }
    if operands.is_empty() {
        return None;
    }
    let mut best: u64 = 0;
    for op in operands {
        best = best.max(resolve_operand(op, bindings, cfg)?);
    }
    Some(best)
}

impl Scanner<'_> {
    fn collect_imports(&mut self, block: &[Node]) {
        for stmt in block {
            match &stmt.kind {
                NodeKind::Import { module, .. } | NodeKind::FromImport { module, .. } => {
                    if self.cfg.framework_roots.contains(&module[0]) {
                        self.flags.dl_import = true;
                    }
                }
                NodeKind::FunctionDef { body, .. } => self.collect_imports(body),
                _ => {}
            }
        }
    }

    fn walk_block(&mut self, block: &[Node], bindings: &Bindings, guarded: bool) {
        for stmt in block {
            self.walk_stmt(stmt, bindings, guarded);
        }
    }

    fn walk_stmt(&mut self, stmt: &Node, bindings: &Bindings, guarded: bool) {
        match &stmt.kind {
            NodeKind::FunctionDef { params, body, .. } => {
                let local = collect_bindings(body, params, self.cfg);
                self.walk_block(body, &local, guarded);
            }
            NodeKind::If { test, body, orelse } => {
                self.walk_expr(test, bindings, guarded);
                let body_guarded = guarded || condition_checks_cuda_availability(test);
                self.walk_block(body, bindings, body_guarded);
                self.walk_block(orelse, bindings, guarded);
            }
            NodeKind::For { iter, body, .. } => {
                self.walk_expr(iter, bindings, guarded);
                self.walk_block(body, bindings, guarded);
            }
            NodeKind::Assign { target, value } => {
                self.walk_expr(target, bindings, guarded);
                self.walk_expr(value, bindings, guarded);
            }
            NodeKind::Return { value: Some(v) } => self.walk_expr(v, bindings, guarded),
            NodeKind::ExprStmt { expr } => self.walk_expr(expr, bindings, guarded),
            _ => {}
        }
    }

    fn walk_expr(&mut self, expr: &Node, bindings: &Bindings, guarded: bool) {
        match &expr.kind {
            NodeKind::Call { func, args, kwargs } => {
                self.inspect_call(expr, bindings, guarded);
                self.walk_expr(func, bindings, guarded);
                for a in args {
                    self.walk_expr(a, bindings, guarded);
                }
                for (_, v) in kwargs {
                    self.walk_expr(v, bindings, guarded);
                }
            }
            NodeKind::BinOp { op, left, right } => {
                if *op == BinOpKind::MatMul {
                    self.inspect_matmul_operator(expr, left, right, bindings);
                }
                self.walk_expr(left, bindings, guarded);
                self.walk_expr(right, bindings, guarded);
            }
            NodeKind::UnaryOp { operand, .. } => self.walk_expr(operand, bindings, guarded),
            NodeKind::Attribute { value, .. } => self.walk_expr(value, bindings, guarded),
            NodeKind::Tuple { elts } => {
                for e in elts {
                    self.walk_expr(e, bindings, guarded);
                }
            }
            _ => {}
        }
    }

    fn inspect_call(&mut self, call: &Node, bindings: &Bindings, guarded: bool) {
        let NodeKind::Call { func, args, kwargs } = &call.kind else {
            return;
        };
        let last = match &func.kind {
            NodeKind::Attribute { attr, .. } => attr.as_str(),
            NodeKind::Name { id } => id.as_str(),
            _ => return,
        };

        if !guarded && is_explicit_gpu_call(last, args, kwargs) {
            self.flags.gpu_explicit = true;
        }

        if self.cfg.tensor_ops.contains(last) {
            let elements = estimate_call(call, bindings, self.cfg);
            self.record_census(last.to_string(), elements, call.line);
        }
    }

    fn inspect_matmul_operator(
        &mut self,
        expr: &Node,
        left: &Node,
        right: &Node,
        bindings: &Bindings,
    ) {
        // `@` counts only when at least one side is a name bound to a shape
        // constructor; plain numeric code stays unclassified.
        let known = |n: &Node| match &n.kind {
            NodeKind::Name { id } => matches!(bindings.get(id), Some(Some(_))),
            _ => false,
        };
        if !known(left) && !known(right) {
            return;
        }
        let elements = match (
            resolve_operand(left, bindings, self.cfg),
            resolve_operand(right, bindings, self.cfg),
        ) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        self.record_census("@".to_string(), elements, expr.line);
    }

    fn record_census(&mut self, op: String, elements: Option<u64>, line: u32) {
        match elements {
            Some(n) if n >= self.cfg.big_op_threshold => self.flags.big_ops = true,
            _ => self.flags.small_ops = true,
        }
        self.census.push(CensusEntry { op, elements, line });
    }
}

/// `"cuda"` or `"cuda:<n>"`.
fn is_cuda_string(s: &str) -> bool {
    s == "cuda"
        || s.strip_prefix("cuda:")
            .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
}

fn any_cuda_string_arg(args: &[Node], kwargs: &[(String, Node)]) -> bool {
    let is_cuda = |n: &Node| matches!(&n.kind, NodeKind::StrLit { value } if is_cuda_string(value));
    args.iter().any(is_cuda) || kwargs.iter().any(|(_, v)| is_cuda(v))
}

fn is_explicit_gpu_call(callee: &str, args: &[Node], kwargs: &[(String, Node)]) -> bool {
    match callee {
        "to" | "device" => any_cuda_string_arg(args, kwargs),
        "cuda" => true,
        _ => false,
    }
}

/// True when the condition contains an attribute path ending in
/// `cuda.is_available` — the lexical guard that suppresses `gpu_explicit`.
fn condition_checks_cuda_availability(test: &Node) -> bool {
    fn contains(node: &Node) -> bool {
        if let Some(path) = node.attribute_path() {
            if path.len() >= 2 && path[path.len() - 2..] == ["cuda", "is_available"] {
                return true;
            }
        }
        match &node.kind {
            NodeKind::Call { func, args, kwargs } => {
                contains(func)
                    || args.iter().any(contains)
                    || kwargs.iter().any(|(_, v)| contains(v))
            }
            NodeKind::Attribute { value, .. } => contains(value),
            NodeKind::BinOp { left, right, .. } => contains(left) || contains(right),
            NodeKind::UnaryOp { operand, .. } => contains(operand),
            NodeKind::Tuple { elts } => elts.iter().any(contains),
            _ => false,
        }
    }
    contains(test)
}
