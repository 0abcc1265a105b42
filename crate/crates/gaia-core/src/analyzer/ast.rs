//! Minimal Python-syntax parser for the execution-mode analyzer.
//!
//! Covers the subset the classifier needs: module-level imports, function
//! definitions, assignments, attribute access, calls with literal string or
//! integer arguments, if-statements, for-loops, and binary operators.
//! Constructs outside the subset become [`NodeKind::Unsupported`] nodes that
//! traversal skips; only malformed input is a hard [`SyntaxError`].

use std::fmt;

use thiserror::Error;

/// Hard parse failure with source position.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("syntax error at line {line}, column {col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

/// A construct the subset does not cover. Recorded as a warning and as an
/// `Unsupported` node; never fatal unless the caller opted into strict mode.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("unsupported construct `{construct}` at line {line}")]
pub struct UnsupportedConstruct {
    pub construct: String,
    pub line: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOpKind {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
    MatMul,
    Eq,
    NotEq,
    Lt,
    Gt,
    LtEq,
    GtEq,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOpKind {
    Neg,
    Not,
}

/// One AST node; `line`/`col` point at the token that started it.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Import {
        module: Vec<String>,
        alias: Option<String>,
    },
    FromImport {
        module: Vec<String>,
        names: Vec<(String, Option<String>)>,
    },
    FunctionDef {
        name: String,
        params: Vec<String>,
        body: Vec<Node>,
    },
    Assign {
        target: Box<Node>,
        value: Box<Node>,
    },
    Return {
        value: Option<Box<Node>>,
    },
    ExprStmt {
        expr: Box<Node>,
    },
    If {
        test: Box<Node>,
        body: Vec<Node>,
        orelse: Vec<Node>,
    },
    For {
        target: Box<Node>,
        iter: Box<Node>,
        body: Vec<Node>,
    },
    Pass,
    /// Statement or expression outside the subset; traversal skips it.
    Unsupported {
        construct: String,
    },

    Name {
        id: String,
    },
    IntLit {
        value: u64,
    },
    FloatLit {
        value: f64,
    },
    StrLit {
        value: String,
    },
    Attribute {
        value: Box<Node>,
        attr: String,
    },
    Call {
        func: Box<Node>,
        args: Vec<Node>,
        kwargs: Vec<(String, Node)>,
    },
    BinOp {
        op: BinOpKind,
        left: Box<Node>,
        right: Box<Node>,
    },
    UnaryOp {
        op: UnaryOpKind,
        operand: Box<Node>,
    },
    Tuple {
        elts: Vec<Node>,
    },
}

impl Node {
    fn new(kind: NodeKind, line: u32, col: u32) -> Self {
        Node { kind, line, col }
    }

    /// Dotted attribute path if this expression is a plain `a.b.c` chain or a
    /// bare name; `None` for anything more complex.
    pub fn attribute_path(&self) -> Option<Vec<&str>> {
        match &self.kind {
            NodeKind::Name { id } => Some(vec![id.as_str()]),
            NodeKind::Attribute { value, attr } => {
                let mut path = value.attribute_path()?;
                path.push(attr.as_str());
                Some(path)
            }
            _ => None,
        }
    }
}

/// Parse result: module body plus any unsupported-construct warnings.
#[derive(Debug, Clone)]
pub struct Ast {
    pub body: Vec<Node>,
    pub warnings: Vec<UnsupportedConstruct>,
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<module: {} stmts>", self.body.len())
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Int(u64),
    Float(f64),
    Str(String),
    Newline,
    Indent,
    Dedent,
    LParen,
    RParen,
    Comma,
    Colon,
    Dot,
    Assign,
    Plus,
    Minus,
    Star,
    DoubleStar,
    Slash,
    DoubleSlash,
    Percent,
    At,
    EqEq,
    NotEq,
    Lt,
    Gt,
    LtEq,
    GtEq,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Arrow,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(source: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let mut out = Vec::new();
    let mut indents: Vec<usize> = vec![0];
    let mut paren_depth: usize = 0;

    for (line_idx, raw_line) in source.lines().enumerate() {
        let line_no = (line_idx + 1) as u32;
        let bytes: Vec<char> = raw_line.chars().collect();

        // Indentation only matters outside brackets.
        let mut i = 0;
        let mut indent = 0usize;
        while i < bytes.len() {
            match bytes[i] {
                ' ' => indent += 1,
                '\t' => indent += 8 - (indent % 8),
                _ => break,
            }
            i += 1;
        }
        // Blank or comment-only lines never affect indentation.
        let rest: String = bytes[i..].iter().collect();
        if paren_depth == 0 && (rest.is_empty() || rest.trim_start().starts_with('#')) {
            continue;
        }
        if paren_depth == 0 {
            let current = *indents.last().unwrap();
            if indent > current {
                indents.push(indent);
                out.push(Spanned {
                    tok: Tok::Indent,
                    line: line_no,
                    col: 1,
                });
            } else if indent < current {
                while indent < *indents.last().unwrap() {
                    indents.pop();
                    out.push(Spanned {
                        tok: Tok::Dedent,
                        line: line_no,
                        col: 1,
                    });
                }
                if indent != *indents.last().unwrap() {
                    return Err(SyntaxError {
                        line: line_no,
                        col: 1,
                        message: "unindent does not match any outer level".into(),
                    });
                }
            }
        }

        while i < bytes.len() {
            let c = bytes[i];
            let col = (i + 1) as u32;
            match c {
                ' ' | '\t' => {
                    i += 1;
                }
                '#' => break,
                '\'' | '"' => {
                    let quote = c;
                    let mut value = String::new();
                    let mut j = i + 1;
                    let mut closed = false;
                    while j < bytes.len() {
                        let cj = bytes[j];
                        if cj == '\\' && j + 1 < bytes.len() {
                            let esc = bytes[j + 1];
                            value.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                            j += 2;
                        } else if cj == quote {
                            closed = true;
                            j += 1;
                            break;
                        } else {
                            value.push(cj);
                            j += 1;
                        }
                    }
                    if !closed {
                        return Err(SyntaxError {
                            line: line_no,
                            col,
                            message: "unterminated string literal".into(),
                        });
                    }
                    out.push(Spanned {
                        tok: Tok::Str(value),
                        line: line_no,
                        col,
                    });
                    i = j;
                }
                '0'..='9' => {
                    let mut j = i;
                    let mut text = String::new();
                    let mut is_float = false;
                    while j < bytes.len() {
                        let cj = bytes[j];
                        if cj.is_ascii_digit() || cj == '_' {
                            if cj != '_' {
                                text.push(cj);
                            }
                            j += 1;
                        } else if cj == '.'
                            && !is_float
                            && bytes.get(j + 1).is_some_and(|d| d.is_ascii_digit())
                        {
                            is_float = true;
                            text.push('.');
                            j += 1;
                        } else {
                            break;
                        }
                    }
                    let tok = if is_float {
                        Tok::Float(text.parse().map_err(|_| SyntaxError {
                            line: line_no,
                            col,
                            message: format!("invalid float literal `{text}`"),
                        })?)
                    } else {
                        Tok::Int(text.parse().map_err(|_| SyntaxError {
                            line: line_no,
                            col,
                            message: format!("integer literal out of range `{text}`"),
                        })?)
                    };
                    out.push(Spanned {
                        tok,
                        line: line_no,
                        col,
                    });
                    i = j;
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut j = i;
                    let mut text = String::new();
                    while j < bytes.len() && (bytes[j].is_alphanumeric() || bytes[j] == '_') {
                        text.push(bytes[j]);
                        j += 1;
                    }
                    out.push(Spanned {
                        tok: Tok::Name(text),
                        line: line_no,
                        col,
                    });
                    i = j;
                }
                '(' => {
                    paren_depth += 1;
                    out.push(Spanned {
                        tok: Tok::LParen,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                ')' => {
                    paren_depth = paren_depth.saturating_sub(1);
                    out.push(Spanned {
                        tok: Tok::RParen,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                '[' => {
                    paren_depth += 1;
                    out.push(Spanned {
                        tok: Tok::LBracket,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                ']' => {
                    paren_depth = paren_depth.saturating_sub(1);
                    out.push(Spanned {
                        tok: Tok::RBracket,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                '{' => {
                    paren_depth += 1;
                    out.push(Spanned {
                        tok: Tok::LBrace,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                '}' => {
                    paren_depth = paren_depth.saturating_sub(1);
                    out.push(Spanned {
                        tok: Tok::RBrace,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                ',' => {
                    out.push(Spanned {
                        tok: Tok::Comma,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                ':' => {
                    out.push(Spanned {
                        tok: Tok::Colon,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                '.' => {
                    out.push(Spanned {
                        tok: Tok::Dot,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                '=' => {
                    if bytes.get(i + 1) == Some(&'=') {
                        out.push(Spanned {
                            tok: Tok::EqEq,
                            line: line_no,
                            col,
                        });
                        i += 2;
                    } else {
                        out.push(Spanned {
                            tok: Tok::Assign,
                            line: line_no,
                            col,
                        });
                        i += 1;
                    }
                }
                '!' => {
                    if bytes.get(i + 1) == Some(&'=') {
                        out.push(Spanned {
                            tok: Tok::NotEq,
                            line: line_no,
                            col,
                        });
                        i += 2;
                    } else {
                        return Err(SyntaxError {
                            line: line_no,
                            col,
                            message: "unexpected character `!`".into(),
                        });
                    }
                }
                '<' => {
                    if bytes.get(i + 1) == Some(&'=') {
                        out.push(Spanned {
                            tok: Tok::LtEq,
                            line: line_no,
                            col,
                        });
                        i += 2;
                    } else {
                        out.push(Spanned {
                            tok: Tok::Lt,
                            line: line_no,
                            col,
                        });
                        i += 1;
                    }
                }
                '>' => {
                    if bytes.get(i + 1) == Some(&'=') {
                        out.push(Spanned {
                            tok: Tok::GtEq,
                            line: line_no,
                            col,
                        });
                        i += 2;
                    } else {
                        out.push(Spanned {
                            tok: Tok::Gt,
                            line: line_no,
                            col,
                        });
                        i += 1;
                    }
                }
                '+' => {
                    out.push(Spanned {
                        tok: Tok::Plus,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                '-' => {
                    if bytes.get(i + 1) == Some(&'>') {
                        out.push(Spanned {
                            tok: Tok::Arrow,
                            line: line_no,
                            col,
                        });
                        i += 2;
                    } else {
                        out.push(Spanned {
                            tok: Tok::Minus,
                            line: line_no,
                            col,
                        });
                        i += 1;
                    }
                }
                '*' => {
                    if bytes.get(i + 1) == Some(&'*') {
                        out.push(Spanned {
                            tok: Tok::DoubleStar,
                            line: line_no,
                            col,
                        });
                        i += 2;
                    } else {
                        out.push(Spanned {
                            tok: Tok::Star,
                            line: line_no,
                            col,
                        });
                        i += 1;
                    }
                }
                '/' => {
                    if bytes.get(i + 1) == Some(&'/') {
                        out.push(Spanned {
                            tok: Tok::DoubleSlash,
                            line: line_no,
                            col,
                        });
                        i += 2;
                    } else {
                        out.push(Spanned {
                            tok: Tok::Slash,
                            line: line_no,
                            col,
                        });
                        i += 1;
                    }
                }
                '%' => {
                    out.push(Spanned {
                        tok: Tok::Percent,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                '@' => {
                    out.push(Spanned {
                        tok: Tok::At,
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                other => {
                    return Err(SyntaxError {
                        line: line_no,
                        col,
                        message: format!("unexpected character `{other}`"),
                    });
                }
            }
        }

        if paren_depth == 0 {
            let col = (bytes.len() + 1) as u32;
            out.push(Spanned {
                tok: Tok::Newline,
                line: line_no,
                col,
            });
        }
    }

    let last_line = source.lines().count().max(1) as u32;
    while indents.len() > 1 {
        indents.pop();
        out.push(Spanned {
            tok: Tok::Dedent,
            line: last_line,
            col: 1,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line: last_line,
        col: 1,
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// Internal parse issue: either fatal, or a skippable unsupported construct.
enum Issue {
    Fatal(SyntaxError),
    Skip(UnsupportedConstruct),
}

impl From<SyntaxError> for Issue {
    fn from(e: SyntaxError) -> Self {
        Issue::Fatal(e)
    }
}

/// Statement keywords we recognize but do not model.
const UNSUPPORTED_STMTS: &[&str] = &[
    "while", "class", "with", "try", "raise", "lambda", "yield", "global", "nonlocal", "del",
    "assert", "async", "await", "match",
];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    warnings: Vec<UnsupportedConstruct>,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek2(&self) -> &Spanned {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Spanned {
        let sp = self.toks[self.pos.min(self.toks.len() - 1)].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        sp
    }

    fn err(&self, message: impl Into<String>) -> SyntaxError {
        let sp = self.peek();
        SyntaxError {
            line: sp.line,
            col: sp.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Spanned, SyntaxError> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn eat_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.bump();
        }
    }

    /// Skip the rest of the current logical line and, if it opened a suite,
    /// the whole indented block. Used to recover from unsupported statements.
    fn skip_statement(&mut self) {
        let mut saw_colon = false;
        loop {
            match &self.peek().tok {
                Tok::Newline => {
                    self.bump();
                    break;
                }
                Tok::Eof | Tok::Dedent => return,
                Tok::Colon => {
                    saw_colon = true;
                    self.bump();
                }
                _ => {
                    self.bump();
                }
            }
        }
        if saw_colon && self.peek().tok == Tok::Indent {
            self.bump();
            let mut depth = 1usize;
            loop {
                match &self.peek().tok {
                    Tok::Indent => {
                        depth += 1;
                        self.bump();
                    }
                    Tok::Dedent => {
                        depth -= 1;
                        self.bump();
                        if depth == 0 {
                            break;
                        }
                    }
                    Tok::Eof => break,
                    _ => {
                        self.bump();
                    }
                }
            }
        }
    }

    fn parse_module(&mut self) -> Result<Vec<Node>, SyntaxError> {
        let mut body = Vec::new();
        loop {
            self.eat_newlines();
            if self.peek().tok == Tok::Eof {
                return Ok(body);
            }
            if self.peek().tok == Tok::Dedent {
                // Stray dedent at module level cannot happen with a correct
                // lexer; consume defensively.
                self.bump();
                continue;
            }
            body.push(self.parse_statement_recovering()?);
        }
    }

    fn parse_statement_recovering(&mut self) -> Result<Node, SyntaxError> {
        let sp = self.peek().clone();
        match self.parse_statement() {
            Ok(node) => Ok(node),
            Err(Issue::Fatal(e)) => Err(e),
            Err(Issue::Skip(w)) => {
                self.skip_statement();
                self.warnings.push(w.clone());
                Ok(Node::new(
                    NodeKind::Unsupported {
                        construct: w.construct,
                    },
                    sp.line,
                    sp.col,
                ))
            }
        }
    }

    fn parse_statement(&mut self) -> Result<Node, Issue> {
        let sp = self.peek().clone();
        match &sp.tok {
            Tok::Name(name) => match name.as_str() {
                "import" => Ok(self.parse_import()?),
                "from" => Ok(self.parse_from_import()?),
                "def" => Ok(self.parse_def()?),
                "return" => Ok(self.parse_return()?),
                "if" => Ok(self.parse_if()?),
                "for" => Ok(self.parse_for()?),
                "pass" => {
                    self.bump();
                    self.end_of_statement()?;
                    Ok(Node::new(NodeKind::Pass, sp.line, sp.col))
                }
                kw if UNSUPPORTED_STMTS.contains(&kw) => Err(Issue::Skip(UnsupportedConstruct {
                    construct: kw.to_string(),
                    line: sp.line,
                })),
                _ => self.parse_expr_or_assign(),
            },
            // A line starting with `@` is a decorator, not the matmul operator.
            Tok::At => Err(Issue::Skip(UnsupportedConstruct {
                construct: "decorator".into(),
                line: sp.line,
            })),
            _ => self.parse_expr_or_assign(),
        }
    }

    fn end_of_statement(&mut self) -> Result<(), SyntaxError> {
        match self.peek().tok {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Eof | Tok::Dedent => Ok(()),
            _ => Err(self.err("expected end of statement")),
        }
    }

    fn parse_dotted_name(&mut self) -> Result<Vec<String>, SyntaxError> {
        let mut parts = Vec::new();
        loop {
            match self.bump() {
                Spanned {
                    tok: Tok::Name(n), ..
                } => parts.push(n),
                _ => return Err(self.err("expected module name")),
            }
            if self.peek().tok == Tok::Dot {
                self.bump();
            } else {
                return Ok(parts);
            }
        }
    }

    fn parse_import(&mut self) -> Result<Node, SyntaxError> {
        let sp = self.bump(); // import
        let module = self.parse_dotted_name()?;
        let alias = if matches!(&self.peek().tok, Tok::Name(n) if n == "as") {
            self.bump();
            match self.bump() {
                Spanned {
                    tok: Tok::Name(n), ..
                } => Some(n),
                _ => return Err(self.err("expected alias name after `as`")),
            }
        } else {
            None
        };
        self.end_of_statement()?;
        Ok(Node::new(
            NodeKind::Import { module, alias },
            sp.line,
            sp.col,
        ))
    }

    fn parse_from_import(&mut self) -> Result<Node, SyntaxError> {
        let sp = self.bump(); // from
        let module = self.parse_dotted_name()?;
        match self.bump() {
            Spanned {
                tok: Tok::Name(n), ..
            } if n == "import" => {}
            _ => return Err(self.err("expected `import` in from-import")),
        }
        let mut names = Vec::new();
        loop {
            let name = match self.bump() {
                Spanned {
                    tok: Tok::Name(n), ..
                } => n,
                Spanned { tok: Tok::Star, .. } => "*".to_string(),
                _ => return Err(self.err("expected imported name")),
            };
            let alias = if matches!(&self.peek().tok, Tok::Name(n) if n == "as") {
                self.bump();
                match self.bump() {
                    Spanned {
                        tok: Tok::Name(n), ..
                    } => Some(n),
                    _ => return Err(self.err("expected alias name after `as`")),
                }
            } else {
                None
            };
            names.push((name, alias));
            if self.peek().tok == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.end_of_statement()?;
        Ok(Node::new(
            NodeKind::FromImport { module, names },
            sp.line,
            sp.col,
        ))
    }

    fn parse_def(&mut self) -> Result<Node, Issue> {
        let sp = self.bump(); // def
        let name = match self.bump() {
            Spanned {
                tok: Tok::Name(n), ..
            } => n,
            _ => return Err(self.err("expected function name after `def`").into()),
        };
        self.expect(Tok::LParen, "`(` after function name")?;
        let mut params = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                match self.bump() {
                    Spanned {
                        tok: Tok::Name(n), ..
                    } => params.push(n),
                    _ => return Err(self.err("expected parameter name").into()),
                }
                // Default values and annotations are outside the subset but
                // harmless; consume the default expression if present.
                if self.peek().tok == Tok::Assign {
                    self.bump();
                    let _ = self.parse_expr()?;
                }
                if self.peek().tok == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)` after parameters")?;
        if self.peek().tok == Tok::Arrow {
            // Return annotation: consume the annotation expression.
            self.bump();
            let _ = self.parse_expr()?;
        }
        self.expect(Tok::Colon, "`:` after function header")?;
        let body = self.parse_suite()?;
        Ok(Node::new(
            NodeKind::FunctionDef { name, params, body },
            sp.line,
            sp.col,
        ))
    }

    fn parse_suite(&mut self) -> Result<Vec<Node>, Issue> {
        // Single-line suite: `if x: y = 1`
        if self.peek().tok != Tok::Newline {
            let stmt = self.parse_statement()?;
            return Ok(vec![stmt]);
        }
        self.expect(Tok::Newline, "newline before indented block")?;
        self.eat_newlines();
        if self.peek().tok != Tok::Indent {
            return Err(self.err("expected an indented block").into());
        }
        self.bump();
        let mut body = Vec::new();
        loop {
            self.eat_newlines();
            match self.peek().tok {
                Tok::Dedent => {
                    self.bump();
                    return Ok(body);
                }
                Tok::Eof => return Ok(body),
                _ => body.push(self.parse_statement_recovering().map_err(Issue::Fatal)?),
            }
        }
    }

    fn parse_return(&mut self) -> Result<Node, Issue> {
        let sp = self.bump(); // return
        let value = match self.peek().tok {
            Tok::Newline | Tok::Eof | Tok::Dedent => None,
            _ => Some(Box::new(self.parse_expr_tuple()?)),
        };
        self.end_of_statement()?;
        Ok(Node::new(NodeKind::Return { value }, sp.line, sp.col))
    }

    fn parse_if(&mut self) -> Result<Node, Issue> {
        let sp = self.bump(); // if / elif
        let test = Box::new(self.parse_expr()?);
        self.expect(Tok::Colon, "`:` after condition")?;
        let body = self.parse_suite()?;
        self.eat_newlines();
        let orelse = match &self.peek().tok {
            Tok::Name(n) if n == "elif" => {
                vec![self.parse_if()?]
            }
            Tok::Name(n) if n == "else" => {
                self.bump();
                self.expect(Tok::Colon, "`:` after else")?;
                self.parse_suite()?
            }
            _ => Vec::new(),
        };
        Ok(Node::new(
            NodeKind::If { test, body, orelse },
            sp.line,
            sp.col,
        ))
    }

    fn parse_for(&mut self) -> Result<Node, Issue> {
        let sp = self.bump(); // for
        let target = match self.bump() {
            Spanned {
                tok: Tok::Name(n),
                line,
                col,
            } => Node::new(NodeKind::Name { id: n }, line, col),
            _ => return Err(self.err("expected loop variable").into()),
        };
        match self.bump() {
            Spanned {
                tok: Tok::Name(n), ..
            } if n == "in" => {}
            _ => return Err(self.err("expected `in` in for-loop").into()),
        }
        let iter = Box::new(self.parse_expr()?);
        self.expect(Tok::Colon, "`:` after for header")?;
        let body = self.parse_suite()?;
        Ok(Node::new(
            NodeKind::For {
                target: Box::new(target),
                iter,
                body,
            },
            sp.line,
            sp.col,
        ))
    }

    fn parse_expr_or_assign(&mut self) -> Result<Node, Issue> {
        let sp = self.peek().clone();
        let first = self.parse_expr_tuple()?;
        if self.peek().tok == Tok::Assign {
            self.bump();
            let value = self.parse_expr_tuple()?;
            self.end_of_statement()?;
            return Ok(Node::new(
                NodeKind::Assign {
                    target: Box::new(first),
                    value: Box::new(value),
                },
                sp.line,
                sp.col,
            ));
        }
        self.end_of_statement()?;
        Ok(Node::new(
            NodeKind::ExprStmt {
                expr: Box::new(first),
            },
            sp.line,
            sp.col,
        ))
    }

    /// Comma-separated expression list folded into a tuple node.
    fn parse_expr_tuple(&mut self) -> Result<Node, Issue> {
        let sp = self.peek().clone();
        let first = self.parse_expr()?;
        if self.peek().tok != Tok::Comma {
            return Ok(first);
        }
        let mut elts = vec![first];
        while self.peek().tok == Tok::Comma {
            self.bump();
            match self.peek().tok {
                Tok::Newline | Tok::Eof | Tok::RParen | Tok::Assign => break,
                _ => elts.push(self.parse_expr()?),
            }
        }
        Ok(Node::new(NodeKind::Tuple { elts }, sp.line, sp.col))
    }

    fn parse_expr(&mut self) -> Result<Node, Issue> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<Node, Issue> {
        let mut left = self.parse_and()?;
        while matches!(&self.peek().tok, Tok::Name(n) if n == "or") {
            let sp = self.bump();
            let right = self.parse_and()?;
            left = Node::new(
                NodeKind::BinOp {
                    op: BinOpKind::Or,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                sp.line,
                sp.col,
            );
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<Node, Issue> {
        let mut left = self.parse_not()?;
        while matches!(&self.peek().tok, Tok::Name(n) if n == "and") {
            let sp = self.bump();
            let right = self.parse_not()?;
            left = Node::new(
                NodeKind::BinOp {
                    op: BinOpKind::And,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                sp.line,
                sp.col,
            );
        }
        Ok(left)
    }

    fn parse_not(&mut self) -> Result<Node, Issue> {
        if matches!(&self.peek().tok, Tok::Name(n) if n == "not") {
            let sp = self.bump();
            let operand = self.parse_not()?;
            return Ok(Node::new(
                NodeKind::UnaryOp {
                    op: UnaryOpKind::Not,
                    operand: Box::new(operand),
                },
                sp.line,
                sp.col,
            ));
        }
        self.parse_comparison()
    }

    fn parse_comparison(&mut self) -> Result<Node, Issue> {
        let mut left = self.parse_additive()?;
        loop {
            let op = match &self.peek().tok {
                Tok::EqEq => BinOpKind::Eq,
                Tok::NotEq => BinOpKind::NotEq,
                Tok::Lt => BinOpKind::Lt,
                Tok::Gt => BinOpKind::Gt,
                Tok::LtEq => BinOpKind::LtEq,
                Tok::GtEq => BinOpKind::GtEq,
                _ => return Ok(left),
            };
            let sp = self.bump();
            let right = self.parse_additive()?;
            left = Node::new(
                NodeKind::BinOp {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                sp.line,
                sp.col,
            );
        }
    }

    fn parse_additive(&mut self) -> Result<Node, Issue> {
        let mut left = self.parse_multiplicative()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Plus => BinOpKind::Add,
                Tok::Minus => BinOpKind::Sub,
                _ => return Ok(left),
            };
            let sp = self.bump();
            let right = self.parse_multiplicative()?;
            left = Node::new(
                NodeKind::BinOp {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                sp.line,
                sp.col,
            );
        }
    }

    fn parse_multiplicative(&mut self) -> Result<Node, Issue> {
        let mut left = self.parse_unary()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Star => BinOpKind::Mul,
                Tok::Slash => BinOpKind::Div,
                Tok::DoubleSlash => BinOpKind::FloorDiv,
                Tok::Percent => BinOpKind::Mod,
                Tok::At => BinOpKind::MatMul,
                _ => return Ok(left),
            };
            let sp = self.bump();
            let right = self.parse_unary()?;
            left = Node::new(
                NodeKind::BinOp {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                sp.line,
                sp.col,
            );
        }
    }

    fn parse_unary(&mut self) -> Result<Node, Issue> {
        if self.peek().tok == Tok::Minus {
            let sp = self.bump();
            let operand = self.parse_unary()?;
            return Ok(Node::new(
                NodeKind::UnaryOp {
                    op: UnaryOpKind::Neg,
                    operand: Box::new(operand),
                },
                sp.line,
                sp.col,
            ));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Node, Issue> {
        let base = self.parse_postfix()?;
        if self.peek().tok == Tok::DoubleStar {
            let sp = self.bump();
            let exp = self.parse_unary()?;
            return Ok(Node::new(
                NodeKind::BinOp {
                    op: BinOpKind::Pow,
                    left: Box::new(base),
                    right: Box::new(exp),
                },
                sp.line,
                sp.col,
            ));
        }
        Ok(base)
    }

    fn parse_postfix(&mut self) -> Result<Node, Issue> {
        let mut node = self.parse_atom()?;
        loop {
            match &self.peek().tok {
                Tok::Dot => {
                    let sp = self.bump();
                    let attr = match self.bump() {
                        Spanned {
                            tok: Tok::Name(n), ..
                        } => n,
                        _ => return Err(self.err("expected attribute name after `.`").into()),
                    };
                    node = Node::new(
                        NodeKind::Attribute {
                            value: Box::new(node),
                            attr,
                        },
                        sp.line,
                        sp.col,
                    );
                }
                Tok::LParen => {
                    let sp = self.bump();
                    let mut args = Vec::new();
                    let mut kwargs = Vec::new();
                    if self.peek().tok != Tok::RParen {
                        loop {
                            // keyword argument: name '=' expr
                            if let (Tok::Name(n), Tok::Assign) =
                                (&self.peek().tok, &self.peek2().tok)
                            {
                                let key = n.clone();
                                self.bump();
                                self.bump();
                                let value = self.parse_expr()?;
                                kwargs.push((key, value));
                            } else {
                                args.push(self.parse_expr()?);
                            }
                            if self.peek().tok == Tok::Comma {
                                self.bump();
                                if self.peek().tok == Tok::RParen {
                                    break;
                                }
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)` to close call")?;
                    node = Node::new(
                        NodeKind::Call {
                            func: Box::new(node),
                            args,
                            kwargs,
                        },
                        sp.line,
                        sp.col,
                    );
                }
                Tok::LBracket => {
                    let sp = self.peek().clone();
                    return Err(Issue::Skip(UnsupportedConstruct {
                        construct: "subscript".into(),
                        line: sp.line,
                    }));
                }
                _ => return Ok(node),
            }
        }
    }

    fn parse_atom(&mut self) -> Result<Node, Issue> {
        let sp = self.peek().clone();
        match &sp.tok {
            Tok::Name(n) => {
                if UNSUPPORTED_STMTS.contains(&n.as_str()) {
                    return Err(Issue::Skip(UnsupportedConstruct {
                        construct: n.clone(),
                        line: sp.line,
                    }));
                }
                let n = n.clone();
                self.bump();
                Ok(Node::new(NodeKind::Name { id: n }, sp.line, sp.col))
            }
            Tok::Int(v) => {
                let v = *v;
                self.bump();
                Ok(Node::new(NodeKind::IntLit { value: v }, sp.line, sp.col))
            }
            Tok::Float(v) => {
                let v = *v;
                self.bump();
                Ok(Node::new(NodeKind::FloatLit { value: v }, sp.line, sp.col))
            }
            Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(Node::new(NodeKind::StrLit { value: s }, sp.line, sp.col))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.parse_expr_tuple()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::LBracket => Err(Issue::Skip(UnsupportedConstruct {
                construct: "list display".into(),
                line: sp.line,
            })),
            Tok::LBrace => Err(Issue::Skip(UnsupportedConstruct {
                construct: "dict display".into(),
                line: sp.line,
            })),
            _ => Err(self.err("expected expression").into()),
        }
    }
}

/// Parse source text into an AST. Unsupported constructs are collected as
/// warnings and left in the tree as skippable nodes; malformed input fails.
pub fn parse(source: &str) -> Result<Ast, SyntaxError> {
    let toks = lex(source)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        warnings: Vec::new(),
    };
    let body = parser.parse_module()?;
    Ok(Ast {
        body,
        warnings: parser.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program_has_import_and_function_nodes() {
        let ast = parse("import torch\ndef f(x):\n    return x\n").unwrap();
        assert_eq!(ast.body.len(), 2);
        assert!(matches!(
            &ast.body[0].kind,
            NodeKind::Import { module, .. } if module == &vec!["torch".to_string()]
        ));
        assert!(matches!(
            &ast.body[1].kind,
            NodeKind::FunctionDef { name, .. } if name == "f"
        ));
        assert!(ast.warnings.is_empty());
    }

    #[test]
    fn malformed_header_is_a_syntax_error_on_line_one() {
        let err = parse("def f(:").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn call_callee_attribute_path_is_recoverable() {
        let ast = parse("import numpy\ndef f(a, b):\n    return numpy.matmul(a, b)\n").unwrap();
        let NodeKind::FunctionDef { body, .. } = &ast.body[1].kind else {
            panic!("expected function")
        };
        let NodeKind::Return { value: Some(expr) } = &body[0].kind else {
            panic!("expected return")
        };
        let NodeKind::Call { func, args, .. } = &expr.kind else {
            panic!("expected call")
        };
        assert_eq!(func.attribute_path().unwrap(), vec!["numpy", "matmul"]);
        assert_eq!(args.len(), 2);
    }

    #[test]
    fn unsupported_statement_becomes_skippable_node() {
        let src = "import torch\nwhile x:\n    y = 1\nz = 2\n";
        let ast = parse(src).unwrap();
        assert_eq!(ast.warnings.len(), 1);
        assert_eq!(ast.warnings[0].construct, "while");
        // the assignment after the skipped block is still parsed
        assert!(matches!(&ast.body[2].kind, NodeKind::Assign { .. }));
    }

    #[test]
    fn keyword_arguments_and_strings_parse() {
        let ast = parse("x.to(device=\"cuda\")\n").unwrap();
        let NodeKind::ExprStmt { expr } = &ast.body[0].kind else {
            panic!()
        };
        let NodeKind::Call { kwargs, .. } = &expr.kind else {
            panic!()
        };
        assert_eq!(kwargs[0].0, "device");
        assert!(matches!(&kwargs[0].1.kind, NodeKind::StrLit { value } if value == "cuda"));
    }

    #[test]
    fn if_elif_else_structure() {
        let src = "if a:\n    x = 1\nelif b:\n    x = 2\nelse:\n    x = 3\n";
        let ast = parse(src).unwrap();
        let NodeKind::If { orelse, .. } = &ast.body[0].kind else {
            panic!()
        };
        assert!(matches!(&orelse[0].kind, NodeKind::If { .. }));
    }

    #[test]
    fn multiline_call_inside_parens() {
        let src = "a = torch.rand(\n    4096,\n    4096,\n)\n";
        let ast = parse(src).unwrap();
        let NodeKind::Assign { value, .. } = &ast.body[0].kind else {
            panic!()
        };
        let NodeKind::Call { args, .. } = &value.kind else {
            panic!()
        };
        assert_eq!(args.len(), 2);
    }

    #[test]
    fn matmul_operator_parses_infix() {
        let ast = parse("c = a @ b\n").unwrap();
        let NodeKind::Assign { value, .. } = &ast.body[0].kind else {
            panic!()
        };
        assert!(matches!(
            &value.kind,
            NodeKind::BinOp {
                op: BinOpKind::MatMul,
                ..
            }
        ));
    }
}
