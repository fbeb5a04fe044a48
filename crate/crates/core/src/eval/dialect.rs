//! A tiny s-expression language used to exercise the harness without a real
//! toolchain.
//!
//! ```text
//! (def (add a b)
//!   ; Return the sum of a and b.
//!   (+ a b))
//! (assert-eq (add 2 3) 5)
//! ```
//!
//! `check` parses and resolves names; `run` checks and then evaluates. Exit
//! codes: 0 success, 1 runtime error or failed assertion, 2 parse error,
//! 3 compile error. The message prefix on stderr tells runtime errors and
//! assertion failures apart.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StubError {
    #[error("parse error: line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("compile error: line {line}: {message}")]
    Compile { line: usize, message: String },
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl StubError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StubError::Parse { .. } => 2,
            StubError::Compile { .. } => 3,
            StubError::Runtime(_) | StubError::Assertion(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Int(i64),
    Str(String),
    Sym(String),
    List(Vec<Node>),
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    kind: Kind,
    line: usize,
}

const SPECIAL: &[&str] = &["def", "let", "set", "if", "while", "begin", "assert", "assert-eq", "and", "or"];
const BUILTINS: &[&str] = &[
    "+", "-", "*", "/", "%", "=", "!=", "<", ">", "<=", ">=", "not", "list", "len", "get", "push", "range", "str",
    "concat", "print", "abs", "min", "max",
];
const CONSTANTS: &[&str] = &["true", "false", "nil"];
const MAX_DEPTH: usize = 1000;
const STACK_BYTES: usize = 64 * 1024 * 1024;

fn parse_err(line: usize, message: impl Into<String>) -> StubError {
    StubError::Parse { line, message: message.into() }
}

fn compile_err(line: usize, message: impl Into<String>) -> StubError {
    StubError::Compile { line, message: message.into() }
}

fn parse(source: &str) -> Result<Vec<Node>, StubError> {
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    let mut line = 1;
    // stack of open lists with their starting line
    let mut stack: Vec<(Vec<Node>, usize)> = vec![(Vec::new(), 0)];

    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            ';' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                stack.push((Vec::new(), line));
                i += 1;
            }
            ')' => {
                if stack.len() == 1 {
                    return Err(parse_err(line, "unexpected `)`"));
                }
                let (items, start) = stack.pop().expect("checked");
                stack.last_mut().expect("root").0.push(Node { kind: Kind::List(items), line: start });
                i += 1;
            }
            '"' => {
                let start = line;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(parse_err(start, "unterminated string")),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let esc = chars.get(i + 1).ok_or_else(|| parse_err(line, "unterminated string"))?;
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                other => *other,
                            });
                            i += 2;
                        }
                        Some(&ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                stack.last_mut().expect("root").0.push(Node { kind: Kind::Str(s), line: start });
            }
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && !"();\"".contains(chars[i]) {
                    i += 1;
                }
                let token: String = chars[start..i].iter().collect();
                let kind = if token.starts_with(|c: char| c.is_ascii_digit())
                    || (token.len() > 1 && token.starts_with('-') && token[1..].starts_with(|c: char| c.is_ascii_digit()))
                {
                    Kind::Int(token.parse().map_err(|_| parse_err(line, format!("malformed number `{token}`")))?)
                } else {
                    Kind::Sym(token)
                };
                stack.last_mut().expect("root").0.push(Node { kind, line });
            }
        }
    }
    if stack.len() > 1 {
        let (_, open_line) = stack.last().expect("non-empty");
        return Err(parse_err(*open_line, "unclosed `(`"));
    }
    Ok(stack.pop().expect("root").0)
}

fn sym(node: &Node) -> Option<&str> {
    match &node.kind {
        Kind::Sym(s) => Some(s),
        _ => None,
    }
}

struct Function {
    params: Vec<String>,
    body: Vec<Node>,
}

struct Program {
    functions: HashMap<String, Function>,
    top_level: Vec<Node>,
}

fn collect_lets(nodes: &[Node], out: &mut HashSet<String>) {
    for n in nodes {
        if let Kind::List(items) = &n.kind {
            if items.first().and_then(sym) == Some("let") {
                if let Some(name) = items.get(1).and_then(sym) {
                    out.insert(name.to_string());
                }
            }
            collect_lets(items, out);
        }
    }
}

struct Checker<'a> {
    arities: &'a HashMap<String, usize>,
}

impl Checker<'_> {
    fn expr(&self, node: &Node, scope: &HashSet<String>) -> Result<(), StubError> {
        match &node.kind {
            Kind::Int(_) | Kind::Str(_) => Ok(()),
            Kind::Sym(s) => {
                if scope.contains(s) || CONSTANTS.contains(&s.as_str()) {
                    Ok(())
                } else if self.arities.contains_key(s) || BUILTINS.contains(&s.as_str()) {
                    Err(compile_err(node.line, format!("function `{s}` used as a value")))
                } else {
                    Err(compile_err(node.line, format!("undefined name `{s}`")))
                }
            }
            Kind::List(items) => {
                let Some(head) = items.first() else {
                    return Err(compile_err(node.line, "empty application `()`"));
                };
                let Some(name) = sym(head) else {
                    return Err(compile_err(head.line, "expression is not callable"));
                };
                let args = &items[1..];
                let want = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(compile_err(node.line, format!("`{name}` {msg}"))) };
                match name {
                    "def" => return Err(compile_err(node.line, "`def` is only allowed at top level")),
                    "let" | "set" => {
                        want(args.len() == 2, "takes a name and a value")?;
                        let target = sym(&args[0]).ok_or_else(|| compile_err(node.line, format!("`{name}` needs a name")))?;
                        if name == "set" && !scope.contains(target) {
                            return Err(compile_err(node.line, format!("assignment to undefined name `{target}`")));
                        }
                        return self.expr(&args[1], scope);
                    }
                    "if" => want(args.len() == 2 || args.len() == 3, "takes a condition and one or two branches")?,
                    "while" => want(!args.is_empty(), "needs a condition")?,
                    "assert" => want(args.len() == 1, "takes one expression")?,
                    "assert-eq" => want(args.len() == 2, "takes two expressions")?,
                    "begin" | "and" | "or" => {}
                    _ => {
                        if let Some(&arity) = self.arities.get(name) {
                            if args.len() != arity {
                                return Err(compile_err(
                                    node.line,
                                    format!("`{name}` expects {arity} arguments, got {}", args.len()),
                                ));
                            }
                        } else if !BUILTINS.contains(&name) {
                            return Err(compile_err(head.line, format!("undefined function `{name}`")));
                        }
                    }
                }
                args.iter().try_for_each(|a| self.expr(a, scope))
            }
        }
    }
}

fn compile(source: &str) -> Result<Program, StubError> {
    let forms = parse(source)?;
    let mut functions = HashMap::new();
    let mut top_level = Vec::new();
    for form in forms {
        let items = match &form.kind {
            Kind::List(items) if items.first().and_then(sym) == Some("def") => items,
            _ => {
                top_level.push(form);
                continue;
            }
        };
        let signature = match items.get(1).map(|n| &n.kind) {
            Some(Kind::List(sig)) if !sig.is_empty() => sig,
            _ => return Err(compile_err(form.line, "`def` needs a signature like (name args...)")),
        };
        let names: Option<Vec<String>> = signature.iter().map(|n| sym(n).map(String::from)).collect();
        let names = names.ok_or_else(|| compile_err(form.line, "function name and parameters must be names"))?;
        if items.len() < 3 {
            return Err(compile_err(form.line, format!("function `{}` has no body", names[0])));
        }
        if functions.contains_key(&names[0]) {
            return Err(compile_err(form.line, format!("function `{}` defined twice", names[0])));
        }
        if SPECIAL.contains(&names[0].as_str()) || BUILTINS.contains(&names[0].as_str()) {
            return Err(compile_err(form.line, format!("cannot redefine `{}`", names[0])));
        }
        functions.insert(names[0].clone(), Function { params: names[1..].to_vec(), body: items[2..].to_vec() });
    }

    let arities: HashMap<String, usize> = functions.iter().map(|(k, f)| (k.clone(), f.params.len())).collect();
    let checker = Checker { arities: &arities };
    let mut globals = HashSet::new();
    collect_lets(&top_level, &mut globals);
    for f in functions.values() {
        let mut scope = globals.clone();
        scope.extend(f.params.iter().cloned());
        collect_lets(&f.body, &mut scope);
        f.body.iter().try_for_each(|n| checker.expr(n, &scope))?;
    }
    top_level.iter().try_for_each(|n| checker.expr(n, &globals))?;
    Ok(Program { functions, top_level })
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Nil,
    Bool(bool),
    Int(i64),
    Str(String),
    List(Vec<Value>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => f.write_str("nil"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::List(items) => {
                f.write_str("(")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl Value {
    fn truthy(&self) -> bool {
        !matches!(self, Value::Nil | Value::Bool(false))
    }
}

fn rt(message: impl Into<String>) -> StubError {
    StubError::Runtime(message.into())
}

struct Interpreter<'p, W: Write> {
    program: &'p Program,
    globals: HashMap<String, Value>,
    depth: usize,
    out: W,
}

type Frame = Option<HashMap<String, Value>>;

impl<W: Write> Interpreter<'_, W> {
    fn lookup(&self, name: &str, frame: &Frame) -> Result<Value, StubError> {
        match name {
            "true" => return Ok(Value::Bool(true)),
            "false" => return Ok(Value::Bool(false)),
            "nil" => return Ok(Value::Nil),
            _ => {}
        }
        frame
            .as_ref()
            .and_then(|f| f.get(name))
            .or_else(|| self.globals.get(name))
            .cloned()
            .ok_or_else(|| rt(format!("name `{name}` used before assignment")))
    }

    fn assign(&mut self, name: &str, value: Value, frame: &mut Frame) {
        match frame {
            Some(f) => {
                if !f.contains_key(name) && self.globals.contains_key(name) {
                    self.globals.insert(name.to_string(), value);
                } else {
                    f.insert(name.to_string(), value);
                }
            }
            None => {
                self.globals.insert(name.to_string(), value);
            }
        }
    }

    fn block(&mut self, body: &[Node], frame: &mut Frame) -> Result<Value, StubError> {
        let mut last = Value::Nil;
        for n in body {
            last = self.eval(n, frame)?;
        }
        Ok(last)
    }

    fn eval(&mut self, node: &Node, frame: &mut Frame) -> Result<Value, StubError> {
        match &node.kind {
            Kind::Int(i) => Ok(Value::Int(*i)),
            Kind::Str(s) => Ok(Value::Str(s.clone())),
            Kind::Sym(s) => self.lookup(s, frame),
            Kind::List(items) => {
                let name = items.first().and_then(sym).ok_or_else(|| rt("expression is not callable"))?;
                let args = &items[1..];
                match name {
                    "let" | "set" => {
                        let v = self.eval(&args[1], frame)?;
                        self.assign(sym(&args[0]).expect("checked"), v, frame);
                        Ok(Value::Nil)
                    }
                    "if" => {
                        if self.eval(&args[0], frame)?.truthy() {
                            self.eval(&args[1], frame)
                        } else if let Some(other) = args.get(2) {
                            self.eval(other, frame)
                        } else {
                            Ok(Value::Nil)
                        }
                    }
                    "while" => {
                        while self.eval(&args[0], frame)?.truthy() {
                            self.block(&args[1..], frame)?;
                        }
                        Ok(Value::Nil)
                    }
                    "begin" => self.block(args, frame),
                    "and" => {
                        let mut last = Value::Bool(true);
                        for a in args {
                            last = self.eval(a, frame)?;
                            if !last.truthy() {
                                break;
                            }
                        }
                        Ok(last)
                    }
                    "or" => {
                        let mut last = Value::Bool(false);
                        for a in args {
                            last = self.eval(a, frame)?;
                            if last.truthy() {
                                break;
                            }
                        }
                        Ok(last)
                    }
                    "assert" => {
                        if self.eval(&args[0], frame)?.truthy() {
                            Ok(Value::Nil)
                        } else {
                            Err(StubError::Assertion(format!("line {}", node.line)))
                        }
                    }
                    "assert-eq" => {
                        let a = self.eval(&args[0], frame)?;
                        let b = self.eval(&args[1], frame)?;
                        if a == b {
                            Ok(Value::Nil)
                        } else {
                            Err(StubError::Assertion(format!("line {}: {a} != {b}", node.line)))
                        }
                    }
                    _ => {
                        let values = args.iter().map(|a| self.eval(a, frame)).collect::<Result<Vec<_>, _>>()?;
                        match self.program.functions.get(name) {
                            Some(f) => self.call(f, values),
                            None => self.builtin(name, values),
                        }
                    }
                }
            }
        }
    }

    fn call(&mut self, f: &Function, args: Vec<Value>) -> Result<Value, StubError> {
        if self.depth >= MAX_DEPTH {
            return Err(rt("maximum recursion depth exceeded"));
        }
        self.depth += 1;
        let mut frame: Frame = Some(f.params.iter().cloned().zip(args).collect());
        let result = self.block(&f.body, &mut frame);
        self.depth -= 1;
        result
    }

    fn builtin(&mut self, name: &str, args: Vec<Value>) -> Result<Value, StubError> {
        let ints = |args: &[Value]| -> Result<Vec<i64>, StubError> {
            args.iter()
                .map(|v| match v {
                    Value::Int(i) => Ok(*i),
                    other => Err(rt(format!("`{name}` expects integers, got {other}"))),
                })
                .collect()
        };
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(rt(format!("`{name}` expects {n} arguments, got {}", args.len())))
            }
        };
        let overflow = || rt(format!("integer overflow in `{name}`"));
        match name {
            "+" => ints(&args)?.into_iter().try_fold(0i64, |a, b| a.checked_add(b)).map(Value::Int).ok_or_else(overflow),
            "*" => ints(&args)?.into_iter().try_fold(1i64, |a, b| a.checked_mul(b)).map(Value::Int).ok_or_else(overflow),
            "-" => {
                let v = ints(&args)?;
                match v.as_slice() {
                    [] => Err(rt("`-` needs arguments")),
                    [x] => x.checked_neg().map(Value::Int).ok_or_else(overflow),
                    [x, rest @ ..] => rest.iter().try_fold(*x, |a, b| a.checked_sub(*b)).map(Value::Int).ok_or_else(overflow),
                }
            }
            "/" | "%" => {
                arity(2)?;
                let v = ints(&args)?;
                if v[1] == 0 {
                    return Err(rt("division by zero"));
                }
                let r = if name == "/" { v[0].checked_div_euclid(v[1]) } else { v[0].checked_rem_euclid(v[1]) };
                r.map(Value::Int).ok_or_else(overflow)
            }
            "=" | "!=" => {
                arity(2)?;
                Ok(Value::Bool((args[0] == args[1]) == (name == "=")))
            }
            "<" | ">" | "<=" | ">=" => {
                arity(2)?;
                let v = ints(&args)?;
                Ok(Value::Bool(match name {
                    "<" => v[0] < v[1],
                    ">" => v[0] > v[1],
                    "<=" => v[0] <= v[1],
                    _ => v[0] >= v[1],
                }))
            }
            "abs" => {
                arity(1)?;
                ints(&args)?[0].checked_abs().map(Value::Int).ok_or_else(overflow)
            }
            "min" | "max" => {
                let v = ints(&args)?;
                let r = if name == "min" { v.iter().min() } else { v.iter().max() };
                r.copied().map(Value::Int).ok_or_else(|| rt(format!("`{name}` needs arguments")))
            }
            "not" => {
                arity(1)?;
                Ok(Value::Bool(!args[0].truthy()))
            }
            "list" => Ok(Value::List(args)),
            "len" => {
                arity(1)?;
                match &args[0] {
                    Value::List(l) => Ok(Value::Int(l.len() as i64)),
                    Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
                    other => Err(rt(format!("`len` of non-sequence {other}"))),
                }
            }
            "get" => {
                arity(2)?;
                let idx = match &args[1] {
                    Value::Int(i) => *i,
                    other => return Err(rt(format!("index must be an integer, got {other}"))),
                };
                let item = match &args[0] {
                    Value::List(l) => usize::try_from(idx).ok().and_then(|i| l.get(i).cloned()),
                    Value::Str(s) => {
                        usize::try_from(idx).ok().and_then(|i| s.chars().nth(i)).map(|c| Value::Str(c.to_string()))
                    }
                    other => return Err(rt(format!("cannot index {other}"))),
                };
                item.ok_or_else(|| rt(format!("index {idx} out of range")))
            }
            "push" => {
                arity(2)?;
                let mut it = args.into_iter();
                match (it.next(), it.next()) {
                    (Some(Value::List(mut l)), Some(v)) => {
                        l.push(v);
                        Ok(Value::List(l))
                    }
                    (Some(other), _) => Err(rt(format!("cannot push onto {other}"))),
                    _ => unreachable!("arity checked"),
                }
            }
            "range" => {
                arity(1)?;
                let n = ints(&args)?[0];
                if n < 0 {
                    return Err(rt("negative range"));
                }
                Ok(Value::List((0..n).map(Value::Int).collect()))
            }
            "str" | "concat" => {
                let mut s = String::new();
                for v in &args {
                    match v {
                        Value::Str(x) => s.push_str(x),
                        other => s.push_str(&other.to_string()),
                    }
                }
                Ok(Value::Str(s))
            }
            "print" => {
                let line: Vec<String> = args
                    .iter()
                    .map(|v| match v {
                        Value::Str(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                writeln!(self.out, "{}", line.join(" ")).map_err(|e| rt(e.to_string()))?;
                Ok(Value::Nil)
            }
            _ => Err(rt(format!("unknown function `{name}`"))),
        }
    }
}

/// Parses and name-checks a program.
pub fn check(source: &str) -> Result<(), StubError> {
    compile(source).map(|_| ())
}

/// Checks and runs a program, writing `print` output to `out`.
///
/// Evaluation happens on a helper thread with a stack large enough for the
/// recursion limit.
pub fn run(source: &str, out: &mut (dyn Write + Send)) -> Result<(), StubError> {
    let program = compile(source)?;
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(STACK_BYTES)
            .spawn_scoped(s, || {
                let mut interp = Interpreter { program: &program, globals: HashMap::new(), depth: 0, out };
                let mut frame: Frame = None;
                for node in &program.top_level {
                    interp.eval(node, &mut frame)?;
                }
                Ok(())
            })
            .map_err(|e| rt(format!("cannot start interpreter: {e}")))?
            .join()
            .unwrap_or_else(|_| Err(rt("interpreter panicked")))
    })
}

/// Command-line entry: reads `path`, runs `check` or `run`, reports errors
/// on stderr and returns the process exit code.
pub fn main(mode: &str, path: &std::path::Path) -> i32 {
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            return 4;
        }
    };
    let result = match mode {
        "check" => check(&source),
        _ => run(&source, &mut std::io::stdout()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
