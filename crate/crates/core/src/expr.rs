//! Mini-language for basis functions: parse text expressions over named
//! variables, evaluate them on data rows, and pretty-print learned linear
//! combinations.
//!
//! Grammar (infix, left-associative binaries):
//!
//! ```text
//! expr   := term  (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ['-'] digits)*
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`. The only
//! functions are `sqrt`, `abs` and `log10`.

use crate::dataset::{Dataset, Row};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    UnboundVariable(String),
    #[error("sqrt of negative value {0}")]
    NegativeSqrt(f64),
    #[error("log10 of non-positive value {0}")]
    NonPositiveLog(f64),
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Error)]
pub enum BasisError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("coefficient count {coeffs} does not match basis size {basis}")]
    LengthMismatch { coeffs: usize, basis: usize },
    #[error("row {row}, basis function `{basis}`: {source}")]
    Featurize {
        row: usize,
        basis: String,
        #[source]
        source: EvalError,
    },
}

/// Variable lookup used by [`Expression::eval`].
pub trait Binding {
    fn value_of(&self, name: &str) -> Option<f64>;
}

impl Binding for Row<'_> {
    fn value_of(&self, name: &str) -> Option<f64> {
        self.get(name)
    }
}

impl Binding for std::collections::HashMap<String, f64> {
    fn value_of(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Binding for [(&str, f64)] {
    fn value_of(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

/// Parsed basis-function term over named variables.
#[derive(Clone, Debug, PartialEq)]
pub enum Expression {
    Constant(f64),
    Variable(String),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, i32),
    Sqrt(Box<Expression>),
    Abs(Box<Expression>),
    Log10(Box<Expression>),
}

impl Expression {
    /// Evaluates the expression; domain violations are errors, never NaN.
    pub fn eval<B: Binding + ?Sized>(&self, bind: &B) -> Result<f64, EvalError> {
        self.eval_dyn(&|name| bind.value_of(name))
    }

    fn eval_dyn(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
        use Expression::*;
        Ok(match self {
            Constant(v) => *v,
            Variable(name) => {
                lookup(name).ok_or_else(|| EvalError::UnboundVariable(name.clone()))?
            }
            Add(a, b) => a.eval_dyn(lookup)? + b.eval_dyn(lookup)?,
            Sub(a, b) => a.eval_dyn(lookup)? - b.eval_dyn(lookup)?,
            Mul(a, b) => a.eval_dyn(lookup)? * b.eval_dyn(lookup)?,
            Div(a, b) => {
                let d = b.eval_dyn(lookup)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval_dyn(lookup)? / d
            }
            Pow(base, e) => {
                let b = base.eval_dyn(lookup)?;
                if b == 0.0 && *e < 0 {
                    return Err(EvalError::DivisionByZero);
                }
                b.powi(*e)
            }
            Sqrt(a) => {
                let v = a.eval_dyn(lookup)?;
                if v < 0.0 {
                    return Err(EvalError::NegativeSqrt(v));
                }
                v.sqrt()
            }
            Abs(a) => a.eval_dyn(lookup)?.abs(),
            Log10(a) => {
                let v = a.eval_dyn(lookup)?;
                if v <= 0.0 {
                    return Err(EvalError::NonPositiveLog(v));
                }
                v.log10()
            }
        })
    }

    /// All variable names appearing in the expression, in first-use order.
    pub fn free_variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        use Expression::*;
        match self {
            Constant(_) => {}
            Variable(name) => {
                if !out.iter().any(|n| n == name) {
                    out.push(name.clone());
                }
            }
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Pow(a, _) | Sqrt(a) | Abs(a) | Log10(a) => a.collect_vars(out),
        }
    }

    fn precedence(&self) -> u8 {
        use Expression::*;
        match self {
            Add(..) | Sub(..) => 1,
            Mul(..) | Div(..) => 2,
            Pow(..) => 3,
            Constant(v) if *v < 0.0 => 1,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut std::fmt::Formatter<'_>, parent: u8) -> std::fmt::Result {
        use Expression::*;
        let prec = self.precedence();
        let parens = prec < parent;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Constant(v) => write!(f, "{}", v)?,
            Variable(name) => write!(f, "{}", name)?,
            Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)?;
            }
            Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)?;
            }
            Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)?;
            }
            Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)?;
            }
            Pow(base, e) => {
                base.fmt_prec(f, 4)?;
                write!(f, "^{}", e)?;
            }
            Sqrt(a) => {
                write!(f, "sqrt(")?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
            Abs(a) => {
                write!(f, "abs(")?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
            Log10(a) => {
                write!(f, "log10(")?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl std::fmt::Display for Expression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Parses `text` against the grammar; identifiers must come from `variables`.
pub fn parse(text: &str, variables: &[String]) -> Result<Expression, ParseError> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars: variables,
    };
    let expr = parser.parse_expr()?;
    parser.skip_ws();
    if parser.pos != parser.src.len() {
        return Err(parser.syntax("unexpected trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, byte: u8) -> bool {
        if self.peek() == Some(byte) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expression::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Expression::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Expression::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Expression, ParseError> {
        if self.eat(b'-') {
            let inner = self.parse_unary()?;
            return Ok(match inner {
                Expression::Constant(v) => Expression::Constant(-v),
                other => Expression::Mul(
                    Box::new(Expression::Constant(-1.0)),
                    Box::new(other),
                ),
            });
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expression, ParseError> {
        let mut base = self.parse_atom()?;
        while self.eat(b'^') {
            let exponent = self.parse_int_exponent()?;
            base = Expression::Pow(Box::new(base), exponent);
        }
        Ok(base)
    }

    fn parse_int_exponent(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let negative = self.eat(b'-');
        self.skip_ws();
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            self.pos = start;
            return Err(self.syntax("expected integer exponent after `^`"));
        }
        let text = std::str::from_utf8(&self.src[digits_start..self.pos]).unwrap();
        let magnitude: i32 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "integer exponent out of range".into(),
        })?;
        Ok(if negative { -magnitude } else { magnitude })
    }

    fn parse_atom(&mut self) -> Result<Expression, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            Some(_) => Err(self.syntax("expected a number, identifier or `(`")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn parse_number(&mut self) -> Result<Expression, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == exp_start {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: format!("invalid number `{text}`"),
        })?;
        Ok(Expression::Constant(value))
    }

    fn parse_ident(&mut self) -> Result<Expression, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let inner = Box::new(self.parse_expr()?);
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`"));
            }
            return match name.as_str() {
                "sqrt" => Ok(Expression::Sqrt(inner)),
                "abs" => Ok(Expression::Abs(inner)),
                "log10" => Ok(Expression::Log10(inner)),
                _ => Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unknown function `{name}`"),
                }),
            };
        }
        if self.vars.iter().any(|v| v == &name) {
            Ok(Expression::Variable(name))
        } else {
            Err(ParseError::UnknownIdentifier {
                offset: start,
                name,
            })
        }
    }
}

/// Whether members parameterize splits or leaf expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisRole {
    Branching,
    Leaf,
}

/// Ordered, immutable list of basis functions over a fixed variable universe.
#[derive(Clone, Debug)]
pub struct BasisSet {
    exprs: Vec<Expression>,
    texts: Vec<String>,
    variables: Vec<String>,
    role: BasisRole,
}

impl BasisSet {
    pub fn parse(
        texts: &[impl AsRef<str>],
        variables: &[String],
        role: BasisRole,
    ) -> Result<Self, ParseError> {
        let mut exprs = Vec::with_capacity(texts.len());
        for text in texts {
            exprs.push(parse(text.as_ref(), variables)?);
        }
        Ok(BasisSet {
            texts: texts.iter().map(|t| t.as_ref().trim().to_string()).collect(),
            exprs,
            variables: variables.to_vec(),
            role,
        })
    }

    pub fn len(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty()
    }

    pub fn role(&self) -> BasisRole {
        self.role
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn expr(&self, k: usize) -> &Expression {
        &self.exprs[k]
    }

    pub fn exprs(&self) -> &[Expression] {
        &self.exprs
    }

    pub fn text(&self, k: usize) -> &str {
        &self.texts[k]
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    /// Index of the member that is exactly the raw variable `name`, if any.
    pub fn raw_variable_index(&self, name: &str) -> Option<usize> {
        self.exprs
            .iter()
            .position(|e| matches!(e, Expression::Variable(v) if v == name))
    }

    /// Evaluates every member on a single row.
    pub fn eval_row<B: Binding + ?Sized>(&self, row: &B) -> Result<Vec<f64>, EvalError> {
        self.exprs.iter().map(|e| e.eval(row)).collect()
    }

    /// The feature matrix `phi[i][k]`; row and column order preserving.
    pub fn featurize(&self, data: &Dataset) -> Result<Vec<Vec<f64>>, BasisError> {
        let mut phi = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            let row = data.row(i);
            let mut values = Vec::with_capacity(self.exprs.len());
            for (k, e) in self.exprs.iter().enumerate() {
                let v = e.eval(&row).map_err(|source| BasisError::Featurize {
                    row: i,
                    basis: self.texts[k].clone(),
                    source,
                })?;
                values.push(v);
            }
            phi.push(values);
        }
        Ok(phi)
    }
}

/// Formats `value` with `sig` significant digits, trimming trailing zeros.
pub fn format_sig(value: f64, sig: usize) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    if !(-6..9).contains(&magnitude) {
        return format!("{:.*e}", sig.saturating_sub(1), value);
    }
    let shift = sig as i32 - 1 - magnitude;
    let mut text = if shift >= 0 {
        format!("{:.*}", shift as usize, value)
    } else {
        let scale = 10f64.powi(-shift);
        format!("{:.0}", (value / scale).round() * scale)
    };
    if text.contains('.') {
        while text.ends_with('0') {
            text.pop();
        }
        if text.ends_with('.') {
            text.pop();
        }
    }
    if text == "-0" {
        text = "0".into();
    }
    text
}

/// Renders `sum_k coeffs[k] * basis[k]` with signs folded, omitting
/// coefficients at or below `tol`. Coefficients print with 4 significant
/// digits.
pub fn print_combination(
    coeffs: &[f64],
    basis: &BasisSet,
    tol: f64,
) -> Result<String, BasisError> {
    if coeffs.len() != basis.len() {
        return Err(BasisError::LengthMismatch {
            coeffs: coeffs.len(),
            basis: basis.len(),
        });
    }
    let mut out = String::new();
    for (k, &c) in coeffs.iter().enumerate() {
        if c.abs() <= tol {
            continue;
        }
        let negative = c < 0.0;
        if out.is_empty() {
            if negative {
                out.push('-');
            }
        } else if negative {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(&render_term(c.abs(), basis.expr(k)));
    }
    if out.is_empty() {
        out.push('0');
    }
    Ok(out)
}

fn render_term(magnitude: f64, expr: &Expression) -> String {
    if let Expression::Constant(v) = expr {
        return format_sig(magnitude * v, 4);
    }
    let needs_parens = expr.precedence() < 2;
    let body = if needs_parens {
        format!("({})", expr)
    } else {
        format!("{}", expr)
    };
    if (magnitude - 1.0).abs() <= 1e-12 {
        body
    } else {
        format!("{}*{}", format_sig(magnitude, 4), body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Expression::*;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_sum_of_squares() {
        let e = parse("x1^2 + x2^2", &vars(&["x1", "x2"])).unwrap();
        assert_eq!(
            e,
            Add(
                Box::new(Pow(Box::new(Variable("x1".into())), 2)),
                Box::new(Pow(Box::new(Variable("x2".into())), 2)),
            )
        );
    }

    #[test]
    fn parses_constant() {
        assert_eq!(parse("1", &[]).unwrap(), Constant(1.0));
    }

    #[test]
    fn parses_nested_functions() {
        let e = parse("sqrt(abs(h1 - h2))", &vars(&["h1", "h2"])).unwrap();
        assert_eq!(
            e,
            Sqrt(Box::new(Abs(Box::new(Sub(
                Box::new(Variable("h1".into())),
                Box::new(Variable("h2".into()))
            )))))
        );
    }

    #[test]
    fn precedence_pow_over_unary_minus() {
        let e = parse("-x^2", &vars(&["x"])).unwrap();
        let v = e.eval(&[("x", 3.0)][..]).unwrap();
        assert_eq!(v, -9.0);
    }

    #[test]
    fn eval_examples() {
        let sum_sq = parse("x1^2 + x2^2", &vars(&["x1", "x2"])).unwrap();
        assert_eq!(sum_sq.eval(&[("x1", 1.0), ("x2", 1.0)][..]).unwrap(), 2.0);

        let tank = parse("sqrt(abs(h1 - h2))", &vars(&["h1", "h2"])).unwrap();
        assert_eq!(tank.eval(&[("h1", 1.2), ("h2", 0.2)][..]).unwrap(), 1.0);

        let lg = parse("log10(M)", &vars(&["M"])).unwrap();
        let v = lg.eval(&[("M", 31200.0)][..]).unwrap();
        assert!((v - 31200.0_f64.log10()).abs() < 1e-15);
        assert!((v - 4.4941546).abs() < 1e-6);
    }

    #[test]
    fn domain_errors_are_reported() {
        let v = vars(&["x"]);
        let sq = parse("sqrt(x)", &v).unwrap();
        assert_eq!(
            sq.eval(&[("x", -1.0)][..]),
            Err(EvalError::NegativeSqrt(-1.0))
        );
        let lg = parse("log10(x)", &v).unwrap();
        assert_eq!(lg.eval(&[("x", 0.0)][..]), Err(EvalError::NonPositiveLog(0.0)));
        let div = parse("1/x", &v).unwrap();
        assert_eq!(div.eval(&[("x", 0.0)][..]), Err(EvalError::DivisionByZero));
        let free = parse("x", &v).unwrap();
        assert_eq!(
            free.eval(&[("z", 0.0)][..]),
            Err(EvalError::UnboundVariable("x".into()))
        );
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("x1 + ", &vars(&["x1"])) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
        match parse("x1 + q3", &vars(&["x1"])) {
            Err(ParseError::UnknownIdentifier { offset, name }) => {
                assert_eq!(offset, 5);
                assert_eq!(name, "q3");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn print_combination_examples() {
        let v = vars(&["x1", "x2"]);
        let basis = BasisSet::parse(
            &["1", "x1", "x2", "x1^2", "x2^2", "x1*x2"],
            &v,
            BasisRole::Leaf,
        )
        .unwrap();
        let text =
            print_combination(&[0.0, 0.0, 0.0, 1.0, 1.0, 0.0], &basis, 1e-9).unwrap();
        assert_eq!(text, "x1^2 + x2^2");

        let zero = print_combination(&[0.0; 6], &basis, 1e-9).unwrap();
        assert_eq!(zero, "0");

        let vm = vars(&["M"]);
        let visc = BasisSet::parse(&["log10(M)", "1"], &vm, BasisRole::Leaf).unwrap();
        let text = print_combination(&[3.4, -11.28], &visc, 1e-9).unwrap();
        assert_eq!(text, "3.4*log10(M) - 11.28");
    }

    #[test]
    fn combination_length_mismatch() {
        let basis = BasisSet::parse(&["1"], &[], BasisRole::Leaf).unwrap();
        assert!(matches!(
            print_combination(&[1.0, 2.0], &basis, 0.0),
            Err(BasisError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn format_sig_shapes() {
        assert_eq!(format_sig(3.4, 4), "3.4");
        assert_eq!(format_sig(-11.28, 4), "-11.28");
        assert_eq!(format_sig(1.01, 4), "1.01");
        assert_eq!(format_sig(0.5, 4), "0.5");
        assert_eq!(format_sig(0.0, 4), "0");
        assert_eq!(format_sig(123456.0, 4), "123500");
    }

    #[test]
    fn display_round_trips() {
        let v = vars(&["x1", "x2"]);
        for text in [
            "x1^2 + x2^2",
            "sqrt(abs(x1 - x2))",
            "x1*x2 - 2.5/x2",
            "(x1 + x2)^3",
            "-x1^2",
            "log10(x1)*x2",
        ] {
            let e = parse(text, &v).unwrap();
            let printed = format!("{}", e);
            let reparsed = parse(&printed, &v).unwrap();
            for (a, b) in [(0.7, 1.3), (1.5, 0.4), (2.0, 2.0)] {
                let bind = [("x1", a), ("x2", b)];
                let lhs = e.eval(&bind[..]).unwrap();
                let rhs = reparsed.eval(&bind[..]).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()),
                    "{text}: {lhs} vs {rhs}"
                );
            }
        }
    }
}
