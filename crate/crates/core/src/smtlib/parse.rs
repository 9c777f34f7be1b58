use thiserror::Error;

use super::{Atom, Cmp, Formula, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unbalanced parentheses at byte {offset}")]
    UnbalancedParens { offset: usize },
    #[error("unknown operator `{op}` at byte {offset}")]
    UnknownOperator { op: String, offset: usize },
    #[error("malformed variable `{name}` at byte {offset}")]
    MalformedVariable { name: String, offset: usize },
    #[error("more than one assert; second begins at byte {offset}")]
    MultipleAsserts { offset: usize },
    #[error("expected `(assert ...)` at byte {offset}")]
    ExpectedAssert { offset: usize },
    #[error("wrong number of arguments to `{op}` at byte {offset}")]
    Arity { op: String, offset: usize },
    #[error("integer literal out of range at byte {offset}")]
    IntegerOutOfRange { offset: usize },
    #[error("empty input")]
    Empty,
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::UnbalancedParens { offset }
            | ParseError::UnknownOperator { offset, .. }
            | ParseError::MalformedVariable { offset, .. }
            | ParseError::MultipleAsserts { offset }
            | ParseError::ExpectedAssert { offset }
            | ParseError::Arity { offset, .. }
            | ParseError::IntegerOutOfRange { offset } => Some(*offset),
            ParseError::Empty => None,
        }
    }
}

#[derive(Debug)]
pub(crate) enum SExpr<'a> {
    Symbol(&'a str, usize),
    List(Vec<SExpr<'a>>, usize),
}

impl SExpr<'_> {
    fn offset(&self) -> usize {
        match self {
            SExpr::Symbol(_, o) | SExpr::List(_, o) => *o,
        }
    }
}

pub(crate) fn read_sexprs(text: &str) -> Result<Vec<SExpr<'_>>, ParseError> {
    let bytes = text.as_bytes();
    // stack of (open offset, children)
    let mut stack: Vec<(usize, Vec<SExpr>)> = Vec::new();
    let mut top = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let item = match b {
            b'(' => {
                stack.push((i, Vec::new()));
                i += 1;
                continue;
            }
            b')' => {
                let (open, children) =
                    stack.pop().ok_or(ParseError::UnbalancedParens { offset: i })?;
                i += 1;
                SExpr::List(children, open)
            }
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                SExpr::Symbol(&text[start..i], start)
            }
        };
        match stack.last_mut() {
            Some((_, children)) => children.push(item),
            None => top.push(item),
        }
    }
    if let Some((open, _)) = stack.pop() {
        return Err(ParseError::UnbalancedParens { offset: open });
    }
    Ok(top)
}

/// Parses the body of the single top-level `(assert ...)` in `text`.
///
/// The literal `None` (any case, surrounding whitespace ignored) is the
/// vacuous constraint and parses to [`Formula::True`].
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    if text.trim().eq_ignore_ascii_case("none") {
        return Ok(Formula::True);
    }
    let top = read_sexprs(text)?;
    let mut asserts = top.iter().map(|form| match form {
        SExpr::List(items, offset) => match items.first() {
            Some(SExpr::Symbol("assert", _)) => Ok((items, *offset)),
            _ => Err(ParseError::ExpectedAssert { offset: *offset }),
        },
        SExpr::Symbol(_, offset) => Err(ParseError::ExpectedAssert { offset: *offset }),
    });
    let (items, offset) = asserts.next().ok_or(ParseError::Empty)??;
    if let Some(next) = asserts.next() {
        return Err(match next {
            Ok((_, o)) => ParseError::MultipleAsserts { offset: o },
            Err(e) => e,
        });
    }
    if items.len() != 2 {
        return Err(ParseError::Arity { op: "assert".into(), offset });
    }
    formula(&items[1])
}

fn formula(e: &SExpr) -> Result<Formula, ParseError> {
    let (items, offset) = match e {
        SExpr::Symbol("true", _) => return Ok(Formula::True),
        SExpr::Symbol(s, o) => {
            return Err(ParseError::UnknownOperator { op: (*s).into(), offset: *o })
        }
        SExpr::List(items, o) => (items, *o),
    };
    let (head, args) = match items.split_first() {
        Some((SExpr::Symbol(h, _), rest)) => (*h, rest),
        Some((other, _)) => {
            return Err(ParseError::UnknownOperator { op: "(".into(), offset: other.offset() })
        }
        None => return Err(ParseError::UnknownOperator { op: "()".into(), offset }),
    };
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(ParseError::Arity { op: head.into(), offset })
        }
    };
    match head {
        "and" => {
            let children = args.iter().map(formula).collect::<Result<Vec<_>, _>>()?;
            Ok(Formula::conjunction(children))
        }
        "or" => {
            let mut children = args.iter().map(formula).collect::<Result<Vec<_>, _>>()?;
            match children.len() {
                0 => Err(ParseError::Arity { op: head.into(), offset }),
                1 => Ok(children.pop().unwrap()),
                _ => Ok(Formula::Or(children)),
            }
        }
        "not" => {
            arity(1)?;
            Ok(Formula::Not(Box::new(formula(&args[0])?)))
        }
        _ => match Cmp::from_symbol(head) {
            Some(op) => {
                arity(2)?;
                Ok(Formula::Atom(Atom::new(op, term(&args[0])?, term(&args[1])?)))
            }
            None => Err(ParseError::UnknownOperator { op: head.into(), offset }),
        },
    }
}

fn term(e: &SExpr) -> Result<Term, ParseError> {
    match e {
        SExpr::Symbol(s, offset) => symbol_term(s, *offset),
        SExpr::List(items, offset) => {
            let offset = *offset;
            let (head, args) = match items.split_first() {
                Some((SExpr::Symbol(h, _), rest)) => (*h, rest),
                Some((other, _)) => {
                    return Err(ParseError::UnknownOperator {
                        op: "(".into(),
                        offset: other.offset(),
                    })
                }
                None => return Err(ParseError::UnknownOperator { op: "()".into(), offset }),
            };
            let build: fn(Term, Term) -> Term = match head {
                "+" => Term::add,
                "-" => Term::sub,
                "*" => Term::mul,
                _ => return Err(ParseError::UnknownOperator { op: head.into(), offset }),
            };
            let mut terms = args.iter().map(term);
            let first = terms.next().ok_or(ParseError::Arity { op: head.into(), offset })??;
            if args.len() == 1 {
                return match (head, first) {
                    ("-", Term::Int(c)) => c
                        .checked_neg()
                        .map(Term::Int)
                        .ok_or(ParseError::IntegerOutOfRange { offset }),
                    ("-", t) => Ok(Term::sub(Term::Int(0), t)),
                    _ => Err(ParseError::Arity { op: head.into(), offset }),
                };
            }
            terms.try_fold(first, |acc, t| Ok(build(acc, t?)))
        }
    }
}

fn symbol_term(s: &str, offset: usize) -> Result<Term, ParseError> {
    let unsigned = s.strip_prefix('-').unwrap_or(s);
    if !unsigned.is_empty() && unsigned.bytes().all(|b| b.is_ascii_digit()) {
        return s
            .parse::<i64>()
            .map(Term::Int)
            .map_err(|_| ParseError::IntegerOutOfRange { offset });
    }
    Var::from_name(s)
        .map(Term::Var)
        .ok_or_else(|| ParseError::MalformedVariable { name: s.into(), offset })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(i: u32, j: u32) -> Formula {
        Formula::atom(Cmp::Le, Term::var(i), Term::var(j))
    }

    #[test]
    fn parses_double_spaced_quicksort_n3() {
        let f = parse_formula(
            "(assert (and (and  ( <=  in0 in2)  ( <=  in1 in2))  ( <=  in0 in1)))",
        )
        .unwrap();
        assert_eq!(
            f,
            Formula::And(vec![Formula::And(vec![le(0, 2), le(1, 2)]), le(0, 1)])
        );
    }

    #[test]
    fn parses_flat_nary_and() {
        let f = parse_formula("(assert(and  ( <= in0 in2)  ( <= in1 in2)  ( <= in0 in1)))").unwrap();
        assert_eq!(f, Formula::And(vec![le(0, 2), le(1, 2), le(0, 1)]));
    }

    #[test]
    fn none_is_true() {
        assert_eq!(parse_formula("None").unwrap(), Formula::True);
        assert_eq!(parse_formula("  none \n").unwrap(), Formula::True);
        assert_eq!(parse_formula("NONE").unwrap(), Formula::True);
    }

    #[test]
    fn unclosed_paren() {
        assert_eq!(
            parse_formula("(assert (<= in0 in1)"),
            Err(ParseError::UnbalancedParens { offset: 0 })
        );
        assert_eq!(
            parse_formula("(assert (<= in0 in1)))"),
            Err(ParseError::UnbalancedParens { offset: 21 })
        );
    }

    #[test]
    fn error_kinds_carry_offsets() {
        let e = parse_formula("(assert (=> in0 in1))").unwrap_err();
        assert_eq!(e, ParseError::UnknownOperator { op: "=>".into(), offset: 8 });
        let e = parse_formula("(assert (<= in01 in1))").unwrap_err();
        assert_eq!(e, ParseError::MalformedVariable { name: "in01".into(), offset: 12 });
        let e = parse_formula("(assert (<= x in1))").unwrap_err();
        assert!(matches!(e, ParseError::MalformedVariable { offset: 12, .. }));
        let e = parse_formula("(assert (<= in0 in1)) (assert (<= in1 in2))").unwrap_err();
        assert_eq!(e, ParseError::MultipleAsserts { offset: 22 });
        let e = parse_formula("(<= in0 in1)").unwrap_err();
        assert_eq!(e, ParseError::ExpectedAssert { offset: 0 });
        let e = parse_formula("(assert (<= in0 in1 in2))").unwrap_err();
        assert!(matches!(e, ParseError::Arity { .. }));
        assert_eq!(parse_formula("   ").unwrap_err(), ParseError::Empty);
        let e = parse_formula("(assert (<= in0 99999999999999999999))").unwrap_err();
        assert!(matches!(e, ParseError::IntegerOutOfRange { .. }));
    }

    #[test]
    fn terms_and_negative_literals() {
        let f = parse_formula("(assert (= in2 (+ in1 in0 (- 4))))").unwrap();
        let expected = Formula::atom(
            Cmp::Eq,
            Term::var(2),
            Term::add(Term::add(Term::var(1), Term::var(0)), Term::Int(-4)),
        );
        assert_eq!(f, expected);
        let g = parse_formula("(assert (>= in0 -7))").unwrap();
        assert_eq!(g, Formula::atom(Cmp::Ge, Term::var(0), Term::Int(-7)));
        let h = parse_formula("(assert (>= in0 (- in1)))").unwrap();
        assert_eq!(
            h,
            Formula::atom(Cmp::Ge, Term::var(0), Term::sub(Term::Int(0), Term::var(1)))
        );
    }

    #[test]
    fn nested_logic() {
        let f = parse_formula("(assert (or (not (< in0 in1)) (= in0 5)))").unwrap();
        assert_eq!(
            f,
            Formula::Or(vec![
                Formula::negate(Formula::atom(Cmp::Lt, Term::var(0), Term::var(1))),
                Formula::atom(Cmp::Eq, Term::var(0), Term::Int(5)),
            ])
        );
        assert_eq!(parse_formula("(assert (and))").unwrap(), Formula::True);
        assert_eq!(parse_formula("(assert (and (<= in0 in1)))").unwrap(), le(0, 1));
    }
}
