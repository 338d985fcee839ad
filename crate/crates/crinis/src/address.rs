//! Eventually periodic external addresses, signed addresses and their
//! linear and cyclic orders.
//!
//! The module never assumes an order on symbols; callers inject one through
//! [`SymbolOrdering`].

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::map_models::{PartitionConfig, Symbol};

pub trait SymbolOrdering {
    fn compare_symbols(&self, a: Symbol, b: Symbol) -> Ordering;
}

impl SymbolOrdering for PartitionConfig {
    fn compare_symbols(&self, a: Symbol, b: Symbol) -> Ordering {
        PartitionConfig::compare_symbols(self, a, b)
    }
}

impl<F: Fn(Symbol, Symbol) -> Ordering> SymbolOrdering for F {
    fn compare_symbols(&self, a: Symbol, b: Symbol) -> Ordering {
        self(a, b)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AddressError {
    #[error("the period of an address must not be empty")]
    EmptyPeriod,
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("cyclic order needs pairwise distinct arguments")]
    NonDistinct,
}

/// s₀…s_{m−1} followed by the period repeated forever, kept in canonical
/// form: primitive period and shortest preperiod.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExternalAddress {
    preperiod: Vec<Symbol>,
    period: Vec<Symbol>,
}

impl ExternalAddress {
    pub fn new(preperiod: Vec<Symbol>, period: Vec<Symbol>) -> Result<Self, AddressError> {
        if period.is_empty() {
            return Err(AddressError::EmptyPeriod);
        }
        Ok(Self::canonical(preperiod, period))
    }

    pub fn periodic(period: Vec<Symbol>) -> Result<Self, AddressError> {
        Self::new(Vec::new(), period)
    }

    /// The constant address s s s ….
    pub fn constant(s: Symbol) -> Self {
        ExternalAddress { preperiod: Vec::new(), period: vec![s] }
    }

    fn canonical(mut preperiod: Vec<Symbol>, mut period: Vec<Symbol>) -> Self {
        let n = period.len();
        if let Some(d) = (1..=n).find(|d| n.is_multiple_of(*d) && (0..n).all(|i| period[i] == period[i % d])) {
            period.truncate(d);
        }
        while let Some(&last) = preperiod.last() {
            if last != *period.last().expect("nonempty period") {
                break;
            }
            preperiod.pop();
            period.rotate_right(1);
        }
        ExternalAddress { preperiod, period }
    }

    pub fn preperiod(&self) -> &[Symbol] {
        &self.preperiod
    }

    pub fn period(&self) -> &[Symbol] {
        &self.period
    }

    pub fn symbol(&self, i: usize) -> Symbol {
        if i < self.preperiod.len() {
            self.preperiod[i]
        } else {
            self.period[(i - self.preperiod.len()) % self.period.len()]
        }
    }

    pub fn first(&self) -> Symbol {
        self.symbol(0)
    }

    pub fn prefix(&self, n: usize) -> Vec<Symbol> {
        (0..n).map(|i| self.symbol(i)).collect()
    }

    pub fn shift(&self) -> Self {
        self.shift_by(1)
    }

    pub fn shift_by(&self, n: usize) -> Self {
        if n <= self.preperiod.len() {
            return ExternalAddress {
                preperiod: self.preperiod[n..].to_vec(),
                period: self.period.clone(),
            };
        }
        let r = (n - self.preperiod.len()) % self.period.len();
        let mut period = self.period.clone();
        period.rotate_left(r);
        ExternalAddress { preperiod: Vec::new(), period }
    }

    /// s followed by this address.
    pub fn prepend(&self, s: Symbol) -> Self {
        let mut pre = Vec::with_capacity(self.preperiod.len() + 1);
        pre.push(s);
        pre.extend_from_slice(&self.preperiod);
        Self::canonical(pre, self.period.clone())
    }

    pub fn prepend_word(&self, word: &[Symbol]) -> Self {
        word.iter().rev().fold(self.clone(), |acc, &s| acc.prepend(s))
    }

    /// Number of symbols after which the comparison of `self` and `other`
    /// is decided.
    pub fn comparison_budget(&self, other: &Self) -> usize {
        let pre = self.preperiod.len().max(other.preperiod.len());
        pre + 2 * lcm(self.period.len(), other.period.len())
    }

    pub fn distinct_symbols(&self) -> Vec<Symbol> {
        let mut out: Vec<Symbol> = Vec::new();
        for s in self.preperiod.iter().chain(&self.period) {
            if !out.contains(s) {
                out.push(*s);
            }
        }
        out
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl fmt::Display for ExternalAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Symbol]| v.iter().map(Symbol::to_string).collect::<Vec<_>>().join(" ");
        if self.preperiod.is_empty() {
            write!(f, "| {}", join(&self.period))
        } else {
            write!(f, "{} | {}", join(&self.preperiod), join(&self.period))
        }
    }
}

impl std::str::FromStr for ExternalAddress {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_address(s)
    }
}

/// Parses `"0R 1L | 2R"`: symbols before the bar form the preperiod, symbols
/// after it the period.
pub fn parse_address(text: &str) -> Result<ExternalAddress, AddressError> {
    let bar = text.find('|').ok_or_else(|| AddressError::Syntax {
        pos: text.len(),
        msg: "expected '|' separating preperiod and period".into(),
    })?;
    if let Some(extra) = text[bar + 1..].find('|') {
        return Err(AddressError::Syntax { pos: bar + 1 + extra, msg: "second '|'".into() });
    }
    let pre = parse_symbols(&text[..bar], 0)?;
    let per = parse_symbols(&text[bar + 1..], bar + 1)?;
    ExternalAddress::new(pre, per)
}

fn parse_symbols(part: &str, offset: usize) -> Result<Vec<Symbol>, AddressError> {
    let mut out = Vec::new();
    let mut pos = 0;
    for token in part.split(' ') {
        if !token.is_empty() {
            let sym = token.parse::<Symbol>().map_err(|msg| AddressError::Syntax { pos: offset + pos, msg })?;
            out.push(sym);
        }
        pos += token.len() + 1;
    }
    Ok(out)
}

pub fn format_address(a: &ExternalAddress) -> String {
    a.to_string()
}

pub fn shift(a: &ExternalAddress) -> ExternalAddress {
    a.shift()
}

/// Lexicographic comparison together with the number of symbols inspected.
pub fn lex_compare_counted<O: SymbolOrdering + ?Sized>(
    ord: &O,
    a: &ExternalAddress,
    b: &ExternalAddress,
) -> (Ordering, usize) {
    if a == b {
        return (Ordering::Equal, 0);
    }
    let budget = a.comparison_budget(b);
    for i in 0..budget {
        let (x, y) = (a.symbol(i), b.symbol(i));
        if x != y {
            return (ord.compare_symbols(x, y), i + 1);
        }
    }
    (Ordering::Equal, budget)
}

pub fn lex_compare<O: SymbolOrdering + ?Sized>(ord: &O, a: &ExternalAddress, b: &ExternalAddress) -> Ordering {
    lex_compare_counted(ord, a, b).0
}

fn cyclic_from(ab: Ordering, xb: Ordering, ax: Ordering) -> bool {
    use Ordering::Less;
    let gt = Ordering::Greater;
    (ax == Less && xb == Less) || (xb == Less && ab == gt) || (ab == gt && ax == Less)
}

/// [a, x, b]: going around the circle from a one meets x before b.
pub fn cyclic_triple<O: SymbolOrdering + ?Sized>(
    ord: &O,
    a: &ExternalAddress,
    x: &ExternalAddress,
    b: &ExternalAddress,
) -> Result<bool, AddressError> {
    if a == x || x == b || a == b {
        return Err(AddressError::NonDistinct);
    }
    Ok(cyclic_from(lex_compare(ord, a, b), lex_compare(ord, x, b), lex_compare(ord, a, x)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Minus => "-",
            Sign::Plus => "+",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sign {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            other => Err(format!("unknown sign {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignedAddress {
    pub addr: ExternalAddress,
    pub sign: Sign,
}

impl SignedAddress {
    pub fn new(addr: ExternalAddress, sign: Sign) -> Self {
        SignedAddress { addr, sign }
    }
}

impl fmt::Display for SignedAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.addr, self.sign)
    }
}

/// Lexicographic order refined by − ≺ + on equal addresses.
pub fn signed_compare<O: SymbolOrdering + ?Sized>(ord: &O, p: &SignedAddress, q: &SignedAddress) -> Ordering {
    lex_compare(ord, &p.addr, &q.addr).then(p.sign.cmp(&q.sign))
}

pub fn signed_cyclic_triple<O: SymbolOrdering + ?Sized>(
    ord: &O,
    p: &SignedAddress,
    x: &SignedAddress,
    q: &SignedAddress,
) -> Result<bool, AddressError> {
    if p == x || x == q || p == q {
        return Err(AddressError::NonDistinct);
    }
    Ok(cyclic_from(signed_compare(ord, p, q), signed_compare(ord, x, q), signed_compare(ord, p, x)))
}

/// Open interval of the circle of signed addresses, running counterclockwise
/// from `lo` to `hi`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddressInterval {
    pub lo: SignedAddress,
    pub hi: SignedAddress,
}

impl AddressInterval {
    pub fn new(lo: SignedAddress, hi: SignedAddress) -> Result<Self, AddressError> {
        if lo == hi {
            return Err(AddressError::NonDistinct);
        }
        Ok(AddressInterval { lo, hi })
    }

    pub fn reverse(&self) -> Self {
        AddressInterval { lo: self.hi.clone(), hi: self.lo.clone() }
    }

    pub fn contains<O: SymbolOrdering + ?Sized>(&self, ord: &O, p: &SignedAddress) -> bool {
        interval_contains(ord, self, p)
    }

    /// Both endpoints with `s` prepended.
    pub fn prepend(&self, s: Symbol) -> Self {
        AddressInterval {
            lo: SignedAddress::new(self.lo.addr.prepend(s), self.lo.sign),
            hi: SignedAddress::new(self.hi.addr.prepend(s), self.hi.sign),
        }
    }
}

impl fmt::Display for AddressInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} .. {})", self.lo, self.hi)
    }
}

pub fn interval_contains<O: SymbolOrdering + ?Sized>(ord: &O, i: &AddressInterval, p: &SignedAddress) -> bool {
    if *p == i.lo || *p == i.hi {
        return false;
    }
    signed_cyclic_triple(ord, &i.lo, p, &i.hi).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(text: &str) -> ExternalAddress {
        parse_address(text).unwrap()
    }

    #[test]
    fn shift_examples() {
        assert_eq!(a("0R | 1R").shift(), a("| 1R"));
        assert_eq!(a("| 0R").shift(), a("| 0R"));
        assert_eq!(a("| 0R 1L").shift(), a("| 1L 0R"));
    }

    #[test]
    fn parse_examples() {
        assert_eq!(a("| 0R"), ExternalAddress::constant(Symbol::right(0)));
        assert_eq!(a("0R | 1L 1L").to_string(), "0R | 1L");
        assert_eq!(parse_address("0R 1L |"), Err(AddressError::EmptyPeriod));
        assert!(matches!(parse_address("0R x | 1L"), Err(AddressError::Syntax { pos: 3, .. })));
        assert!(matches!(parse_address("0R 1L"), Err(AddressError::Syntax { .. })));
    }

    #[test]
    fn preperiod_folds_into_period() {
        assert_eq!(a("1L 0R | 1L 0R"), a("| 1L 0R"));
        assert_eq!(a("2R 0R | 1L 0R"), a("2R | 0R 1L"));
    }
}
