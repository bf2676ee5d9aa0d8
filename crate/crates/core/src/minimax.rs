//! Finite matrix games with `+inf` payoffs and Lipschitz inf-convolution.
//!
//! Rows are mixed by the minimizer over the simplex of rows. A row holding
//! `+inf` anywhere is `+inf` everywhere and is dropped from the domain.

use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lp::{self, rational, Problem, Relation, Scalar};
use crate::numfmt::fmt_g17;

/// Games up to this size are solved in exact rational arithmetic.
pub const EXACT_LIMIT: usize = 8;
/// Largest column set for subset enumeration.
pub const MAX_SUBSET_COLUMNS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payoff {
    Finite(f64),
    Inf,
}

/// A real value or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Value {
    Finite(f64),
    PosInf,
}

impl Value {
    pub fn finite(self) -> Option<f64> {
        match self {
            Value::Finite(x) => Some(x),
            Value::PosInf => None,
        }
    }

    /// Equal within `tol`, with `+inf` equal only to itself.
    pub fn close(self, other: Value, tol: f64) -> bool {
        match (self, other) {
            (Value::Finite(a), Value::Finite(b)) => (a - b).abs() <= tol,
            (Value::PosInf, Value::PosInf) => true,
            _ => false,
        }
    }

    /// `self <= other + tol`.
    pub fn le(self, other: Value, tol: f64) -> bool {
        match (self, other) {
            (_, Value::PosInf) => true,
            (Value::PosInf, Value::Finite(_)) => false,
            (Value::Finite(a), Value::Finite(b)) => a <= b + tol,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Finite(x) => f.write_str(&fmt_g17(*x)),
            Value::PosInf => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedGame {
    rows: usize,
    cols: usize,
    payoff: Vec<Payoff>,
}

impl ExtendedGame {
    /// Row-major payoffs; a row with any `+inf` entry must be all `+inf`.
    pub fn new(rows: usize, cols: usize, payoff: Vec<Payoff>) -> Result<Self> {
        if rows == 0 || cols == 0 || payoff.len() != rows * cols {
            return Err(Error::InvalidArgument(format!("game must be {rows} x {cols} and nonempty")));
        }
        for r in 0..rows {
            let row = &payoff[r * cols..(r + 1) * cols];
            let infs = row.iter().filter(|p| **p == Payoff::Inf).count();
            if infs != 0 && infs != cols {
                return Err(Error::InvalidArgument(format!("row {r} mixes +inf and finite payoffs")));
            }
            if row.iter().any(|p| matches!(p, Payoff::Finite(x) if !x.is_finite())) {
                return Err(Error::InvalidArgument(format!("row {r} has a non-finite payoff")));
            }
        }
        Ok(ExtendedGame { rows, cols, payoff })
    }

    /// Game with finite payoffs only.
    pub fn from_matrix(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(rows, cols, values.iter().map(|&x| Payoff::Finite(x)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn payoff(&self, r: usize, c: usize) -> Payoff {
        self.payoff[r * self.cols + c]
    }

    pub fn finite_rows(&self) -> Vec<usize> {
        (0..self.rows).filter(|&r| self.payoff(r, 0) != Payoff::Inf).collect()
    }

    fn value(&self, r: usize, c: usize) -> f64 {
        match self.payoff(r, c) {
            Payoff::Finite(x) => x,
            Payoff::Inf => unreachable!("infinite rows are filtered"),
        }
    }

    /// The game without row `r`.
    pub fn without_row(&self, r: usize) -> Result<Self> {
        let payoff = (0..self.rows)
            .filter(|&i| i != r)
            .flat_map(|i| self.payoff[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect();
        Self::new(self.rows - 1, self.cols, payoff)
    }

    fn exact(&self) -> bool {
        self.rows <= EXACT_LIMIT && self.cols <= EXACT_LIMIT
    }

    /// `rows R cols C` header, then one line of tokens per row.
    pub fn to_text(&self) -> String {
        let mut s = format!("rows {} cols {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|c| match self.payoff(r, c) {
                    Payoff::Finite(x) => fmt_g17(x),
                    Payoff::Inf => "inf".to_string(),
                })
                .collect();
            s += &row.join(" ");
            s.push('\n');
        }
        s
    }
}

/// Parses the `rows R cols C` game format; `#` starts a comment.
pub fn parse_game(text: &str) -> Result<ExtendedGame> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap().trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::Missing("game header"))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || Error::Syntax { line: hline, msg: "expected `rows R cols C`".into() };
    if tok.len() != 4 || tok[0] != "rows" || tok[2] != "cols" {
        return Err(bad_header());
    }
    let rows: usize = tok[1].parse().map_err(|_| bad_header())?;
    let cols: usize = tok[3].parse().map_err(|_| bad_header())?;
    let mut payoff = Vec::with_capacity(rows * cols);
    let mut count = 0;
    for (line, l) in lines {
        let row: Vec<&str> = l.split_whitespace().collect();
        if row.len() != cols {
            return Err(Error::Syntax { line, msg: format!("expected {cols} entries") });
        }
        for t in row {
            payoff.push(match t {
                "inf" | "+inf" => Payoff::Inf,
                _ => Payoff::Finite(t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    Error::Syntax { line, msg: format!("bad payoff `{t}`") }
                })?),
            });
        }
        count += 1;
    }
    if count != rows {
        return Err(Error::Syntax { line: 0, msg: format!("expected {rows} rows, found {count}") });
    }
    ExtendedGame::new(rows, cols, payoff)
}

/// `min over mixed finite rows of max over columns in J` (row LP).
fn row_lp<T: Scalar>(g: &ExtendedGame, cols: &[usize], conv: impl Fn(f64) -> T) -> Value {
    let rows = g.finite_rows();
    if rows.is_empty() {
        return Value::PosInf;
    }
    let nr = rows.len();
    // variables: mu (nr), tau+, tau-
    let mut obj = vec![T::zero(); nr + 2];
    obj[nr] = T::one();
    obj[nr + 1] = -T::one();
    let mut p = Problem::new(obj);
    for &c in cols {
        let mut row: Vec<T> = rows.iter().map(|&r| conv(g.value(r, c))).collect();
        row.push(-T::one());
        row.push(T::one());
        p.add(row, Relation::Le, T::zero());
    }
    let mut simplex = vec![T::one(); nr];
    simplex.extend([T::zero(), T::zero()]);
    p.add(simplex, Relation::Eq, T::one());
    let sol = lp::solve(&p).expect("bounded feasible game LP");
    Value::Finite(sol.value.to_f64())
}

/// `max over mixed columns in J of min over finite rows` (column LP).
fn column_lp<T: Scalar>(g: &ExtendedGame, cols: &[usize], conv: impl Fn(f64) -> T) -> (Value, Vec<f64>) {
    let rows = g.finite_rows();
    if rows.is_empty() {
        return (Value::PosInf, vec![1.0 / cols.len() as f64; cols.len()]);
    }
    let nc = cols.len();
    // variables: lambda (nc), sigma+, sigma-; minimize -sigma
    let mut obj = vec![T::zero(); nc + 2];
    obj[nc] = -T::one();
    obj[nc + 1] = T::one();
    let mut p = Problem::new(obj);
    for &r in &rows {
        let mut row: Vec<T> = cols.iter().map(|&c| -conv(g.value(r, c))).collect();
        row.push(T::one());
        row.push(-T::one());
        p.add(row, Relation::Le, T::zero());
    }
    let mut simplex = vec![T::one(); nc];
    simplex.extend([T::zero(), T::zero()]);
    p.add(simplex, Relation::Eq, T::one());
    let sol = lp::solve(&p).expect("bounded feasible game LP");
    let lambda = sol.x[..nc].iter().map(|x| x.to_f64()).collect();
    (Value::Finite((-sol.value).to_f64()), lambda)
}

fn all_cols(g: &ExtendedGame) -> Vec<usize> {
    (0..g.cols).collect()
}

/// `v_J#`: minimax value restricted to the columns in `cols`.
pub fn v_sharp_on(g: &ExtendedGame, cols: &[usize]) -> Result<Value> {
    if cols.is_empty() || cols.iter().any(|&c| c >= g.cols) {
        return Err(Error::InvalidArgument("column subset must be nonempty and in range".into()));
    }
    Ok(if g.exact() { row_lp::<BigRational>(g, cols, rational) } else { row_lp::<f64>(g, cols, |x| x) })
}

/// `v# = min_x max_y f(x, y)` over the finite-row simplex.
pub fn v_sharp(g: &ExtendedGame) -> Value {
    v_sharp_on(g, &all_cols(g)).expect("all columns")
}

/// `v_flat = max over mixed columns of min over finite rows`.
pub fn v_flat(g: &ExtendedGame) -> Value {
    w_value(g, &all_cols(g)).expect("all columns").0
}

/// `max_y min_x f(x, y)` over pure columns.
pub fn v_flat_pure(g: &ExtendedGame) -> Value {
    let rows = g.finite_rows();
    if rows.is_empty() {
        return Value::PosInf;
    }
    let best = (0..g.cols)
        .map(|c| rows.iter().map(|&r| g.value(r, c)).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    Value::Finite(best)
}

/// `w_J = max over lambda in the simplex on J of min_x <lambda, phi_J(x)>`, with the maximizing lambda.
pub fn w_value(g: &ExtendedGame, cols: &[usize]) -> Result<(Value, Vec<f64>)> {
    if cols.is_empty() || cols.iter().any(|&c| c >= g.cols) {
        return Err(Error::InvalidArgument("column subset must be nonempty and in range".into()));
    }
    Ok(if g.exact() { column_lp::<BigRational>(g, cols, rational) } else { column_lp::<f64>(g, cols, |x| x) })
}

/// `v_natural = max over nonempty J of v_J#`, by subset enumeration.
pub fn v_natural(g: &ExtendedGame) -> Result<Value> {
    if g.cols > MAX_SUBSET_COLUMNS {
        return Err(Error::EnumerationCap {
            what: "column subset",
            count: 2f64.powi(g.cols as i32) - 1.0,
            cap: (1u64 << MAX_SUBSET_COLUMNS) - 1,
        });
    }
    let mut best: Option<Value> = None;
    for mask in 1u32..(1 << g.cols) {
        let cols: Vec<usize> = (0..g.cols).filter(|c| mask >> c & 1 == 1).collect();
        let v = v_sharp_on(g, &cols)?;
        best = Some(match best {
            None => v,
            Some(b) => if v > b { v } else { b },
        });
    }
    Ok(best.unwrap())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxValues {
    pub v_flat: Value,
    pub v_natural: Value,
    pub v_sharp: Value,
}

impl MinimaxValues {
    pub fn compute(g: &ExtendedGame) -> Result<Self> {
        Ok(MinimaxValues { v_flat: v_flat(g), v_natural: v_natural(g)?, v_sharp: v_sharp(g) })
    }

    /// `v_flat <= v_natural <= v_sharp + 1e-9`.
    pub fn chain_holds(&self) -> bool {
        self.v_flat.le(self.v_natural, 1e-9) && self.v_natural.le(self.v_sharp, 1e-9)
    }

    pub fn minmax_equal(&self) -> bool {
        self.v_flat.close(self.v_sharp, 1e-8)
    }

    pub fn csv_header() -> &'static str {
        "game_id,v_flat,v_natural,v_sharp,minmax_equal"
    }

    /// `game-id, v_flat, v_natural, v_sharp, minmax_equal`.
    pub fn csv_row(&self, id: &str) -> String {
        format!("{},{},{},{},{}", id, self.v_flat, self.v_natural, self.v_sharp, self.minmax_equal())
    }
}

/// Checks symmetry, zero diagonal, positivity and the triangle inequality within 1e-12.
pub fn check_metric(d: &[Vec<f64>]) -> Result<()> {
    let n = d.len();
    let tol = 1e-12;
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotAMetric("distance matrix is not square".into()));
        }
        if row[i].abs() > tol {
            return Err(Error::NotAMetric(format!("d({i},{i}) = {}", row[i])));
        }
        for j in 0..n {
            if !row[j].is_finite() || (i != j && row[j] <= 0.0) {
                return Err(Error::NotAMetric(format!("d({i},{j}) = {}", row[j])));
            }
            if (row[j] - d[j][i]).abs() > tol {
                return Err(Error::NotAMetric(format!("d({i},{j}) != d({j},{i})")));
            }
            for k in 0..n {
                if d[i][k] > row[j] + d[j][k] + tol {
                    return Err(Error::NotAMetric(format!("triangle inequality fails at ({i},{j},{k})")));
                }
            }
        }
    }
    Ok(())
}

/// `f_n(x) = min_y f(y) + n d(x, y)` in exact rational arithmetic.
pub fn inf_convolution_exact(f: &[f64], d: &[Vec<f64>], n: f64) -> Result<Vec<BigRational>> {
    check_metric(d)?;
    if d.len() != f.len() {
        return Err(Error::InvalidArgument("f and d disagree in size".into()));
    }
    if !(n >= 0.0) || !n.is_finite() || f.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("slope and values must be finite, slope nonnegative".into()));
    }
    let fr: Vec<BigRational> = f.iter().map(|&x| rational(x)).collect();
    let nr = rational(n);
    Ok((0..f.len())
        .map(|x| {
            (0..f.len())
                .map(|y| {
                    let dist = rational(d[x][y]);
                    if dist.is_zero() {
                        fr[y].clone()
                    } else {
                        &fr[y] + &nr * dist
                    }
                })
                .min()
                .unwrap()
        })
        .collect())
}

/// `f_n`, rounded to the nearest floats.
pub fn inf_convolution(f: &[f64], d: &[Vec<f64>], n: f64) -> Result<Vec<f64>> {
    Ok(inf_convolution_exact(f, d, n)?.iter().map(|x| x.to_f64()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pennies() -> ExtendedGame {
        parse_game("rows 2 cols 2\n1 -1\n-1 1\n").unwrap()
    }

    #[test]
    fn matching_pennies() {
        let g = pennies();
        assert_eq!(v_sharp(&g), Value::Finite(0.0));
        assert_eq!(v_flat(&g), Value::Finite(0.0));
        assert_eq!(v_flat_pure(&g), Value::Finite(-1.0));
        assert_eq!(v_natural(&g).unwrap(), Value::Finite(0.0));
        let (w, lambda) = w_value(&g, &[0, 1]).unwrap();
        assert_eq!(w, Value::Finite(0.0));
        assert_eq!(lambda, vec![0.5, 0.5]);
        assert_eq!(MinimaxValues::compute(&g).unwrap().csv_row("mp"), "mp,0,0,0,true");
    }

    #[test]
    fn single_and_infinite_rows() {
        let g = parse_game("rows 1 cols 2\n0 5\n").unwrap();
        assert_eq!(v_sharp(&g), Value::Finite(5.0));
        assert_eq!(v_flat_pure(&g), Value::Finite(5.0));
        let g = parse_game("rows 2 cols 2\ninf inf\n3 4\n").unwrap();
        assert_eq!(v_sharp(&g), Value::Finite(4.0));
        let all_inf = parse_game("rows 1 cols 1\ninf\n").unwrap();
        assert_eq!(v_sharp(&all_inf), Value::PosInf);
        assert_eq!(v_flat(&all_inf), Value::PosInf);
    }

    #[test]
    fn singleton_subsets() {
        let g = parse_game("rows 3 cols 2\n2 0\n1 3\n5 -1\n").unwrap();
        assert_eq!(w_value(&g, &[0]).unwrap().0, Value::Finite(1.0));
        assert_eq!(v_sharp_on(&g, &[0]).unwrap(), Value::Finite(1.0));
        assert!(w_value(&g, &[]).is_err());
    }

    #[test]
    fn rejects_mixed_rows_and_bad_files() {
        assert!(parse_game("rows 1 cols 2\ninf 1\n").is_err());
        assert!(parse_game("rows 2 cols 2\n1 2\n").is_err());
        assert!(matches!(parse_game("cols 2\n"), Err(Error::Syntax { line: 1, .. })));
        let g = pennies();
        assert_eq!(parse_game(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn inf_convolution_examples() {
        let d = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(inf_convolution(&[0.0, 10.0], &d, 1.0).unwrap(), vec![0.0, 1.0]);
        assert_eq!(inf_convolution(&[0.0, 10.0], &d, 10.0).unwrap(), vec![0.0, 10.0]);
        assert_eq!(inf_convolution(&[3.0, 10.0], &d, 0.0).unwrap(), vec![3.0, 3.0]);
        let bad = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(inf_convolution(&[0.0, 1.0], &bad, 1.0), Err(Error::NotAMetric(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn chain_on_small_games(entries in proptest::collection::vec(-8i32..=8, 9)) {
            let g = ExtendedGame::from_matrix(3, 3, &entries.iter().map(|&x| x as f64 / 2.0).collect::<Vec<_>>()).unwrap();
            let v = MinimaxValues::compute(&g).unwrap();
            prop_assert!(v.chain_holds());
            prop_assert!(v.minmax_equal());
            prop_assert!(v_flat_pure(&g).le(v.v_flat, 0.0));
        }

        #[test]
        fn convolution_is_below_and_lipschitz(f in proptest::collection::vec(-5.0f64..5.0, 4), n in 0.0f64..10.0) {
            let d = vec![
                vec![0.0, 1.0, 2.0, 1.5],
                vec![1.0, 0.0, 1.0, 1.5],
                vec![2.0, 1.0, 0.0, 1.5],
                vec![1.5, 1.5, 1.5, 0.0],
            ];
            let fnx = inf_convolution(&f, &d, n).unwrap();
            for x in 0..4 {
                prop_assert!(fnx[x] <= f[x]);
                for y in 0..4 {
                    prop_assert!(fnx[x] - fnx[y] <= n * d[x][y] + 1e-12);
                }
            }
        }
    }
}
