//! Dense two-phase simplex with Bland's rule, over `f64` or exact rationals.
//!
//! Problems are `minimize c.x` subject to `a_i.x (<=|=|>=) b_i` and `x >= 0`.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

/// Field operations plus a sign test.
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Sign with the scalar's zero tolerance: -1, 0 or 1.
    fn sign(&self) -> i8;
    fn to_f64(&self) -> f64;
}

/// Zero tolerance of the floating-point simplex.
pub const F64_TOLERANCE: f64 = 1e-10;

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn sign(&self) -> i8 {
        if *self > F64_TOLERANCE {
            1
        } else if *self < -F64_TOLERANCE {
            -1
        } else {
            0
        }
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        BigRational::from_integer(BigInt::from(1))
    }
    fn sign(&self) -> i8 {
        if self.is_positive() {
            1
        } else if self.is_negative() {
            -1
        } else {
            0
        }
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Exact rational value of a finite float.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite value")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub coefs: Vec<T>,
    pub rel: Relation,
    pub rhs: T,
}

#[derive(Debug, Clone)]
pub struct Problem<T> {
    pub num_vars: usize,
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(objective: Vec<T>) -> Self {
        Problem { num_vars: objective.len(), objective, constraints: Vec::new() }
    }

    pub fn add(&mut self, coefs: Vec<T>, rel: Relation, rhs: T) {
        assert_eq!(coefs.len(), self.num_vars, "constraint width");
        self.constraints.push(Constraint { coefs, rel, rhs });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub x: Vec<T>,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Infeasible,
    Unbounded,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    width: usize,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for x in self.rows[r].iter_mut() {
            *x = x.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c].clone();
            if f.sign() == 0 && f.to_f64() == 0.0 {
                continue;
            }
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                *x = x.clone() - f.clone() * y.clone();
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes the objective stored in row `obj` over columns `< allowed`.
    fn optimize(&mut self, obj: usize, allowed: usize) -> Result<(), LpStatus> {
        let rhs = self.width;
        loop {
            let enter = (0..allowed).find(|&j| self.rows[obj][j].sign() < 0);
            let Some(c) = enter else { return Ok(()) };
            let mut best: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if i >= self.basis.len() || row[c].sign() <= 0 {
                    continue;
                }
                let ratio = row[rhs].clone() / row[c].clone();
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        let d = (ratio.clone() - br.clone()).sign();
                        d < 0 || (d == 0 && self.basis[i] < self.basis[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                None => return Err(LpStatus::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

/// Solves the problem; returns an optimal vertex.
pub fn solve<T: Scalar>(problem: &Problem<T>) -> Result<Solution<T>, LpStatus> {
    let n = problem.num_vars;
    let m = problem.constraints.len();
    // normalize to nonnegative right-hand sides
    let rows: Vec<(Vec<T>, Relation, T)> = problem
        .constraints
        .iter()
        .map(|c| {
            if c.rhs.sign() < 0 {
                let rel = match c.rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coefs.iter().map(|x| -x.clone()).collect(), rel, -c.rhs.clone())
            } else {
                (c.coefs.clone(), c.rel, c.rhs.clone())
            }
        })
        .collect();
    let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let num_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = n + num_slack;
    let width = art_start + num_art;

    let mut tab = Tableau { rows: Vec::with_capacity(m + 2), basis: Vec::with_capacity(m), width };
    let (mut slack, mut art) = (n, art_start);
    for (coefs, rel, rhs) in &rows {
        let mut row = vec![T::zero(); width + 1];
        row[..n].clone_from_slice(coefs);
        row[width] = rhs.clone();
        match rel {
            Relation::Le => {
                row[slack] = T::one();
                tab.basis.push(slack);
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -T::one();
                slack += 1;
                row[art] = T::one();
                tab.basis.push(art);
                art += 1;
            }
            Relation::Eq => {
                row[art] = T::one();
                tab.basis.push(art);
                art += 1;
            }
        }
        tab.rows.push(row);
    }
    // phase-two objective row, then phase-one row
    let mut obj = vec![T::zero(); width + 1];
    obj[..n].clone_from_slice(&problem.objective);
    tab.rows.push(obj);
    let mut phase1 = vec![T::zero(); width + 1];
    for (i, row) in tab.rows[..m].iter().enumerate() {
        if tab.basis[i] >= art_start {
            for (acc, x) in phase1.iter_mut().zip(row) {
                *acc = acc.clone() - x.clone();
            }
        }
    }
    for j in art_start..width {
        phase1[j] = T::zero();
    }
    tab.rows.push(phase1);

    if num_art > 0 {
        tab.optimize(m + 1, width).expect("phase one is bounded");
        if (-tab.rows[m + 1][width].clone()).sign() > 0 {
            return Err(LpStatus::Infeasible);
        }
        // drive artificial variables out of the basis
        let mut i = 0;
        while i < tab.basis.len() {
            if tab.basis[i] >= art_start {
                match (0..art_start).find(|&j| tab.rows[i][j].sign() != 0) {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
    let obj_row = tab.basis.len();
    // price out basic columns from the objective row
    for i in 0..tab.basis.len() {
        let c = tab.basis[i];
        let f = tab.rows[obj_row][c].clone();
        if f.sign() != 0 || f.to_f64() != 0.0 {
            let row = tab.rows[i].clone();
            for (x, y) in tab.rows[obj_row].iter_mut().zip(&row) {
                *x = x.clone() - f.clone() * y.clone();
            }
        }
    }
    tab.optimize(obj_row, art_start)?;
    let mut x = vec![T::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rows[i][width].clone();
        }
    }
    let value = problem
        .objective
        .iter()
        .zip(&x)
        .fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone());
    Ok(Solution { x, value })
}
