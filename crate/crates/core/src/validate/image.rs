//! Confidence intervals for arithmetic combinations of released values.
//!
//! Each of the ℓ sub-queries gets a Gaussian interval at level
//! `β = 1 − (1−γ)/ℓ`; by a union bound every true value lies in its box with
//! probability at least `ℓ(β−1)+1 = γ`, so any set containing the image of
//! the box under `f` is a γ-level interval for `f` of the true values.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use super::check_level;
use super::interval::{ConfidenceInterval, Interval};
use crate::dp::inverse_erf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Self {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn exp(a: Expr) -> Self {
        Expr::Exp(Box::new(a))
    }

    pub fn log(a: Expr) -> Self {
        Expr::Log(Box::new(a))
    }

    /// Number of variables referenced, i.e. one past the largest index.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Var(i) => i + 1,
            Expr::Const(_) => 0,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Neg(a) | Expr::Exp(a) | Expr::Log(a) => a.arity(),
        }
    }

    /// Point evaluation; `None` where `f` is undefined.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        Some(match self {
            Expr::Var(i) => x[*i],
            Expr::Const(c) => *c,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return None;
                }
                a.eval(x)? / d
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Exp(a) => a.eval(x)?.exp(),
            Expr::Log(a) => {
                let v = a.eval(x)?;
                if v <= 0.0 {
                    return None;
                }
                v.ln()
            }
        })
    }

    /// Natural interval extension: an enclosure of `f` over `boxes`, or
    /// `None` if some operation is undefined on its argument interval.
    pub fn enclose(&self, boxes: &[Interval]) -> Option<Interval> {
        Some(match self {
            Expr::Var(i) => boxes[*i],
            Expr::Const(c) => Interval::point(*c),
            Expr::Add(a, b) => a.enclose(boxes)?.add(b.enclose(boxes)?),
            Expr::Sub(a, b) => a.enclose(boxes)?.sub(b.enclose(boxes)?),
            Expr::Mul(a, b) => a.enclose(boxes)?.mul(b.enclose(boxes)?),
            Expr::Div(a, b) => a.enclose(boxes)?.div(b.enclose(boxes)?)?,
            Expr::Neg(a) => a.enclose(boxes)?.neg(),
            Expr::Exp(a) => a.enclose(boxes)?.exp(),
            Expr::Log(a) => a.enclose(boxes)?.ln()?,
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "-{a}"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
        }
    }
}

/// Sub-level used for each of `l` component intervals.
pub fn image_sub_level(gamma: f64, l: usize) -> f64 {
    1.0 - (1.0 - gamma) / l as f64
}

/// Joint level guaranteed by `l` component intervals at level `beta`.
pub fn image_joint_level(beta: f64, l: usize) -> f64 {
    l as f64 * (beta - 1.0) + 1.0
}

const MAX_CORNER_AXES: usize = 8;

/// Tuning of the enclosure search.
#[derive(Debug, Clone, Copy)]
pub struct ImageSearch {
    /// Upper bound on the number of initial grid cells.
    pub grid_cells: usize,
    /// Bisections spent on each end of the image.
    pub refinements: usize,
    /// Stop refining an end once the enclosure and the best sampled value
    /// are this close (relative to the value's magnitude).
    pub tolerance: f64,
}

impl Default for ImageSearch {
    fn default() -> Self {
        Self {
            grid_cells: 4096,
            refinements: 20_000,
            tolerance: 1e-9,
        }
    }
}

/// γ-level CI for `f` applied to the true values behind `noisy`, where
/// `noisy[i]` is a Gaussian release with scale `sigmas[i]`.
pub fn image_ci(f: &Expr, noisy: &[f64], sigmas: &[f64], gamma: f64) -> Result<ConfidenceInterval> {
    image_ci_with(f, noisy, sigmas, gamma, ImageSearch::default())
}

pub fn image_ci_with(
    f: &Expr,
    noisy: &[f64],
    sigmas: &[f64],
    gamma: f64,
    search: ImageSearch,
) -> Result<ConfidenceInterval> {
    check_level(gamma)?;
    let l = noisy.len();
    if l == 0 || sigmas.len() != l {
        return Err(Error::param("one noise scale per sub-query is required"));
    }
    if f.arity() > l {
        return Err(Error::param(format!(
            "expression uses {} variables but {l} values were given",
            f.arity()
        )));
    }
    let e = inverse_erf(image_sub_level(gamma, l))?;
    let boxes: Vec<Interval> = noisy
        .iter()
        .zip(sigmas)
        .map(|(&v, &s)| Interval::around(v, std::f64::consts::SQRT_2 * s * e))
        .collect();
    Ok(ConfidenceInterval::from_option(
        image_enclosure(f, &boxes, search),
        gamma,
    ))
}

/// Outer enclosure of `{f(x) : x ∈ boxes}`, or `None` if `f` may be
/// undefined somewhere on the box.
///
/// The box is split into a grid; each cell is bounded by the natural
/// interval extension, and the cells holding the current lower (upper)
/// bound are bisected along their widest axis until the bound meets a
/// sampled value. The union of cell enclosures always covers the image, so
/// the result stays an outer bound at every stage.
pub fn image_enclosure(f: &Expr, boxes: &[Interval], search: ImageSearch) -> Option<Interval> {
    let l = boxes.len();
    let per_axis = ((search.grid_cells as f64).powf(1.0 / l as f64).floor() as usize).max(1);
    let mut cells = Vec::new();
    let mut idx = vec![0usize; l];
    loop {
        let cell: Vec<Interval> = idx
            .iter()
            .zip(boxes)
            .map(|(&k, b)| {
                let step = b.width() / per_axis as f64;
                let lo = b.lo + step * k as f64;
                let hi = if k + 1 == per_axis { b.hi } else { b.lo + step * (k + 1) as f64 };
                Interval::new(lo, hi)
            })
            .collect();
        cells.push(cell);
        let mut axis = 0;
        loop {
            if axis == l {
                return refine_both(f, cells, search);
            }
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

fn refine_both(f: &Expr, cells: Vec<Vec<Interval>>, search: ImageSearch) -> Option<Interval> {
    let lo = refine_end(f, &cells, search, false)?;
    let hi = refine_end(f, &cells, search, true)?;
    Some(Interval::new(lo, hi))
}

struct Cell {
    key: f64,
    boxes: Vec<Interval>,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.key.total_cmp(&o.key) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        // Max-heap on the key: the most extreme bound comes out first.
        self.key.total_cmp(&o.key)
    }
}

/// Tightens the bound on one end. For the upper end the key is the cell's
/// upper bound; for the lower end it is the negated lower bound, so in both
/// cases the heap top is the cell that currently determines the result.
fn refine_end(f: &Expr, cells: &[Vec<Interval>], search: ImageSearch, upper: bool) -> Option<f64> {
    let key_of = |iv: Interval| if upper { iv.hi } else { -iv.lo };
    let sample = |b: &[Interval]| -> Option<f64> {
        let signed = |v: f64| if upper { v } else { -v };
        let mid: Vec<f64> = b.iter().map(Interval::mid).collect();
        let mut best = f.eval(&mid).map(signed);
        // Corners find the extremes of coordinate-monotone expressions
        // exactly, which ends the refinement at once.
        if b.len() <= MAX_CORNER_AXES {
            let mut x = vec![0.0; b.len()];
            for mask in 0u32..(1 << b.len()) {
                for (i, iv) in b.iter().enumerate() {
                    x[i] = if mask >> i & 1 == 1 { iv.hi } else { iv.lo };
                }
                if let Some(v) = f.eval(&x).map(signed) {
                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                }
            }
        }
        best
    };
    let mut heap = BinaryHeap::with_capacity(cells.len() + 2 * search.refinements);
    let mut best = f64::NEG_INFINITY;
    for c in cells {
        let iv = f.enclose(c)?;
        if let Some(v) = sample(c) {
            best = best.max(v);
        }
        heap.push(Cell {
            key: key_of(iv),
            boxes: c.clone(),
        });
    }
    for _ in 0..search.refinements {
        let top = heap.peek().expect("cells are never removed").key;
        if top - best <= search.tolerance * best.abs().max(1.0) {
            break;
        }
        let cell = heap.pop().expect("nonempty");
        let axis = widest_axis(&cell.boxes);
        let b = cell.boxes[axis];
        if !(b.width() > 0.0) {
            heap.push(cell);
            break;
        }
        let m = b.mid();
        for half in [Interval::new(b.lo, m), Interval::new(m, b.hi)] {
            let mut child = cell.boxes.clone();
            child[axis] = half;
            let iv = f.enclose(&child)?;
            if let Some(v) = sample(&child) {
                best = best.max(v);
            }
            heap.push(Cell {
                key: key_of(iv),
                boxes: child,
            });
        }
    }
    let top = heap.peek().expect("nonempty").key;
    Some(if upper { top } else { -top })
}

fn widest_axis(b: &[Interval]) -> usize {
    let mut best = 0;
    for (i, iv) in b.iter().enumerate() {
        if iv.width() > b[best].width() {
            best = i;
        }
    }
    best
}
