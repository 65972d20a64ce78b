//! Monomial observable dictionaries.
//!
//! Basis order: the coordinate monomials `x_1, ..., x_d` come first (those not
//! excluded), then the constant, then all remaining monomials of degree 2..=n
//! in graded lexicographic order (`x_1^2, x_1 x_2, ..., x_d^2, x_1^3, ...`).

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Exponent vector of a monomial.
pub type MultiIndex = Vec<u32>;

/// An ordered monomial basis `Psi: R^d -> R^M`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DictionaryRepr", into = "DictionaryRepr")]
pub struct Dictionary {
    dim: usize,
    max_degree: u32,
    excluded: Vec<MultiIndex>,
    basis: Vec<MultiIndex>,
}

#[derive(Serialize, Deserialize)]
struct DictionaryRepr {
    dim: usize,
    max_degree: u32,
    excluded: Vec<MultiIndex>,
    basis: Vec<MultiIndex>,
}

impl From<Dictionary> for DictionaryRepr {
    fn from(d: Dictionary) -> Self {
        Self {
            dim: d.dim,
            max_degree: d.max_degree,
            excluded: d.excluded,
            basis: d.basis,
        }
    }
}

impl TryFrom<DictionaryRepr> for Dictionary {
    type Error = Error;

    fn try_from(r: DictionaryRepr) -> Result<Self> {
        Self::from_parts(r.dim, r.max_degree, r.excluded, r.basis)
    }
}

/// Entry of the basis from which one state coordinate can be recovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Witness {
    /// Position in the basis.
    pub index: usize,
    /// Odd exponent of the pure power `x_j^power`; 1 for the coordinate itself.
    pub power: u32,
}

/// All multi-indices in `d` variables with total degree `k`, lexicographically descending.
fn monomials_of_degree(d: usize, k: u32) -> Vec<MultiIndex> {
    fn rec(d: usize, pos: usize, left: u32, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if pos + 1 == d {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e;
            rec(d, pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    if d == 0 {
        return out;
    }
    rec(d, 0, k, &mut vec![0; d], &mut out);
    out
}

fn unit(d: usize, j: usize, power: u32) -> MultiIndex {
    let mut a = vec![0; d];
    a[j] = power;
    a
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

impl Dictionary {
    /// All monomials in `dim` variables of degree at most `max_degree`, minus `excluded`.
    pub fn new(dim: usize, max_degree: u32, excluded: Vec<MultiIndex>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "dictionary dimension must be positive".into(),
            ));
        }
        for a in &excluded {
            check_dim("excluded multi-index", dim, a.len())?;
        }
        let skip: HashSet<&MultiIndex> = excluded.iter().collect();
        let mut basis = Vec::new();
        if max_degree >= 1 {
            basis.extend((0..dim).map(|j| unit(dim, j, 1)));
        }
        basis.push(vec![0; dim]);
        for k in 2..=max_degree {
            basis.extend(monomials_of_degree(dim, k));
        }
        basis.retain(|a| !skip.contains(a));
        Self::from_parts(dim, max_degree, excluded, basis)
    }

    /// Full dictionary without exclusions.
    pub fn full(dim: usize, max_degree: u32) -> Result<Self> {
        Self::new(dim, max_degree, Vec::new())
    }

    /// Validates an explicit basis (used when loading model files).
    pub fn from_parts(
        dim: usize,
        max_degree: u32,
        excluded: Vec<MultiIndex>,
        basis: Vec<MultiIndex>,
    ) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::Schema("dictionary basis is empty".into()));
        }
        let mut seen = HashSet::new();
        for a in &basis {
            if a.len() != dim {
                return Err(Error::Schema(format!(
                    "multi-index {a:?} has length {}, dictionary dimension is {dim}",
                    a.len()
                )));
            }
            if a.iter().sum::<u32>() > max_degree {
                return Err(Error::Schema(format!(
                    "multi-index {a:?} exceeds max degree {max_degree}"
                )));
            }
            if !seen.insert(a.clone()) {
                return Err(Error::Schema(format!("duplicate multi-index {a:?}")));
            }
        }
        if let Some(a) = excluded.iter().find(|a| seen.contains(*a)) {
            return Err(Error::Schema(format!(
                "excluded multi-index {a:?} present in basis"
            )));
        }
        Ok(Self {
            dim,
            max_degree,
            excluded,
            basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of observables `M`.
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    pub fn excluded(&self) -> &[MultiIndex] {
        &self.excluded
    }

    /// `C(d + n, n)`, the size of the full dictionary.
    pub fn full_size(dim: usize, max_degree: u32) -> usize {
        binomial((dim as u64) + max_degree as u64, max_degree as u64) as usize
    }

    pub fn position(&self, alpha: &[u32]) -> Option<usize> {
        self.basis.iter().position(|a| a == alpha)
    }

    fn powers(&self, x: &[f64]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|&v| {
                let mut p = Vec::with_capacity(self.max_degree as usize + 1);
                let mut acc = 1.0;
                for _ in 0..=self.max_degree {
                    p.push(acc);
                    acc *= v;
                }
                p
            })
            .collect()
    }

    /// `Psi(x)`.
    pub fn lift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state passed to lift", self.dim, x.len())?;
        Ok(self.lift_slice(x.as_slice()))
    }

    pub(crate) fn lift_slice(&self, x: &[f64]) -> DVector<f64> {
        let pw = self.powers(x);
        DVector::from_iterator(
            self.len(),
            self.basis.iter().map(|a| {
                a.iter()
                    .enumerate()
                    .map(|(j, &e)| pw[j][e as usize])
                    .product::<f64>()
            }),
        )
    }

    /// `D Psi(x)`, an `M x d` matrix.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim("state passed to jacobian", self.dim, x.len())?;
        let pw = self.powers(x.as_slice());
        let mut jac = DMatrix::zeros(self.len(), self.dim);
        for (k, a) in self.basis.iter().enumerate() {
            for j in 0..self.dim {
                if a[j] == 0 {
                    continue;
                }
                let mut v = a[j] as f64 * pw[j][a[j] as usize - 1];
                for (i, &e) in a.iter().enumerate() {
                    if i != j {
                        v *= pw[i][e as usize];
                    }
                }
                jac[(k, j)] = v;
            }
        }
        Ok(jac)
    }

    /// For each state coordinate, the basis entry it is read from: the coordinate
    /// itself when present, otherwise the lowest odd pure power `x_j^(2k+1)`.
    pub fn witnesses(&self) -> Result<Vec<Witness>> {
        (0..self.dim)
            .map(|j| {
                (0..)
                    .map(|k| 2 * k + 1)
                    .take_while(|&pw| pw <= self.max_degree)
                    .find_map(|pw| {
                        self.position(&unit(self.dim, j, pw))
                            .map(|index| Witness { index, power: pw })
                    })
                    .ok_or(Error::UnsupportedDictionary { coordinate: j })
            })
            .collect()
    }

    /// Reads the state back from a lifted point through the witness entries.
    pub fn invert_on_manifold(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("lifted point", self.len(), z.len())?;
        let w = self.witnesses()?;
        Ok(read_witnesses(&w, z))
    }
}

pub(crate) fn read_witnesses(w: &[Witness], z: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(w.len(), w.iter().map(|w| odd_root(z[w.index], w.power)))
}

/// Real root `v^(1/n)` for odd `n`.
fn odd_root(v: f64, n: u32) -> f64 {
    match n {
        1 => v,
        3 => v.cbrt(),
        _ => v.signum() * v.abs().powf(1.0 / n as f64),
    }
}
