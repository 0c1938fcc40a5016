//! Finitely supported probability measures on the parameter space `X` and on
//! `Z = Graph(F) ⊂ X × Y`.
//!
//! A measure is an ordered list of weighted atoms. Iteration order is stable so
//! that seeded runs reproduce bit-for-bit. Atoms whose coordinates agree on the
//! `1e-12` lattice are merged by the operations below.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Componentwise tolerance used to identify duplicate atoms.
pub const MERGE_TOL: f64 = 1e-12;

/// Tolerance on `Σ w = 1`.
pub const WEIGHT_TOL: f64 = 1e-12;

/// A point `x` of the parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamPoint(pub Vec<f64>);

/// A decision `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Decision(pub Vec<f64>);

impl ParamPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        ParamPoint(coords)
    }

    pub fn scalar(v: f64) -> Self {
        ParamPoint(vec![v])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// First coordinate; the models with a one-dimensional `X` use this.
    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn approx_eq(&self, other: &ParamPoint, tol: f64) -> bool {
        coords_close(&self.0, &other.0, tol)
    }
}

impl Decision {
    pub fn new(coords: Vec<f64>) -> Self {
        Decision(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn approx_eq(&self, other: &Decision, tol: f64) -> bool {
        coords_close(&self.0, &other.0, tol)
    }
}

fn coords_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(u, v)| (u - v).abs() <= tol)
}

/// Which space a measure lives on.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    X,
    Z,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Space::X => write!(f, "X"),
            Space::Z => write!(f, "Z"),
        }
    }
}

/// A weighted atom. `y` is absent for measures on `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: ParamPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Decision>,
    pub w: f64,
}

impl Atom {
    pub fn on_x(x: ParamPoint, w: f64) -> Self {
        Atom { x, y: None, w }
    }

    pub fn on_z(x: ParamPoint, y: Decision, w: f64) -> Self {
        Atom { x, y: Some(y), w }
    }

    /// The decision of an atom on `Z`.
    ///
    /// Panics on an `X` atom; measures tagged `Z` are validated to carry one.
    pub fn decision(&self) -> &Decision {
        self.y.as_ref().expect("atom on Z carries a decision")
    }

    fn same_location(&self, other: &Atom) -> bool {
        lattice_eq(&self.x.0, &other.x.0)
            && match (&self.y, &other.y) {
                (None, None) => true,
                (Some(a), Some(b)) => lattice_eq(&a.0, &b.0),
                _ => false,
            }
    }

    fn location_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for v in &self.x.0 {
            lattice_key(*v).hash(&mut h);
        }
        if let Some(y) = &self.y {
            u8::MAX.hash(&mut h);
            for v in &y.0 {
                lattice_key(*v).hash(&mut h);
            }
        }
        h.finish()
    }
}

fn lattice_key(v: f64) -> i64 {
    // saturating cast; coordinates beyond ~9e6 merge only when bit-identical
    let k = (v / MERGE_TOL).round();
    if k.abs() < 9.0e18 {
        k as i64
    } else {
        v.to_bits() as i64
    }
}

fn lattice_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(u, v)| lattice_key(*u) == lattice_key(*v))
}

/// Hash index over atom locations, used to merge duplicates in linear time.
#[derive(Default, Debug, Clone)]
pub(crate) struct AtomIndex {
    buckets: HashMap<u64, Vec<usize>>,
}

impl AtomIndex {
    /// Returns the index of an atom in `atoms` at the same location as `atom`,
    /// or registers `atom` as the future element `atoms.len()`.
    pub(crate) fn find_or_register(&mut self, atoms: &[Atom], atom: &Atom) -> Option<usize> {
        let bucket = self.buckets.entry(atom.location_hash()).or_default();
        if let Some(&i) = bucket.iter().find(|&&i| atoms[i].same_location(atom)) {
            return Some(i);
        }
        bucket.push(atoms.len());
        None
    }
}

/// Merges duplicate atoms (first occurrence keeps its position) and drops zero weights.
pub fn merge_atoms(atoms: impl IntoIterator<Item = Atom>) -> Vec<Atom> {
    let mut index = AtomIndex::default();
    let mut out: Vec<Atom> = Vec::new();
    for atom in atoms {
        if atom.w == 0.0 {
            continue;
        }
        match index.find_or_register(&out, &atom) {
            Some(i) => out[i].w += atom.w,
            None => out.push(atom),
        }
    }
    out
}

/// A finitely supported probability measure on `X` or `Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct EmpiricalMeasure {
    space: Space,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawMeasure {
    space: Space,
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for EmpiricalMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        EmpiricalMeasure::new(raw.space, raw.atoms)
    }
}

impl EmpiricalMeasure {
    /// Validates and wraps an atom list. Atoms are kept as given (no merging).
    pub fn new(space: Space, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let mut total = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            if !(a.w.is_finite() && a.w >= 0.0) {
                return Err(Error::InvalidMeasure(format!("atom {i} has weight {}", a.w)));
            }
            if a.x.0.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMeasure(format!("atom {i} has a non-finite x")));
            }
            match (space, &a.y) {
                (Space::X, Some(_)) => {
                    return Err(Error::InvalidMeasure(format!("atom {i} carries a decision on X")))
                }
                (Space::Z, None) => {
                    return Err(Error::InvalidMeasure(format!("atom {i} lacks a decision on Z")))
                }
                (Space::Z, Some(y)) if y.0.iter().any(|v| !v.is_finite()) => {
                    return Err(Error::InvalidMeasure(format!("atom {i} has a non-finite y")))
                }
                _ => {}
            }
            total += a.w;
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, expected 1")));
        }
        Ok(EmpiricalMeasure { space, atoms })
    }

    /// Like [`EmpiricalMeasure::new`], rescaling the weights to sum to one first.
    pub fn normalized(space: Space, mut atoms: Vec<Atom>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.w).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMeasure(format!("total mass {total}")));
        }
        for a in &mut atoms {
            a.w /= total;
        }
        Self::new(space, atoms)
    }

    /// `(1/N) Σ δ_{x_i}`.
    pub fn uniform_x(points: Vec<ParamPoint>) -> Result<Self> {
        let n = points.len() as f64;
        Self::new(Space::X, points.into_iter().map(|x| Atom::on_x(x, 1.0 / n)).collect())
    }

    /// `(1/N) Σ δ_{(x_i, y_i)}` without merging, so the support has exactly `N` atoms.
    pub fn uniform_z(points: Vec<(ParamPoint, Decision)>) -> Result<Self> {
        let n = points.len() as f64;
        Self::new(Space::Z, points.into_iter().map(|(x, y)| Atom::on_z(x, y, 1.0 / n)).collect())
    }

    pub fn dirac_x(x: ParamPoint) -> Self {
        EmpiricalMeasure { space: Space::X, atoms: vec![Atom::on_x(x, 1.0)] }
    }

    pub fn dirac_z(x: ParamPoint, y: Decision) -> Self {
        EmpiricalMeasure { space: Space::Z, atoms: vec![Atom::on_z(x, y, 1.0)] }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<Atom> {
        self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    /// `true` when every weight equals `1/len` up to `tol`.
    pub fn is_uniform(&self, tol: f64) -> bool {
        let w = 1.0 / self.atoms.len() as f64;
        self.atoms.iter().all(|a| (a.w - w).abs() <= tol)
    }

    /// Same measure with duplicate atoms merged.
    pub fn merged(&self) -> Self {
        EmpiricalMeasure { space: self.space, atoms: merge_atoms(self.atoms.iter().cloned()) }
    }

    /// `π₁#μ`: sums the weights of atoms sharing the same `x`.
    pub fn first_marginal(&self) -> Result<EmpiricalMeasure> {
        self.expect_space(Space::Z)?;
        let atoms = merge_atoms(self.atoms.iter().map(|a| Atom::on_x(a.x.clone(), a.w)));
        Ok(EmpiricalMeasure { space: Space::X, atoms })
    }

    /// Splits a measure on `Z` into its first marginal and the conditional laws `μ_x`.
    pub fn disintegrate(&self) -> Result<ConditionalFamily> {
        self.expect_space(Space::Z)?;
        let mut entries: Vec<Conditional> = Vec::new();
        let mut index = AtomIndex::default();
        let mut keys: Vec<Atom> = Vec::new();
        for a in &self.atoms {
            let key = Atom::on_x(a.x.clone(), 1.0);
            let slot = match index.find_or_register(&keys, &key) {
                Some(i) => i,
                None => {
                    keys.push(key);
                    entries.push(Conditional { x: a.x.clone(), weight: 0.0, decisions: Vec::new() });
                    entries.len() - 1
                }
            };
            let entry = &mut entries[slot];
            entry.weight += a.w;
            let y = a.decision();
            match entry.decisions.iter_mut().find(|(d, _)| lattice_eq(&d.0, &y.0)) {
                Some((_, w)) => *w += a.w,
                None => entry.decisions.push((y.clone(), a.w)),
            }
        }
        for e in &mut entries {
            if e.weight > 0.0 {
                for (_, w) in &mut e.decisions {
                    *w /= e.weight;
                }
            }
        }
        entries.retain(|e| e.weight > 0.0);
        Ok(ConditionalFamily { entries })
    }

    /// `(1 - ω) self + ω other`, duplicates merged.
    pub fn mix(&self, other: &EmpiricalMeasure, omega: f64) -> Result<EmpiricalMeasure> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch {
                expected: self.space.to_string(),
                found: other.space.to_string(),
            });
        }
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::invalid(format!("mixing weight {omega} outside [0, 1]")));
        }
        let left = self.atoms.iter().map(|a| Atom { w: (1.0 - omega) * a.w, ..a.clone() });
        let right = other.atoms.iter().map(|a| Atom { w: omega * a.w, ..a.clone() });
        Ok(EmpiricalMeasure { space: self.space, atoms: merge_atoms(left.chain(right)) })
    }

    /// Push-forward by an atom map; weights travel with their atoms and duplicates merge.
    pub fn push_forward<F>(&self, space: Space, mut map: F) -> Result<EmpiricalMeasure>
    where
        F: FnMut(&Atom) -> (ParamPoint, Option<Decision>),
    {
        let moved: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| {
                let (x, y) = map(a);
                Atom { x, y, w: a.w }
            })
            .collect();
        Self::new(space, merge_atoms(moved))
    }

    /// `Σ w φ(atom)`.
    pub fn integrate<F: Fn(&Atom) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|a| a.w * f(a)).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One atom per row: `w,x0,..,y0,..`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let dx = self.atoms[0].x.0.len();
        let dy = self.atoms[0].y.as_ref().map_or(0, |y| y.0.len());
        let mut header = vec!["w".to_string()];
        header.extend((0..dx).map(|i| format!("x{i}")));
        header.extend((0..dy).map(|i| format!("y{i}")));
        out.write_record(&header)?;
        for a in &self.atoms {
            let mut row = vec![a.w.to_string()];
            row.extend(a.x.0.iter().map(|v| v.to_string()));
            if let Some(y) = &a.y {
                row.extend(y.0.iter().map(|v| v.to_string()));
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    fn expect_space(&self, space: Space) -> Result<()> {
        if self.space == space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch { expected: space.to_string(), found: self.space.to_string() })
        }
    }
}

/// The conditional law `μ_x` of a measure on `Z` at one support point of its marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditional {
    pub x: ParamPoint,
    /// Marginal weight of `x`.
    pub weight: f64,
    /// Decisions with conditional probabilities summing to one.
    pub decisions: Vec<(Decision, f64)>,
}

/// Disintegration of a measure on `Z` with respect to its first marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalFamily {
    pub entries: Vec<Conditional>,
}

impl ConditionalFamily {
    pub fn marginal(&self) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::new(
            Space::X,
            self.entries.iter().map(|e| Atom::on_x(e.x.clone(), e.weight)).collect(),
        )
    }

    /// `Σ_x m(x) δ_x ⊗ μ_x`.
    pub fn recompose(&self) -> Result<EmpiricalMeasure> {
        let atoms = self.entries.iter().flat_map(|e| {
            e.decisions.iter().map(move |(y, p)| Atom::on_z(e.x.clone(), y.clone(), e.weight * p))
        });
        EmpiricalMeasure::new(Space::Z, merge_atoms(atoms))
    }
}
