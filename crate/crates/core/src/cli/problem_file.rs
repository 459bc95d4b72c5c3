//! Problem files: JSON documents describing a problem, loaded with
//! path-precise error messages.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::drom::{minmax_to_drom, ConeYBlock, ConeYKind, DromProblem};
use crate::error::{DromError, Result};
use crate::momentkit::SemiAlgSet;
use crate::polycore::{basis, Poly};

pub const MONOMIAL_ORDER: &str = "grlex";

/// One monomial term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exponent: Vec<u32>,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensions {
    /// decision variables
    pub n: usize,
    /// random variables
    pub p: usize,
    /// degree of `h` in the random variables
    pub d: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionConstraint {
    pub terms: Vec<Term>,
    #[serde(default)]
    pub equality: bool,
}

/// A term `coefficient * x^x * xi^xi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilinearTerm {
    pub x: Vec<u32>,
    pub xi: Vec<u32>,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixH {
    /// row-major, one row per monomial of `[xi]_d` in graded order
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HSpec {
    Matrix(MatrixH),
    BilinearTerms(Vec<BilinearTerm>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyhedralSpec {
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    #[serde(default)]
    pub equalities: usize,
    #[serde(default)]
    pub homogenized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmiSpec {
    /// one symmetric matrix per moment coordinate
    pub coeff_mats: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub bounded: bool,
    #[serde(default)]
    pub homogenized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondOrderSpec {
    pub rows: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    #[serde(default)]
    pub homogenized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MomentBlock {
    Polyhedral(PolyhedralSpec),
    Lmi(LmiSpec),
    SecondOrder(SecondOrderSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball_radius: Option<f64>,
}

/// Reference values a bundled example is checked against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub optimal_value: f64,
    pub optimal_value_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_tol: Option<f64>,
}

/// Min-max input `min_{x in X} sup_mu E_mu[F(x, xi)]`; replaces
/// `objective` and `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinMaxSpec {
    pub objective: Vec<BilinearTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub monomial_order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub dimensions: Dimensions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Vec<Term>>,
    #[serde(default)]
    pub decision_constraints: Vec<DecisionConstraint>,
    pub support: Vec<Vec<Term>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<HSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minmax: Option<MinMaxSpec>,
    pub moment_set: Vec<MomentBlock>,
    #[serde(default)]
    pub options: FileOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

fn input_err(path: &str, message: impl Into<String>) -> DromError {
    DromError::Input {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Parse a document, reporting the JSON path of the first offending field.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        input_err(origin, format!("at `{at}`: {}", e.inner()))
    })
}

fn terms_to_poly(terms: &[Term], nvars: usize, at: &str, origin: &str) -> Result<Poly> {
    for (i, t) in terms.iter().enumerate() {
        if t.exponent.len() != nvars {
            return Err(input_err(
                origin,
                format!(
                    "at `{at}[{i}].exponent`: expected {nvars} entries, found {}",
                    t.exponent.len()
                ),
            ));
        }
    }
    Poly::from_terms(nvars, terms.iter().map(|t| (t.exponent.clone(), t.coefficient)))
        .map_err(|e| input_err(origin, format!("at `{at}`: {e}")))
}

fn bilinear_to_poly(terms: &[BilinearTerm], n: usize, p: usize, at: &str, origin: &str) -> Result<Poly> {
    let mut h = Poly::zero(n + p);
    for (i, t) in terms.iter().enumerate() {
        if t.x.len() != n || t.xi.len() != p {
            return Err(input_err(
                origin,
                format!("at `{at}[{i}]`: expected {n} x-exponents and {p} xi-exponents"),
            ));
        }
        let mut e = t.x.clone();
        e.extend_from_slice(&t.xi);
        h.add_term(e.into(), t.coefficient);
    }
    Ok(h)
}

fn matrix(rows: &[Vec<f64>], ncols: usize, at: &str, origin: &str) -> Result<DMatrix<f64>> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(input_err(
                origin,
                format!("at `{at}[{i}]`: expected {ncols} columns, found {}", r.len()),
            ));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn square(rows: &[Vec<f64>], at: &str, origin: &str) -> Result<DMatrix<f64>> {
    matrix(rows, rows.len(), at, origin)
}

impl ProblemFile {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let file: ProblemFile = parse_json(text, origin)?;
        if file.monomial_order != MONOMIAL_ORDER {
            return Err(input_err(
                origin,
                format!(
                    "at `monomial_order`: expected \"{MONOMIAL_ORDER}\", found \"{}\"",
                    file.monomial_order
                ),
            ));
        }
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| input_err(&origin, e.to_string()))?;
        Self::from_json(&text, &origin)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    /// Decision dimension of the assembled problem (`n + 1` for min-max
    /// input, which adds the epigraph variable first).
    pub fn decision_dim(&self) -> usize {
        self.dimensions.n + usize::from(self.minmax.is_some())
    }

    fn moment_blocks(&self, origin: &str) -> Result<Vec<ConeYBlock>> {
        let Dimensions { p, d, .. } = self.dimensions;
        let ydim = basis(p, d).len();
        let mut out = Vec::with_capacity(self.moment_set.len());
        for (i, blk) in self.moment_set.iter().enumerate() {
            let at = format!("moment_set[{i}]");
            let (kind, homogenized) = match blk {
                MomentBlock::Polyhedral(s) => (
                    ConeYKind::Polyhedral {
                        t: matrix(&s.t, ydim, &format!("{at}.polyhedral.T"), origin)?,
                        u: s.u.clone(),
                        equalities: s.equalities,
                    },
                    s.homogenized,
                ),
                MomentBlock::Lmi(s) => {
                    let b = square(&s.b, &format!("{at}.lmi.B"), origin)?;
                    let mut mats = Vec::with_capacity(s.coeff_mats.len());
                    for (j, m) in s.coeff_mats.iter().enumerate() {
                        mats.push(square(m, &format!("{at}.lmi.coeff_mats[{j}]"), origin)?);
                    }
                    (
                        ConeYKind::Lmi {
                            coeff_mats: mats,
                            b,
                            bounded: s.bounded,
                        },
                        s.homogenized,
                    )
                }
                MomentBlock::SecondOrder(s) => (
                    ConeYKind::SecondOrder {
                        rows: matrix(&s.rows, ydim, &format!("{at}.second_order.rows"), origin)?,
                        offset: s.offset.clone(),
                    },
                    s.homogenized,
                ),
            };
            let block = ConeYBlock { kind, homogenized };
            block
                .validate(ydim)
                .map_err(|e| input_err(origin, format!("at `{at}`: {e}")))?;
            out.push(block);
        }
        Ok(out)
    }

    /// Build the problem instance.
    pub fn to_problem(&self, origin: &str) -> Result<DromProblem> {
        let Dimensions { n, p, d } = self.dimensions;
        let mut c = Vec::new();
        for (i, dc) in self.decision_constraints.iter().enumerate() {
            let q = terms_to_poly(&dc.terms, n, &format!("decision_constraints[{i}].terms"), origin)?;
            if dc.equality {
                c.push(-&q);
            }
            c.push(q);
        }
        let mut gens = Vec::with_capacity(self.support.len());
        for (i, g) in self.support.iter().enumerate() {
            gens.push(terms_to_poly(g, p, &format!("support[{i}]"), origin)?);
        }
        let support = SemiAlgSet::new(p, gens)?;
        let blocks = self.moment_blocks(origin)?;
        let wrap = |e: DromError| match e {
            e @ DromError::Input { .. } => e,
            e => input_err(origin, e.to_string()),
        };
        if let Some(mm) = &self.minmax {
            if self.objective.is_some() || self.h.is_some() {
                return Err(input_err(
                    origin,
                    "at `minmax`: cannot be combined with `objective` or `h`",
                ));
            }
            let obj = bilinear_to_poly(&mm.objective, n, p, "minmax.objective", origin)?;
            return minmax_to_drom(&obj, n, &c, support, blocks, Some(d)).map_err(wrap);
        }
        let objective = self
            .objective
            .as_ref()
            .ok_or_else(|| input_err(origin, "at `objective`: missing field"))?;
        let f = terms_to_poly(objective, n, "objective", origin)?;
        let h = self
            .h
            .as_ref()
            .ok_or_else(|| input_err(origin, "at `h`: missing field"))?;
        match h {
            HSpec::Matrix(m) => {
                let a = matrix(&m.a, n, "h.matrix.A", origin)?;
                DromProblem::new(n, p, d, f, c, support, a, m.b.clone(), blocks).map_err(wrap)
            }
            HSpec::BilinearTerms(terms) => {
                let hp = bilinear_to_poly(terms, n, p, "h.bilinear_terms", origin)?;
                DromProblem::with_h_poly(n, p, f, c, support, &hp, blocks, Some(d)).map_err(wrap)
            }
        }
    }
}

/// Regenerate bilinear terms from `(A, b)`, in graded row order.
pub fn bilinear_terms(problem: &DromProblem) -> Vec<BilinearTerm> {
    let bs = basis(problem.p, problem.d);
    let mut out = Vec::new();
    for (r, alpha) in bs.iter().enumerate() {
        if problem.b[r] != 0.0 {
            out.push(BilinearTerm {
                x: vec![0; problem.n],
                xi: alpha.powers().to_vec(),
                coefficient: problem.b[r],
            });
        }
        for j in 0..problem.n {
            let v = problem.a[(r, j)];
            if v != 0.0 {
                let mut x = vec![0; problem.n];
                x[j] = 1;
                out.push(BilinearTerm {
                    x,
                    xi: alpha.powers().to_vec(),
                    coefficient: v,
                });
            }
        }
    }
    out
}
