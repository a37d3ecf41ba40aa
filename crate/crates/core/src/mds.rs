//! Plane-level MDS base code: parity-check construction and erasure solving.
//!
//! The cube codec works plane by plane; every plane is a codeword of one
//! [n, n-r] MDS code given by an r x n parity-check matrix Theta. Repair and
//! data collection reduce to solving r parity equations for at most r unknown
//! columns, optionally with per-column scale factors (the coupling constant
//! multiplies the non-fixed columns of a repair system).

use crate::gf::{FieldTable, Gf};
use crate::{Error, Result};

/// Parity-check construction flavor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaKind {
    /// theta[l][j] = p_j^l over n distinct points in exp-table order.
    Vandermonde,
    /// [P | I]: Cauchy block on the first n-r columns, identity on the last
    /// r, so the parity positions are explicit.
    CauchyIdentity,
}

impl ThetaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ThetaKind::Vandermonde => "vandermonde",
            ThetaKind::CauchyIdentity => "cauchy_identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vandermonde" => Ok(ThetaKind::Vandermonde),
            "cauchy_identity" => Ok(ThetaKind::CauchyIdentity),
            _ => Err(Error::ManifestFormat(format!("unknown theta kind {s:?}"))),
        }
    }
}

/// r x n parity-check matrix with every r-column minor invertible.
#[derive(Clone, Debug)]
pub struct Theta {
    pub kind: ThetaKind,
    rows: usize,
    cols: usize,
    data: Vec<Gf>,
}

impl Theta {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, l: usize, j: usize) -> Gf {
        self.data[l * self.cols + j]
    }
}

/// Builds the r x n parity-check matrix of the requested kind.
///
/// Points are the field's nonzero elements in exp-table order (0 appended
/// when n = Q); data column j always uses point j, and the Cauchy row points
/// are the trailing n-r of the same sequence.
pub fn build_theta(rows: usize, n: usize, field: &FieldTable, kind: ThetaKind) -> Result<Theta> {
    if rows == 0 || rows > n {
        return Err(Error::TooManyParities { rows, n });
    }
    let pts = field.points(n)?;
    let mut data = vec![Gf::ZERO; rows * n];
    match kind {
        ThetaKind::Vandermonde => {
            for l in 0..rows {
                for j in 0..n {
                    data[l * n + j] = field.pow(pts[j], l);
                }
            }
        }
        ThetaKind::CauchyIdentity => {
            let k = n - rows;
            for l in 0..rows {
                let a = pts[k + l];
                for j in 0..k {
                    data[l * n + j] = field.inv(field.add(a, pts[j]));
                }
                data[l * n + k + l] = Gf::ONE;
            }
        }
    }
    Ok(Theta {
        kind,
        rows,
        cols: n,
        data,
    })
}

/// Checks the MDS property exhaustively: every r x r column minor of theta
/// must be invertible.
pub fn verify_mds(field: &FieldTable, theta: &Theta) -> bool {
    let r = theta.rows;
    let mut pick: Vec<usize> = (0..r).collect();
    loop {
        if !minor_invertible(field, theta, &pick) {
            return false;
        }
        // Advance the combination in lexicographic order.
        let mut i = r;
        loop {
            if i == 0 {
                return true;
            }
            i -= 1;
            if pick[i] != i + theta.cols - r {
                break;
            }
        }
        if pick[i] == i + theta.cols - r {
            return true;
        }
        pick[i] += 1;
        for j in i + 1..r {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

fn minor_invertible(field: &FieldTable, theta: &Theta, cols: &[usize]) -> bool {
    let r = theta.rows;
    let mut m = vec![Gf::ZERO; r * r];
    for l in 0..r {
        for (i, &j) in cols.iter().enumerate() {
            m[l * r + i] = theta.at(l, j);
        }
    }
    for col in 0..r {
        let pivot = (col..r).find(|&row| !m[row * r + col].is_zero());
        let Some(pivot) = pivot else { return false };
        if pivot != col {
            for j in 0..r {
                m.swap(pivot * r + j, col * r + j);
            }
        }
        let inv = field.inv(m[col * r + col]);
        for row in col + 1..r {
            let factor = field.mul(m[row * r + col], inv);
            if factor.is_zero() {
                continue;
            }
            for j in col..r {
                let sub = field.mul(factor, m[col * r + j]);
                m[row * r + j] = field.add(m[row * r + j], sub);
            }
        }
    }
    true
}

/// Solves the parity system of `theta` for the values of `unknowns`.
///
/// The equations are, for each parity row l:
///
/// ```text
///   sum_{j in unknowns} theta[l][j] * scale_j * s_j
///     = rhs_adjust[l] + sum_{(j, v) in known} theta[l][j] * scale_j * v
/// ```
///
/// (characteristic 2, so the sign of the right-hand side is immaterial).
/// Columns in neither map contribute zero; callers fold companion terms and
/// previously recovered symbols into `rhs_adjust`. `col_scale` entries default
/// to 1 and must be nonzero. Returns the solved values in `unknowns` order.
/// With more parities than unknowns the leftover equations are checked for
/// consistency, so an empty `unknowns` list acts as a parity verifier.
pub fn smds_decode(
    field: &FieldTable,
    theta: &Theta,
    known: &[(usize, Gf)],
    unknowns: &[usize],
    rhs_adjust: &[Gf],
    col_scale: &[(usize, Gf)],
) -> Result<Vec<Gf>> {
    let r = theta.rows;
    let u = unknowns.len();
    if u > r {
        return Err(Error::TooManyUnknowns(u, r));
    }
    if !rhs_adjust.is_empty() && rhs_adjust.len() != r {
        return Err(Error::BadParameter(
            "rhs_adjust length must be 0 or the parity count",
        ));
    }
    let scale_of = |j: usize| -> Gf {
        col_scale
            .iter()
            .find(|(c, _)| *c == j)
            .map(|&(_, s)| s)
            .unwrap_or(Gf::ONE)
    };

    // Augmented system, one row per parity equation.
    let mut aug = vec![Gf::ZERO; r * (u + 1)];
    for l in 0..r {
        for (i, &j) in unknowns.iter().enumerate() {
            aug[l * (u + 1) + i] = field.mul(theta.at(l, j), scale_of(j));
        }
        let mut rhs = rhs_adjust.get(l).copied().unwrap_or(Gf::ZERO);
        for &(j, v) in known {
            let coeff = field.mul(theta.at(l, j), scale_of(j));
            rhs = field.add(rhs, field.mul(coeff, v));
        }
        aug[l * (u + 1) + u] = rhs;
    }

    // Gauss-Jordan with row pivoting; works for square and over-determined
    // systems alike.
    let w = u + 1;
    for col in 0..u {
        let pivot = (col..r).find(|&row| !aug[row * w + col].is_zero());
        let Some(pivot) = pivot else {
            return Err(Error::SingularSystem("no pivot for unknown column"));
        };
        if pivot != col {
            for j in 0..w {
                aug.swap(pivot * w + j, col * w + j);
            }
        }
        let inv = field.inv(aug[col * w + col]);
        for j in col..w {
            aug[col * w + j] = field.mul(aug[col * w + j], inv);
        }
        for row in 0..r {
            if row == col {
                continue;
            }
            let factor = aug[row * w + col];
            if factor.is_zero() {
                continue;
            }
            for j in col..w {
                let sub = field.mul(factor, aug[col * w + j]);
                aug[row * w + j] = field.add(aug[row * w + j], sub);
            }
        }
    }
    // Leftover rows must have vanished entirely.
    for row in u..r {
        if !aug[row * w + u].is_zero() {
            return Err(Error::InconsistentSystem);
        }
    }
    Ok((0..u).map(|i| aug[i * w + u]).collect())
}
