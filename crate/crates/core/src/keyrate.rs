//! Secret-key fraction calculators: one-way BB84, one-way six-state, the
//! six-state protocol with advantage distillation (Z or X/Y extraction),
//! symmetric-protocol sifting and rate assembly R = Y r / N_modes.

use crate::error::{Error, Result};

const COEFF_TOL: f64 = 1e-12;
const SUM_TOL: f64 = 1e-10;

/// Average quantum bit error rates in the X, Y and Z bases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberTriple {
    pub e_x: f64,
    pub e_y: f64,
    pub e_z: f64,
}

impl QberTriple {
    /// All schemes here produce e_x = e_y; this constructor asserts it.
    pub fn symmetric_xy(e_xy: f64, e_z: f64) -> Self {
        QberTriple { e_x: e_xy, e_y: e_xy, e_z }
    }

    pub fn e_xy(&self) -> f64 {
        debug_assert!((self.e_x - self.e_y).abs() < 1e-9, "e_x != e_y");
        (self.e_x + self.e_y) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("e_x", self.e_x), ("e_y", self.e_y), ("e_z", self.e_z)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid_parameter(name, "must be in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Key-extraction basis for advantage distillation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionBasis {
    Z,
    Xy,
}

/// Bell-diagonal coefficients (p00, p01, p10, p11) in the psi(x, z) labeling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellDiagCoefficients {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl BellDiagCoefficients {
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        let clamp = |v: f64, name: &str| -> Result<f64> {
            if v < -COEFF_TOL {
                return Err(Error::UnphysicalQber {
                    e_xy: f64::NAN,
                    half_ez: v,
                });
            }
            let _ = name;
            Ok(v.max(0.0))
        };
        let p00 = clamp(p00, "p00")?;
        let p01 = clamp(p01, "p01")?;
        let p10 = clamp(p10, "p10")?;
        let p11 = clamp(p11, "p11")?;
        let sum = p00 + p01 + p10 + p11;
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::NotNormalized(sum));
        }
        Ok(BellDiagCoefficients { p00, p01, p10, p11 })
    }

    /// Mapping from (e_z, e_xy) for key extraction in the given basis.
    pub fn from_qber(e: &QberTriple, basis: ExtractionBasis) -> Result<Self> {
        e.validate()?;
        let e_z = e.e_z;
        let e_xy = e.e_xy();
        if e_xy < e.e_z / 2.0 - COEFF_TOL {
            return Err(Error::UnphysicalQber { e_xy, half_ez: e_z / 2.0 });
        }
        let p00 = 1.0 - e_z / 2.0 - e_xy;
        let off = (e_xy - e_z / 2.0).max(0.0);
        match basis {
            ExtractionBasis::Z => Self::new(p00, off, e_z / 2.0, e_z / 2.0),
            ExtractionBasis::Xy => Self::new(p00, e_z / 2.0, off, e_z / 2.0),
        }
    }
}

/// Binary entropy with the 0 log 0 = 0 convention.
pub fn binary_entropy(x: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x), "binary_entropy domain: {x}");
    if x == 0.0 || x == 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

fn entropy_term(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

fn shannon4(p: &BellDiagCoefficients) -> f64 {
    entropy_term(p.p00) + entropy_term(p.p01) + entropy_term(p.p10) + entropy_term(p.p11)
}

/// Fully asymmetric BB84 with one-way post-processing.
pub fn bb84_oneway(e: &QberTriple) -> f64 {
    (1.0 - binary_entropy(clamp01(e.e_x)) - binary_entropy(clamp01(e.e_z))).max(0.0)
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Fully asymmetric one-way six-state protocol with Z-basis extraction.
pub fn sixstate_oneway(e: &QberTriple) -> f64 {
    let (e_x, e_y, e_z) = (e.e_x, e.e_y, e.e_z);
    let mid = if e_z > 0.0 {
        e_z * binary_entropy(clamp01((1.0 + (e_x - e_y) / e_z) / 2.0))
    } else {
        0.0
    };
    let last = if e_z < 1.0 {
        (1.0 - e_z) * binary_entropy(clamp01((1.0 - (e_x + e_y + e_z) / 2.0) / (1.0 - e_z)))
    } else {
        0.0
    };
    (1.0 - mid - last - binary_entropy(clamp01(e_z))).max(0.0)
}

/// Fully asymmetric six-state protocol with two-way advantage distillation.
pub fn sixstate_ad(e: &QberTriple, basis: ExtractionBasis) -> Result<f64> {
    let p = BellDiagCoefficients::from_qber(e, basis)?;
    Ok(sixstate_ad_from_coefficients(&p))
}

pub fn sixstate_ad_from_coefficients(p: &BellDiagCoefficients) -> f64 {
    let row0 = p.p00 + p.p01;
    let row1 = p.p10 + p.p11;
    let px0 = row0 * row0 + row1 * row1;
    let px1 = 2.0 * row0 * row1;

    let mut branch1 = 1.0 - shannon4(p);
    if px1 > 0.0 {
        let arg = (p.p00 * p.p10 + p.p01 * p.p11) / (row0 * row1);
        branch1 += px1 / 2.0 * binary_entropy(clamp01(arg));
    }

    let branch2 = if px0 > 0.0 {
        let prime = BellDiagCoefficients {
            p00: (p.p00 * p.p00 + p.p01 * p.p01) / px0,
            p10: 2.0 * p.p00 * p.p01 / px0,
            p01: (p.p10 * p.p10 + p.p11 * p.p11) / px0,
            p11: 2.0 * p.p10 * p.p11 / px0,
        };
        px0 / 2.0 * (1.0 - shannon4(&prime))
    } else {
        0.0
    };

    branch1.max(branch2).clamp(0.0, 1.0)
}

/// Symmetric-protocol sifting: r = (1/3)((r_x + r_y + r_z)/3).
pub fn symmetric_sifting(r_x: f64, r_y: f64, r_z: f64) -> f64 {
    (r_x / 3.0 + r_y / 3.0 + r_z / 3.0) / 3.0
}

/// R = Y r / N_modes.
pub fn assemble_rate(yield_y: f64, fraction: f64, n_modes: u32) -> f64 {
    yield_y * fraction / f64::from(n_modes)
}
