//! Second-order reduced-form model: ozone as a quadratic polynomial in
//! fractional emission perturbations, built from gridded sensitivity
//! coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A grid cell center in projected kilometre coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: i64,
    pub x_km: f64,
    pub y_km: f64,
}

/// Number of pairs `l < j` among `d` inputs.
pub fn cross_pair_count(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

/// Position of the unordered pair `(l, j)`, `l < j`, in row-major
/// upper-triangular order: (0,1), (0,2), …, (0,d−1), (1,2), ….
pub fn cross_pair_index(d: usize, l: usize, j: usize) -> usize {
    debug_assert!(l < j && j < d);
    l * (2 * d - l - 1) / 2 + (j - l - 1)
}

/// Base concentrations and sensitivity coefficients for every (day, cell).
///
/// Coefficients for one (day, cell) are stored contiguously as
/// `[c0, s1_1..s1_d, s2_11..s2_dd, s2_12, s2_13, …]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityField {
    cells: Vec<Cell>,
    days: Vec<i64>,
    input_names: Vec<String>,
    d: usize,
    coeffs: Vec<f64>,
}

impl SensitivityField {
    /// Row stride of the packed coefficient layout for `d` inputs.
    pub fn stride_for(d: usize) -> usize {
        1 + 2 * d + cross_pair_count(d)
    }

    /// Build a field from packed coefficients laid out day-major then cell.
    pub fn from_packed(
        cells: Vec<Cell>,
        days: Vec<i64>,
        input_names: Vec<String>,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        let d = input_names.len();
        if d == 0 {
            return Err(Error::input("sensitivity field needs at least one input"));
        }
        if cells.is_empty() || days.is_empty() {
            return Err(Error::input("sensitivity field has no cells or no days"));
        }
        let expected = days.len() * cells.len() * Self::stride_for(d);
        if coeffs.len() != expected {
            return Err(Error::input(format!(
                "packed coefficient length {} does not match {} days x {} cells x stride {}",
                coeffs.len(),
                days.len(),
                cells.len(),
                Self::stride_for(d)
            )));
        }
        Ok(Self {
            cells,
            days,
            input_names,
            d,
            coeffs,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.d
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn days(&self) -> &[i64] {
        &self.days
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn stride(&self) -> usize {
        Self::stride_for(self.d)
    }

    pub fn cell_index(&self, id: i64) -> Option<usize> {
        self.cells.iter().position(|c| c.id == id)
    }

    pub fn day_index(&self, day: i64) -> Option<usize> {
        self.days.iter().position(|&d| d == day)
    }

    /// Packed coefficients at (day index, cell index).
    pub fn coefficients(&self, t: usize, cell: usize) -> &[f64] {
        let s = self.stride();
        let off = (t * self.cells.len() + cell) * s;
        &self.coeffs[off..off + s]
    }

    pub fn packed(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn base(&self, t: usize, cell: usize) -> f64 {
        self.coefficients(t, cell)[0]
    }

    pub fn first_order(&self, t: usize, cell: usize, j: usize) -> f64 {
        self.coefficients(t, cell)[1 + j]
    }

    pub fn second_diag(&self, t: usize, cell: usize, j: usize) -> f64 {
        self.coefficients(t, cell)[1 + self.d + j]
    }

    /// S⁽²⁾_lj for l ≠ j; symmetric in its arguments.
    pub fn second_cross(&self, t: usize, cell: usize, l: usize, j: usize) -> f64 {
        let (a, b) = if l < j { (l, j) } else { (j, l) };
        self.coefficients(t, cell)[1 + 2 * self.d + cross_pair_index(self.d, a, b)]
    }

    fn check(&self, t: usize, cell: usize, alpha: &PerturbationVector) -> Result<()> {
        if t >= self.n_days() {
            return Err(Error::input(format!("day index {t} out of range")));
        }
        if cell >= self.n_cells() {
            return Err(Error::input(format!("cell index {cell} out of range")));
        }
        self.check_alpha(alpha)
    }

    fn check_alpha(&self, alpha: &PerturbationVector) -> Result<()> {
        if alpha.len() != self.d {
            return Err(Error::input(format!(
                "perturbation has {} components, field has {} inputs",
                alpha.len(),
                self.d
            )));
        }
        Ok(())
    }
}

/// Fractional emission changes; `-0.10` is a 10% decrease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PerturbationVector(Vec<f64>);

impl PerturbationVector {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if let Some(bad) = alpha.iter().find(|a| !(a.is_finite() && **a > -1.0)) {
            return Err(Error::input(format!(
                "perturbation component {bad} must be finite and > -1"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for PerturbationVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PerturbationVector> for Vec<f64> {
    fn from(p: PerturbationVector) -> Self {
        p.0
    }
}

/// Evaluate the quadratic polynomial on one packed coefficient row.
#[inline]
pub fn evaluate_packed(coeffs: &[f64], alpha: &[f64]) -> f64 {
    let d = alpha.len();
    let (first, rest) = coeffs[1..].split_at(d);
    let (diag, cross) = rest.split_at(d);
    let mut c = coeffs[0];
    for j in 0..d {
        c += first[j] * alpha[j] + 0.5 * diag[j] * alpha[j] * alpha[j];
    }
    let mut k = 0;
    for l in 0..d {
        for j in l + 1..d {
            c += cross[k] * alpha[l] * alpha[j];
            k += 1;
        }
    }
    c
}

/// Concentration (ppb) at one day and cell under perturbation `alpha`.
pub fn evaluate_rfm(
    field: &SensitivityField,
    t: usize,
    cell: usize,
    alpha: &PerturbationVector,
) -> Result<f64> {
    field.check(t, cell, alpha)?;
    Ok(evaluate_packed(field.coefficients(t, cell), alpha.as_slice()))
}

/// α*_j = (1 + α_j)(1 + η_j) − 1, expanded so that η = 0 returns α exactly.
pub fn compose_perturbation(
    alpha: &PerturbationVector,
    eta: &PerturbationVector,
) -> Result<PerturbationVector> {
    if alpha.len() != eta.len() {
        return Err(Error::input(format!(
            "control vector has {} components, perturbation has {}",
            eta.len(),
            alpha.len()
        )));
    }
    let composed = alpha
        .as_slice()
        .iter()
        .zip(eta.as_slice())
        .map(|(a, e)| a + e + a * e)
        .collect();
    Ok(PerturbationVector(composed))
}

/// Concentrations for every (day, cell), day-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationField {
    pub n_days: usize,
    pub n_cells: usize,
    pub values: Vec<f64>,
}

impl ConcentrationField {
    pub fn get(&self, t: usize, cell: usize) -> f64 {
        self.values[t * self.n_cells + cell]
    }

    /// Daily series at one cell.
    pub fn cell_series(&self, cell: usize) -> Vec<f64> {
        (0..self.n_days).map(|t| self.get(t, cell)).collect()
    }

    /// Number of entries below zero. The polynomial is not clipped.
    pub fn negative_count(&self) -> usize {
        self.values.iter().filter(|v| **v < 0.0).count()
    }
}

pub fn evaluate_rfm_field(
    field: &SensitivityField,
    alpha: &PerturbationVector,
) -> Result<ConcentrationField> {
    field.check_alpha(alpha)?;
    let values = field
        .packed()
        .chunks_exact(field.stride())
        .map(|row| evaluate_packed(row, alpha.as_slice()))
        .collect();
    Ok(ConcentrationField {
        n_days: field.n_days(),
        n_cells: field.n_cells(),
        values,
    })
}
