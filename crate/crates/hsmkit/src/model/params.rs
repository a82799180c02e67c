//! Maps between box-bounded real parameters and states, Hermitians and rotations.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::linalg::{Complex, ComplexMatrix};
use crate::quantum::StateVector;

use super::spec::StateField;

/// Bound on Hermitian diagonal entries and off-diagonal magnitudes.
pub const HERMITIAN_BOUND: f64 = 2.0 * PI;

pub(crate) fn state_param_count(field: StateField, dim: usize) -> usize {
    match field {
        StateField::Real => dim - 1,
        StateField::Complex => 2 * (dim - 1),
    }
}

/// Box for a state block.
///
/// Complex: `N−1` magnitude angles in `[0, π/2]`, then `N−1` phases in `[0, 2π]`.
/// Real: the first `N−2` angles in `[0, π]`, the last in `[0, 2π]`, which lets
/// coordinates take either sign.
pub(crate) fn state_bounds(field: StateField, dim: usize) -> Vec<(f64, f64)> {
    let n = dim - 1;
    match field {
        StateField::Complex => {
            let mut b = vec![(0.0, FRAC_PI_2); n];
            b.extend(std::iter::repeat((0.0, TAU)).take(n));
            b
        }
        StateField::Real => (0..n).map(|k| if k + 1 == n { (0.0, TAU) } else { (0.0, PI) }).collect(),
    }
}

/// Hyperspherical coordinates: `x_k = sin a_1 ⋯ sin a_k · cos a_{k+1}`, last `x = Π sin`.
fn spherical(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len() + 1);
    let mut s = 1.0;
    for &a in angles {
        out.push(s * a.cos());
        s *= a.sin();
    }
    out.push(s);
    out
}

pub(crate) fn unpack_state(field: StateField, dim: usize, block: &[f64]) -> Result<StateVector> {
    let expected = state_param_count(field, dim);
    if block.len() != expected {
        return Err(Error::validation(format!(
            "state block has {} values, expected {expected}",
            block.len()
        )));
    }
    let coords = match field {
        StateField::Real => spherical(block).into_iter().map(|x| Complex::new(x, 0.0)).collect(),
        StateField::Complex => {
            let (angles, phases) = block.split_at(dim - 1);
            spherical(angles)
                .into_iter()
                .enumerate()
                .map(|(k, r)| if k == 0 { Complex::new(r, 0.0) } else { Complex::from_polar(r, phases[k - 1]) })
                .collect()
        }
    };
    StateVector::normalized(coords)
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Inverse of [`unpack_state`]. Complex states are first rotated so that the
/// first coordinate is real and nonnegative; real fields reject complex input.
pub(crate) fn pack_state(field: StateField, psi: &StateVector) -> Result<Vec<f64>> {
    let dim = psi.dim();
    if dim < 2 {
        return Err(Error::validation("states need dimension at least 2"));
    }
    let coords = psi.coords();
    match field {
        StateField::Complex => {
            let phase = if coords[0].norm() > 0.0 {
                coords[0].conj() / coords[0].norm()
            } else {
                Complex::new(1.0, 0.0)
            };
            let aligned: Vec<Complex> = coords.iter().map(|c| c * phase).collect();
            let mags: Vec<f64> = aligned.iter().map(|c| c.norm()).collect();
            let mut out = Vec::with_capacity(2 * (dim - 1));
            for k in 0..dim - 1 {
                let tail: f64 = mags[k + 1..].iter().map(|m| m * m).sum::<f64>().sqrt();
                out.push(tail.atan2(mags[k]));
            }
            for c in &aligned[1..] {
                out.push(wrap_angle(c.arg()));
            }
            Ok(out)
        }
        StateField::Real => {
            if let Some(c) = coords.iter().find(|c| c.im.abs() > 1e-12) {
                return Err(Error::validation(format!("real state has complex coordinate {c}")));
            }
            let x: Vec<f64> = coords.iter().map(|c| c.re).collect();
            let mut out = Vec::with_capacity(dim - 1);
            for k in 0..dim - 2 {
                let tail: f64 = x[k + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                out.push(tail.atan2(x[k]));
            }
            out.push(wrap_angle(x[dim - 1].atan2(x[dim - 2])));
            Ok(out)
        }
    }
}

pub(crate) fn hermitian_param_count(n: usize) -> usize {
    n * n - 1
}

/// Box for a Hermitian block: `N−1` diagonals, then `(magnitude, phase)` per upper entry.
pub(crate) fn hermitian_bounds(n: usize) -> Vec<(f64, f64)> {
    let mut b = vec![(-HERMITIAN_BOUND, HERMITIAN_BOUND); n - 1];
    for _ in 0..n * (n - 1) / 2 {
        b.push((-HERMITIAN_BOUND, HERMITIAN_BOUND));
        b.push((0.0, TAU));
    }
    b
}

/// Builds an `n×n` Hermitian from its parameter block.
///
/// The first `n−1` values are the leading diagonal entries (the last diagonal
/// entry is fixed at 0). Then, for each `i < j` in row-major order, a magnitude
/// `m` and phase `φ` give `H[i][j] = m·e^{iφ}` and `H[j][i] = m·e^{−iφ}`.
pub fn hermitian_from_params(n: usize, block: &[f64]) -> Result<ComplexMatrix> {
    if block.len() != hermitian_param_count(n) {
        return Err(Error::validation(format!(
            "a {n}×{n} Hermitian needs {} parameters, got {}",
            hermitian_param_count(n),
            block.len()
        )));
    }
    let mut h = ComplexMatrix::zeros(n, n);
    for i in 0..n - 1 {
        h[(i, i)] = Complex::new(block[i], 0.0);
    }
    let mut k = n - 1;
    for i in 0..n {
        for j in i + 1..n {
            let z = Complex::from_polar(block[k], block[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    Ok(h)
}

/// Real rotation by angle `π·θ`: `[[cos, −sin], [sin, cos]]`.
pub fn planar_rotation(theta: f64) -> ComplexMatrix {
    let (s, c) = (PI * theta).sin_cos();
    ComplexMatrix::from_real(2, 2, &[c, -s, s, c]).expect("finite 2×2")
}

/// Entrywise squared magnitudes of a unitary, as rows.
pub fn transition_matrix(u: &ComplexMatrix) -> Result<Vec<Vec<f64>>> {
    if !u.is_unitary(1e-8) {
        return Err(Error::validation("transition matrices need a unitary input"));
    }
    let m = u.squared_moduli();
    Ok(m.chunks(u.cols()).map(<[f64]>::to_vec).collect())
}
