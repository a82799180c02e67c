//! States, projectors, and the probability rules for single events and for
//! sequences of measurements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Complex, ComplexMatrix, HERMITIAN_TOLERANCE};

/// Tolerance on `‖ψ‖² = 1` for a state vector.
pub const STATE_NORM_TOLERANCE: f64 = 1e-8;
const IDEMPOTENCE_TOLERANCE: f64 = 1e-8;
const UNITARY_TOLERANCE: f64 = 1e-8;
/// Roundoff excursion outside `[0, 1]` that is silently clamped.
const PROBABILITY_SLACK: f64 = 1e-9;

/// Unit-norm coordinates of a state in the reference basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex>", into = "Vec<Complex>")]
pub struct StateVector {
    coords: Vec<Complex>,
}

impl StateVector {
    pub fn new(coords: Vec<Complex>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::shape("state vector must have at least one coordinate"));
        }
        if coords.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("state vector has non-finite coordinates"));
        }
        let norm: f64 = coords.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_NORM_TOLERANCE {
            return Err(Error::validation(format!("state vector has squared norm {norm}, expected 1")));
        }
        Ok(Self { coords })
    }

    /// Rescales arbitrary nonzero coordinates to unit length.
    pub fn normalized(coords: Vec<Complex>) -> Result<Self> {
        let norm: f64 = coords.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::validation("cannot normalize a zero or non-finite vector"));
        }
        Self::new(coords.into_iter().map(|z| z / norm).collect())
    }

    /// Magnitudes and phases (radians), `coord_j = mag_j · e^{i·phase_j}`.
    pub fn from_polar(magnitudes: &[f64], phases: &[f64]) -> Result<Self> {
        if magnitudes.len() != phases.len() {
            return Err(Error::shape("magnitudes and phases differ in length"));
        }
        Self::new(magnitudes.iter().zip(phases).map(|(&m, &p)| Complex::from_polar(m, p)).collect())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex] {
        &self.coords
    }

    pub fn to_column(&self) -> ComplexMatrix {
        ComplexMatrix::column(self.coords.clone()).expect("state vectors are nonempty")
    }
}

impl TryFrom<Vec<Complex>> for StateVector {
    type Error = Error;

    fn try_from(coords: Vec<Complex>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<StateVector> for Vec<Complex> {
    fn from(s: StateVector) -> Self {
        s.coords
    }
}

/// Orthogonal projector: `P = P† = P²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    matrix: ComplexMatrix,
}

impl Projector {
    /// Validates Hermiticity and idempotence, which together pin the spectrum to {0, 1}.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::shape(format!(
                "projector must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let herm = matrix.hermitian_defect();
        if herm > HERMITIAN_TOLERANCE {
            return Err(Error::validation(format!("projector is not Hermitian (defect {herm:.3e})")));
        }
        let idem = matrix.matmul(&matrix)?.max_abs_diff(&matrix);
        if idem > IDEMPOTENCE_TOLERANCE {
            return Err(Error::validation(format!("projector is not idempotent (defect {idem:.3e})")));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square());
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Rank, read off the trace.
    pub fn rank(&self) -> usize {
        self.matrix.trace().re.round() as usize
    }

    pub fn apply(&self, v: &[Complex]) -> Result<Vec<Complex>> {
        self.matrix.mul_vec(v)
    }
}

/// Diagonal 0/1 projector with ones at `one_indices`.
pub fn indicator_projector(dim: usize, one_indices: &[usize]) -> Result<Projector> {
    if dim == 0 {
        return Err(Error::validation("projector dimension must be positive"));
    }
    let mut diag = vec![0.0; dim];
    for &i in one_indices {
        if i >= dim {
            return Err(Error::validation(format!("index {i} out of range for dimension {dim}")));
        }
        diag[i] = 1.0;
    }
    Ok(Projector::new_unchecked(ComplexMatrix::from_real_diagonal(&diag)))
}

/// `U · M · U†`.
pub fn rotate_projector(u: &ComplexMatrix, m: &Projector) -> Result<Projector> {
    if !u.is_square() || u.rows() != m.dim() {
        return Err(Error::shape(format!(
            "cannot rotate a {}-dimensional projector with a {}x{} matrix",
            m.dim(),
            u.rows(),
            u.cols()
        )));
    }
    let defect = u.unitary_defect();
    if defect > UNITARY_TOLERANCE {
        return Err(Error::validation(format!("rotation is not unitary (defect {defect:.3e})")));
    }
    let rotated = u.matmul(&m.matrix)?.matmul(&u.adjoint())?;
    Ok(Projector::new_unchecked(rotated))
}

/// Tensor `p` into position `slot` of a product space, with identities elsewhere.
pub fn embed_in_slots(p: &Projector, slot: usize, slot_dims: &[usize]) -> Result<Projector> {
    let Some(&d) = slot_dims.get(slot) else {
        return Err(Error::shape(format!("slot {slot} out of range for {} slots", slot_dims.len())));
    };
    if d != p.dim() {
        return Err(Error::shape(format!(
            "slot {slot} has dimension {d} but projector has dimension {}",
            p.dim()
        )));
    }
    let left: usize = slot_dims[..slot].iter().product();
    let right: usize = slot_dims[slot + 1..].iter().product();
    let mut m = ComplexMatrix::identity(left).kron(&p.matrix);
    m = m.kron(&ComplexMatrix::identity(right));
    Ok(Projector::new_unchecked(m))
}

pub(crate) fn clamp_probability(p: f64) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::Consistency(format!("probability {p} is not finite")));
    }
    if p < -PROBABILITY_SLACK || p > 1.0 + PROBABILITY_SLACK {
        return Err(Error::Consistency(format!("probability {p} lies outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `‖P_k ⋯ P_2 P_1 ψ‖²` for projectors listed in measurement order.
pub fn sequence_probability(psi: &StateVector, projectors: &[&Projector]) -> Result<f64> {
    if projectors.is_empty() {
        return Err(Error::validation("measurement sequence is empty"));
    }
    let mut v = psi.coords().to_vec();
    for p in projectors {
        if p.dim() != psi.dim() {
            return Err(Error::shape(format!(
                "projector of dimension {} applied to state of dimension {}",
                p.dim(),
                psi.dim()
            )));
        }
        v = p.apply(&v)?;
    }
    clamp_probability(v.iter().map(|z| z.norm_sqr()).sum())
}

/// `p(then | given) = ‖P_then P_given ψ‖² / ‖P_given ψ‖²`.
pub fn conditional_probability(psi: &StateVector, given: &Projector, then: &Projector) -> Result<f64> {
    let denom = sequence_probability(psi, &[given])?;
    if denom <= 0.0 {
        return Err(Error::Domain("conditioning event has probability zero".into()));
    }
    let joint = sequence_probability(psi, &[given, then])?;
    clamp_probability(joint / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitary_from_hermitian;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = StateVector> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim)
            .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
            .prop_map(|v| StateVector::normalized(v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
    }

    fn arb_unitary(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
        prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), dim * dim).prop_map(move |v| {
            let m = ComplexMatrix::new(dim, dim, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap();
            let h = m.add(&m.adjoint()).unwrap().scale(c(0.5, 0.0));
            unitary_from_hermitian(&h).unwrap()
        })
    }

    fn arb_subset(dim: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(any::<bool>(), dim)
            .prop_map(|mask| mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
    }

    #[test]
    fn indicator_projectors() {
        let my = indicator_projector(2, &[0]).unwrap();
        assert_eq!(my.matrix(), &ComplexMatrix::from_real_diagonal(&[1.0, 0.0]));
        assert_eq!(indicator_projector(2, &[0, 1]).unwrap(), Projector::identity(2));
        let big = indicator_projector(4, &[0, 1]).unwrap();
        let via_kron = my.matrix().kron(&ComplexMatrix::identity(2));
        assert_eq!(big.matrix(), &via_kron);
        assert!(matches!(indicator_projector(2, &[2]), Err(Error::Validation(_))));
    }

    #[test]
    fn rotate_by_identity_is_noop() {
        let m = indicator_projector(3, &[1]).unwrap();
        assert_eq!(rotate_projector(&ComplexMatrix::identity(3), &m).unwrap(), m);
    }

    #[test]
    fn rotate_rejects_non_unitary() {
        let m = indicator_projector(2, &[0]).unwrap();
        let bad = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(rotate_projector(&bad, &m), Err(Error::Validation(_))));
        assert!(matches!(rotate_projector(&ComplexMatrix::identity(3), &m), Err(Error::Shape(_))));
    }

    #[test]
    fn embedding_into_two_slots() {
        let yes = indicator_projector(2, &[0]).unwrap();
        let no = indicator_projector(2, &[1]).unwrap();
        let a = embed_in_slots(&yes, 0, &[2, 2]).unwrap();
        assert_eq!(a.matrix(), &ComplexMatrix::from_real_diagonal(&[1.0, 1.0, 0.0, 0.0]));
        let b = embed_in_slots(&no, 1, &[2, 2]).unwrap();
        assert_eq!(b.matrix(), &ComplexMatrix::from_real_diagonal(&[0.0, 1.0, 0.0, 1.0]));
        assert!(matches!(embed_in_slots(&yes, 0, &[3, 2]), Err(Error::Shape(_))));
        assert!(embed_in_slots(&yes, 2, &[2, 2]).is_err());
    }

    #[test]
    fn projector_validation() {
        assert!(Projector::new(ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 0.0]).unwrap()).is_err());
        assert!(Projector::new(ComplexMatrix::from_real(2, 2, &[0.5, 0.0, 0.0, 0.5]).unwrap()).is_err());
        assert!(Projector::new(ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap()).is_ok());
    }

    #[test]
    fn identity_sequence_has_probability_one() {
        let psi = StateVector::normalized(vec![c(0.3, 0.1), c(-0.2, 0.9), c(0.0, 0.4)]).unwrap();
        let id = Projector::identity(3);
        assert_abs_diff_eq!(sequence_probability(&psi, &[&id]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(conditional_probability(&psi, &id, &id).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sequence_errors() {
        let psi = StateVector::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(sequence_probability(&psi, &[]).is_err());
        assert!(matches!(
            sequence_probability(&psi, &[&Projector::identity(3)]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn orthogonal_conditional_is_zero_and_null_condition_is_an_error() {
        let psi = StateVector::normalized(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let a = indicator_projector(2, &[0]).unwrap();
        let b = indicator_projector(2, &[1]).unwrap();
        assert_eq!(conditional_probability(&psi, &a, &b).unwrap(), 0.0);
        let e0 = StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(conditional_probability(&e0, &b, &a), Err(Error::Domain(_))));
    }

    #[test]
    fn state_vector_validation() {
        assert!(StateVector::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(StateVector::normalized(vec![c(0.0, 0.0)]).is_err());
        let s = StateVector::from_polar(&[0.6, 0.8], &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(s.coords()[1].arg(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn clamping_rules() {
        assert_eq!(clamp_probability(1.0 + 1e-12).unwrap(), 1.0);
        assert_eq!(clamp_probability(-1e-12).unwrap(), 0.0);
        assert!(clamp_probability(1.0 + 1e-6).is_err());
        assert!(clamp_probability(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn rotation_preserves_trace_rank_and_idempotence(u in arb_unitary(4), ones in arb_subset(4)) {
            let m = indicator_projector(4, &ones).unwrap();
            let r = rotate_projector(&u, &m).unwrap();
            prop_assert!((r.matrix().trace() - m.matrix().trace()).norm() < 1e-10);
            prop_assert_eq!(r.rank(), ones.len());
            prop_assert!(Projector::new(r.matrix().clone()).is_ok());
        }

        #[test]
        fn embeddings_in_distinct_slots_commute(u in arb_unitary(2), v in arb_unitary(3), a in 0usize..2, b in 0usize..3) {
            let p = rotate_projector(&u, &indicator_projector(2, &[a]).unwrap()).unwrap();
            let q = rotate_projector(&v, &indicator_projector(3, &[b]).unwrap()).unwrap();
            let pe = embed_in_slots(&p, 0, &[2, 3]).unwrap();
            let qe = embed_in_slots(&q, 1, &[2, 3]).unwrap();
            let ab = pe.matrix().matmul(qe.matrix()).unwrap();
            let ba = qe.matrix().matmul(pe.matrix()).unwrap();
            prop_assert!(ab.max_abs_diff(&ba) <= 1e-12);
        }

        #[test]
        fn shared_eigenbasis_makes_order_irrelevant(
            u in arb_unitary(4), psi in arb_state(4), s1 in arb_subset(4), s2 in arb_subset(4)
        ) {
            let a = rotate_projector(&u, &indicator_projector(4, &s1).unwrap()).unwrap();
            let b = rotate_projector(&u, &indicator_projector(4, &s2).unwrap()).unwrap();
            let ab = sequence_probability(&psi, &[&a, &b]).unwrap();
            let ba = sequence_probability(&psi, &[&b, &a]).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-10);
        }

        #[test]
        fn chain_rule(u in arb_unitary(3), psi in arb_state(3), i in 0usize..3, j in 0usize..3) {
            let a = indicator_projector(3, &[i]).unwrap();
            let b = rotate_projector(&u, &indicator_projector(3, &[j]).unwrap()).unwrap();
            let pa = sequence_probability(&psi, &[&a]).unwrap();
            prop_assume!(pa > 1e-6);
            let cond = conditional_probability(&psi, &a, &b).unwrap();
            let seq = sequence_probability(&psi, &[&a, &b]).unwrap();
            prop_assert!((pa * cond - seq).abs() < 1e-10);
        }

        #[test]
        fn rank_one_conditionals_are_symmetric(u in arb_unitary(3), psi in arb_state(3), i in 0usize..3, j in 0usize..3) {
            let a = indicator_projector(3, &[i]).unwrap();
            let b = rotate_projector(&u, &indicator_projector(3, &[j]).unwrap()).unwrap();
            // Conditionals between rays do not depend on the state.
            prop_assume!(sequence_probability(&psi, &[&a]).unwrap() > 1e-6);
            prop_assume!(sequence_probability(&psi, &[&b]).unwrap() > 1e-6);
            let ab = conditional_probability(&psi, &a, &b).unwrap();
            let ba = conditional_probability(&psi, &b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-10);
        }

        #[test]
        fn outcome_sequences_are_complete(u in arb_unitary(2), w in arb_unitary(2), psi in arb_state(4)) {
            // Two incompatible binary variables in slot 0, one compatible variable in slot 1.
            let dims = [2, 2];
            let first: Vec<Projector> = (0..2)
                .map(|k| embed_in_slots(&indicator_projector(2, &[k]).unwrap(), 0, &dims).unwrap())
                .collect();
            let second: Vec<Projector> = (0..2)
                .map(|k| embed_in_slots(&rotate_projector(&u, &indicator_projector(2, &[k]).unwrap()).unwrap(), 0, &dims).unwrap())
                .collect();
            let third: Vec<Projector> = (0..2)
                .map(|k| embed_in_slots(&rotate_projector(&w, &indicator_projector(2, &[k]).unwrap()).unwrap(), 1, &dims).unwrap())
                .collect();
            let mut total = 0.0;
            for a in &first {
                for b in &second {
                    for d in &third {
                        total += sequence_probability(&psi, &[a, b, d]).unwrap();
                    }
                }
            }
            prop_assert!((total - 1.0).abs() <= 1e-8);
        }
    }
}
