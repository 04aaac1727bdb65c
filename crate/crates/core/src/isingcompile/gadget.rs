//! Ancilla gadget replacing one `J_k s_1 ... s_k` interaction by 2-body
//! terms.
//!
//! With `k` fresh ancillas `a_1..a_k`:
//!
//! ```text
//! H_2 = J^a sum_{i<j} s_i s_j + h sum_i s_i
//!     + J^a sum_{i,j} s_i a_j + sum_j h^a_j a_j
//! h     = -J^a + q_0
//! h^a_j = -J^a (2j - k) + q_j
//! q_j   = (-1)^(k - j + 1) J_k + q_0
//! ```
//!
//! Minimizing over the ancillas leaves `J_k s_1 ... s_k` plus a constant
//! whenever `|J_k| << q_0 < J^a` and `|J_k| << J^a - q_0`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Hands out contiguous ancilla indices after the logical spins.
#[derive(Debug, Clone)]
pub struct AncillaAllocator {
    next: usize,
}

impl AncillaAllocator {
    pub fn starting_at(first: usize) -> Self {
        Self { next: first }
    }

    pub fn allocate(&mut self, k: usize) -> Range<usize> {
        let r = self.next..self.next + k;
        self.next += k;
        r
    }

    pub fn next_index(&self) -> usize {
        self.next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GadgetParams<T> {
    pub ancilla_coupling: T,
    pub q0: T,
}

impl<T: Scalar> GadgetParams<T> {
    /// `J^a = gamma * max(|J_k|, epsilon)`, `q_0 = J^a / 2`.
    pub fn scaled(j_k: T, gamma: T, epsilon: T) -> Self {
        let ja = gamma * j_k.abs().max(epsilon);
        Self {
            ancilla_coupling: ja,
            q0: ja * T::lit(0.5),
        }
    }

    /// `|J_k| < q_0 < J^a` and `|J_k| < J^a - q_0`.
    pub fn admissible_for(&self, j_k: T) -> bool {
        let jk = j_k.abs();
        jk < self.q0 && self.q0 < self.ancilla_coupling && jk < self.ancilla_coupling - self.q0
    }
}

/// Two-body terms of one gadget instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GadgetFragment<T> {
    pub fields: Vec<(usize, T)>,
    pub couplings: Vec<((usize, usize), T)>,
    /// Added so the ancilla-minimized fragment equals `J_k s_1 ... s_k`
    /// with no leftover constant.
    pub constant: T,
    pub ancillas: Range<usize>,
}

impl<T: Scalar> GadgetFragment<T> {
    /// Fragment energy for the given spin values (`+1`/`-1`), indexed by
    /// global spin index.
    pub fn energy(&self, spin: impl Fn(usize) -> T) -> T {
        let f: T = self.fields.iter().map(|&(i, h)| h * spin(i)).sum();
        let c: T = self
            .couplings
            .iter()
            .map(|&((i, j), w)| w * spin(i) * spin(j))
            .sum();
        self.constant + f + c
    }
}

/// Ancilla fields `h^a_1..h^a_k`.
pub fn ancilla_fields<T: Scalar>(k: usize, j_k: T, params: &GadgetParams<T>) -> Vec<T> {
    let ja = params.ancilla_coupling;
    let kf = T::from_usize_lossy(k);
    (1..=k)
        .map(|j| {
            let sign = if (k - j + 1) % 2 == 0 { T::one() } else { -T::one() };
            let qj = sign * j_k + params.q0;
            -ja * (T::lit(2.0) * T::from_usize_lossy(j) - kf) + qj
        })
        .collect()
}

/// Builds the 2-body fragment for `j_k * prod(spins)`, allocating `k`
/// ancillas.
pub fn reduce_kbody<T: Scalar>(
    spins: &[usize],
    j_k: T,
    params: &GadgetParams<T>,
    alloc: &mut AncillaAllocator,
) -> GadgetFragment<T> {
    let k = spins.len();
    assert!(k >= 3, "gadget needs at least 3 spins, got {k}");
    let ja = params.ancilla_coupling;
    let ancillas = alloc.allocate(k);
    let h_logical = -ja + params.q0;
    let h_anc = ancilla_fields(k, j_k, params);

    let mut fields = Vec::with_capacity(2 * k);
    let mut couplings = Vec::with_capacity(k * (k - 1) / 2 + k * k);
    for (a, &i) in spins.iter().enumerate() {
        fields.push((i, h_logical));
        for &j in &spins[a + 1..] {
            couplings.push(((i.min(j), i.max(j)), ja));
        }
    }
    for (anc, &h) in ancillas.clone().zip(&h_anc) {
        fields.push((anc, h));
        for &i in spins {
            couplings.push(((i, anc), ja));
        }
    }

    // Ancillas are uncoupled from each other, so each one independently
    // settles at -|local field|. Evaluate at all logical spins up.
    let kf = T::from_usize_lossy(k);
    let logical_up = ja * kf * (kf - T::one()) * T::lit(0.5) + h_logical * kf;
    let ancilla_min: T = h_anc.iter().map(|&h| -(ja * kf + h).abs()).sum();
    let constant = j_k - (logical_up + ancilla_min);

    GadgetFragment {
        fields,
        couplings,
        constant,
        ancillas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_ancilla_field_example() {
        let params = GadgetParams {
            ancilla_coupling: 20.0,
            q0: 10.0,
        };
        let h = ancilla_fields(3, 1.0, &params);
        // q_1 = (-1)^3 + 10 = 9, h_1 = -20 (2 - 3) + 9 = 29
        assert_eq!(h[0], 29.0);
        // q_2 = 1 + 10 = 11, h_2 = -20 (4 - 3) + 11 = -9
        assert_eq!(h[1], -9.0);
    }

    #[test]
    fn allocation_is_contiguous() {
        let mut alloc = AncillaAllocator::starting_at(6);
        let params = GadgetParams::scaled(0.5, 10.0, 1e-6);
        let f = reduce_kbody(&[0, 2, 5], 0.5, &params, &mut alloc);
        assert_eq!(f.ancillas, 6..9);
        let g = reduce_kbody(&[1, 2, 3, 4], -0.5, &params, &mut alloc);
        assert_eq!(g.ancillas, 9..13);
        assert_eq!(alloc.next_index(), 13);
        assert_eq!(f.couplings.len(), 3 + 9);
        assert!(f.couplings.iter().all(|((i, j), _)| i < j));
    }

    #[test]
    fn default_scaling_is_admissible() {
        for jk in [1e-3, -0.7, 5.0] {
            assert!(GadgetParams::scaled(jk, 10.0, 1e-6).admissible_for(jk));
        }
        let zero = GadgetParams::<f64>::scaled(0.0, 10.0, 1e-6);
        assert!((zero.ancilla_coupling - 1e-5).abs() < 1e-20);
        assert!(zero.admissible_for(0.0));
    }
}
