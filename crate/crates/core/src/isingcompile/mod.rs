//! Compilation of a Boolean cost polynomial into a 2-local Ising program.
//!
//! Bits map to spins through `x = (1 + s) / 2`, so `s = +1` is `x = 1`.
//! Spin terms of degree up to two pass through; every higher-degree term
//! gets its own ancilla gadget (see [`gadget`]).

pub mod gadget;
mod qubo;
mod resources;

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::costpoly::{BooleanPolynomial, Monomial};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use gadget::{reduce_kbody, AncillaAllocator, GadgetFragment, GadgetParams};
pub use qubo::{export_qubo, import_qubo, Qubo};
pub use resources::{binomial_sum_f64, estimate_resources, ResourceEstimate, EXACT_COUNT_LIMIT};

/// Spin value of a bit.
#[inline]
pub fn spin_of<T: Scalar>(bit: u8) -> T {
    if bit != 0 {
        T::one()
    } else {
        -T::one()
    }
}

/// Multilinear polynomial in `+-1` spins (`s^2 = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SpinPolynomial<T> {
    #[serde(with = "crate::serde_pairs")]
    terms: BTreeMap<Monomial, T>,
    num_spins: usize,
}

impl<T: Scalar> SpinPolynomial<T> {
    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, T)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &Monomial) -> T {
        self.terms.get(m).copied().unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Energy of a configuration given as bits (`1` is spin up).
    pub fn energy(&self, bits: &[u8]) -> T {
        self.terms
            .iter()
            .map(|(m, &c)| {
                let flips = m.indices().iter().filter(|&&i| bits[i] == 0).count();
                if flips % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .sum()
    }
}

/// Substitutes `x = (1 + s) / 2` in every monomial and collects terms.
pub fn boolean_to_spin<T: Scalar>(poly: &BooleanPolynomial<T>) -> SpinPolynomial<T> {
    let mut terms: BTreeMap<Monomial, T> = BTreeMap::new();
    for (m, c) in poly.terms() {
        let idx = m.indices();
        let k = idx.len();
        let weight = c * T::lit(0.5).powi(k as i32);
        for subset in 0u64..1 << k {
            let sub: Vec<usize> = (0..k).filter(|b| subset >> b & 1 == 1).map(|b| idx[b]).collect();
            *terms.entry(Monomial::new(sub)).or_insert_with(T::zero) += weight;
        }
    }
    terms.retain(|_, c| *c != T::zero());
    SpinPolynomial {
        terms,
        num_spins: poly.num_bits(),
    }
}

/// Audit record of one reduced k-body term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GadgetRecord<T> {
    pub monomial: Monomial,
    pub j_k: T,
    pub ancillas: Range<usize>,
    pub ancilla_coupling: T,
    pub q0: T,
}

/// Energy `offset + sum h_i s_i + sum J_ij s_i s_j` over logical spins
/// followed by ancilla spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IsingProgram<T> {
    pub num_logical: usize,
    pub num_ancilla: usize,
    pub fields: BTreeMap<usize, T>,
    #[serde(with = "crate::serde_pairs")]
    pub couplings: BTreeMap<(usize, usize), T>,
    pub offset: T,
    pub gadgets: Vec<GadgetRecord<T>>,
}

impl<T: Scalar> IsingProgram<T> {
    pub fn empty(num_logical: usize) -> Self {
        Self {
            num_logical,
            num_ancilla: 0,
            fields: BTreeMap::new(),
            couplings: BTreeMap::new(),
            offset: T::zero(),
            gadgets: Vec::new(),
        }
    }

    pub fn num_spins(&self) -> usize {
        self.num_logical + self.num_ancilla
    }

    pub fn add_field(&mut self, i: usize, h: T) {
        *self.fields.entry(i).or_insert_with(T::zero) += h;
    }

    pub fn add_coupling(&mut self, i: usize, j: usize, w: T) {
        assert_ne!(i, j, "self-coupling on spin {i}");
        *self.couplings.entry((i.min(j), i.max(j))).or_insert_with(T::zero) += w;
    }

    /// Full energy of a bit configuration (`1` is spin up).
    pub fn energy(&self, bits: &[u8]) -> T {
        let f: T = self.fields.iter().map(|(&i, &h)| h * spin_of::<T>(bits[i])).sum();
        let c: T = self
            .couplings
            .iter()
            .map(|(&(i, j), &w)| if bits[i] == bits[j] { w } else { -w })
            .sum();
        self.offset + f + c
    }

    /// Lowest energy over ancilla settings for fixed logical bits. Ancillas
    /// are never coupled to each other, so each settles independently.
    pub fn ancilla_minimized_energy(&self, logical: &[u8]) -> T {
        assert_eq!(logical.len(), self.num_logical);
        let n = self.num_logical;
        let mut local: Vec<T> = (0..self.num_ancilla)
            .map(|a| self.fields.get(&(n + a)).copied().unwrap_or_else(T::zero))
            .collect();
        let mut e = self.offset;
        for (&i, &h) in &self.fields {
            if i < n {
                e += h * spin_of::<T>(logical[i]);
            }
        }
        for (&(i, j), &w) in &self.couplings {
            match (i < n, j < n) {
                (true, true) => e += if logical[i] == logical[j] { w } else { -w },
                (true, false) => local[j - n] += w * spin_of::<T>(logical[i]),
                (false, true) => local[i - n] += w * spin_of::<T>(logical[j]),
                (false, false) => panic!("ancilla-ancilla coupling ({i}, {j})"),
            }
        }
        e - local.iter().map(|h| h.abs()).sum::<T>()
    }

    /// Neighbor lists `(j, J_ij)` for every spin.
    pub fn adjacency(&self) -> Vec<Vec<(usize, T)>> {
        let mut adj = vec![Vec::new(); self.num_spins()];
        for (&(i, j), &w) in &self.couplings {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }

    pub fn field_vector(&self) -> Vec<T> {
        let mut h = vec![T::zero(); self.num_spins()];
        for (&i, &v) in &self.fields {
            h[i] = v;
        }
        h
    }

    /// Checks structural invariants: no self-couplings, indices in range,
    /// every ancilla coupled, gadget constraints admissible.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_spins();
        let bad = |msg: String| Err(Error::param("program", msg));
        for &(i, j) in self.couplings.keys() {
            if i == j {
                return bad(format!("self-coupling on spin {i}"));
            }
            if i >= n || j >= n {
                return bad(format!("coupling ({i}, {j}) out of range {n}"));
            }
        }
        if let Some(&i) = self.fields.keys().find(|&&i| i >= n) {
            return bad(format!("field on spin {i} out of range {n}"));
        }
        let mut coupled = vec![false; n];
        for &(i, j) in self.couplings.keys() {
            coupled[i] = true;
            coupled[j] = true;
        }
        if let Some(a) = (self.num_logical..n).find(|&a| !coupled[a]) {
            return bad(format!("ancilla {a} has no coupling"));
        }
        for g in &self.gadgets {
            let p = GadgetParams {
                ancilla_coupling: g.ancilla_coupling,
                q0: g.q0,
            };
            if !p.admissible_for(g.j_k) {
                return bad(format!("gadget for {:?} violates |J_k| < q0 < J^a", g.monomial));
            }
        }
        Ok(())
    }
}

/// Per-term or shared ancilla coupling scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GadgetScale {
    PerTerm,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub gamma: f64,
    pub epsilon: f64,
    pub scale: GadgetScale,
    /// Maximum total spin count; `None` for unbounded export mode.
    pub spin_cap: Option<usize>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            gamma: 10.0,
            epsilon: 1e-6,
            scale: GadgetScale::PerTerm,
            spin_cap: Some(64),
        }
    }
}

impl CompileOptions {
    pub fn export_mode() -> Self {
        Self {
            spin_cap: None,
            ..Self::default()
        }
    }
}

/// Compiles a Boolean polynomial into a 2-local program whose
/// ancilla-minimized energy equals the polynomial on the logical bits.
pub fn compile<T: Scalar>(poly: &BooleanPolynomial<T>, options: &CompileOptions) -> Result<IsingProgram<T>> {
    if !(options.gamma > 2.0) {
        return Err(Error::param("gamma", "must exceed 2 so that |J_k| < q0 = J^a / 2"));
    }
    if !(options.epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    compile_spin(&boolean_to_spin(poly), options)
}

pub fn compile_spin<T: Scalar>(spin: &SpinPolynomial<T>, options: &CompileOptions) -> Result<IsingProgram<T>> {
    let n = spin.num_spins();
    let ancillas: usize = spin.terms().map(|(m, _)| m.degree()).filter(|&k| k >= 3).sum();
    if let Some(cap) = options.spin_cap {
        if n + ancillas > cap {
            return Err(Error::TermBudget {
                spins: n + ancillas,
                cap,
            });
        }
    }
    let gamma = T::lit(options.gamma);
    let epsilon = T::lit(options.epsilon);
    let global_jk = spin
        .terms()
        .filter(|(m, _)| m.degree() >= 3)
        .fold(T::zero(), |acc, (_, c)| acc.max(c.abs()));

    let mut program = IsingProgram::empty(n);
    let mut alloc = AncillaAllocator::starting_at(n);
    for (m, c) in spin.terms() {
        match m.indices() {
            [] => program.offset += c,
            [i] => program.add_field(*i, c),
            [i, j] => program.add_coupling(*i, *j, c),
            idx => {
                let reference = match options.scale {
                    GadgetScale::PerTerm => c,
                    GadgetScale::Global => global_jk,
                };
                let params = GadgetParams::scaled(reference, gamma, epsilon);
                let frag = reduce_kbody(idx, c, &params, &mut alloc);
                program.offset += frag.constant;
                for &(i, h) in &frag.fields {
                    program.add_field(i, h);
                }
                for &((i, j), w) in &frag.couplings {
                    program.add_coupling(i, j, w);
                }
                program.gadgets.push(GadgetRecord {
                    monomial: m.clone(),
                    j_k: c,
                    ancillas: frag.ancillas,
                    ancilla_coupling: params.ancilla_coupling,
                    q0: params.q0,
                });
            }
        }
    }
    program.num_ancilla = alloc.next_index() - n;
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits_of(mask: u64, n: usize) -> Vec<u8> {
        (0..n).map(|i| (mask >> i & 1) as u8).collect()
    }

    #[test]
    fn single_variable_to_spin() {
        let mut p = BooleanPolynomial::<f64>::zero(1);
        p.add_term(Monomial::var(0), 1.0);
        let s = boolean_to_spin(&p);
        assert_eq!(s.coefficient(&Monomial::constant()), 0.5);
        assert_eq!(s.coefficient(&Monomial::var(0)), 0.5);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn product_to_spin() {
        let mut p = BooleanPolynomial::<f64>::zero(2);
        p.add_term(Monomial::new(vec![0, 1]), 1.0);
        let s = boolean_to_spin(&p);
        for m in [vec![], vec![0], vec![1], vec![0, 1]] {
            assert_eq!(s.coefficient(&Monomial::new(m)), 0.25);
        }
    }

    #[test]
    fn quadratic_input_needs_no_ancillas() {
        let mut p = BooleanPolynomial::<f64>::zero(3);
        p.add_term(Monomial::new(vec![0, 2]), 2.0);
        p.add_term(Monomial::var(1), -1.0);
        p.add_term(Monomial::constant(), 0.5);
        let prog = compile(&p, &CompileOptions::default()).unwrap();
        assert_eq!(prog.num_ancilla, 0);
        assert!(prog.gadgets.is_empty());
        for mask in 0..8 {
            let b = bits_of(mask, 3);
            let g = crate::costpoly::eval_polynomial(&p, &b).unwrap();
            assert!((prog.energy(&b) - g).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_term_adds_three_ancillas() {
        let mut p = BooleanPolynomial::<f64>::zero(3);
        p.add_term(Monomial::new(vec![0, 1, 2]), 1.0);
        let prog = compile(&p, &CompileOptions::default()).unwrap();
        assert_eq!(prog.num_ancilla, 3);
        assert_eq!(prog.gadgets.len(), 1);
        assert_eq!(prog.gadgets[0].ancillas, 3..6);
        prog.validate().unwrap();
        for mask in 0..8 {
            let b = bits_of(mask, 3);
            let want = if mask == 7 { 1.0 } else { 0.0 };
            assert!((prog.ancilla_minimized_energy(&b) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn spin_cap_enforced() {
        let mut p = BooleanPolynomial::<f64>::zero(6);
        p.add_term(Monomial::new((0..6).collect()), 1.0);
        let opts = CompileOptions {
            spin_cap: Some(20),
            ..Default::default()
        };
        assert!(matches!(compile(&p, &opts), Err(Error::TermBudget { .. })));
        assert!(compile(&p, &CompileOptions::export_mode()).is_ok());
    }

    #[test]
    fn global_scale_shares_coupling() {
        let mut p = BooleanPolynomial::<f64>::zero(4);
        p.add_term(Monomial::new(vec![0, 1, 2]), 1.0);
        p.add_term(Monomial::new(vec![1, 2, 3]), 4.0);
        let opts = CompileOptions {
            scale: GadgetScale::Global,
            spin_cap: None,
            ..Default::default()
        };
        let prog = compile(&p, &opts).unwrap();
        let ja: Vec<f64> = prog.gadgets.iter().map(|g| g.ancilla_coupling).collect();
        assert!(ja.windows(2).all(|w| w[0] == w[1]));
        prog.validate().unwrap();
    }

    #[test]
    fn program_json_round_trip() {
        let mut p = BooleanPolynomial::<f64>::zero(3);
        p.add_term(Monomial::new(vec![0, 1, 2]), -0.3);
        p.add_term(Monomial::new(vec![0, 2]), 1.25);
        let prog = compile(&p, &CompileOptions::default()).unwrap();
        let text = serde_json::to_string(&prog).unwrap();
        let back: IsingProgram<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, prog);
        let poly: BooleanPolynomial<f64> = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(poly, p);
    }

    #[test]
    fn rejects_small_gamma() {
        let p = BooleanPolynomial::<f64>::zero(1);
        let opts = CompileOptions {
            gamma: 1.5,
            ..Default::default()
        };
        assert!(compile(&p, &opts).is_err());
    }
}
