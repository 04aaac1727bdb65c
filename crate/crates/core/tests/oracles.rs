//! Cross-module checks against brute-force and hand-derived references.

use fincrash::costpoly::{decode_values, encode_value, eval_polynomial, CostModel, CostOptions};
use fincrash::isingcompile::{compile, export_qubo, import_qubo, reduce_kbody, AncillaAllocator, CompileOptions, GadgetParams, IsingProgram};
use fincrash::linalg::Matrix;
use fincrash::netmodel::{
    fixed_point_equilibrium, linear_market_values, random_network, FinancialNetwork, RandomNetworkParams,
    StartPoint,
};
use fincrash::solvers::{decode_solution, solve_anneal, solve_exhaustive, AnnealSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bits_of(mask: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| (mask >> i & 1) as u8).collect()
}

/// One institution, no cross-holdings: `v = p - beta` below threshold.
fn toy(price: f64, v_crit: f64, beta: f64) -> FinancialNetwork<f64> {
    FinancialNetwork::new(Matrix::identity(1), Matrix::zeros(1, 1), vec![price], vec![v_crit], vec![beta]).unwrap()
}

#[test]
fn two_by_two_against_cramer() {
    let c = Matrix::<f64>::from_rows(vec![vec![0.0, 0.3], vec![0.2, 0.0]]).unwrap();
    let net = FinancialNetwork::new(Matrix::identity(2), c, vec![10.0, 10.0], vec![0.0; 2], vec![0.0; 2]).unwrap();
    let v = linear_market_values(&net).unwrap();
    // (I - C) V = (10, 10): det = 1 - 0.06
    let det = 0.94;
    let big_v = [(10.0 + 0.3 * 10.0) / det, (10.0 + 0.2 * 10.0) / det];
    assert!((v[0] - 0.8 * big_v[0]).abs() < 1e-12);
    assert!((v[1] - 0.7 * big_v[1]).abs() < 1e-12);
}

#[test]
fn compiled_toy_ground_state_is_min_of_cost() {
    for (price, v_crit, beta) in [(10.0, 20.0, 5.0), (10.0, 4.0, 3.0), (10.0, 8.0, 5.0)] {
        let net = toy(price, v_crit, beta);
        let model = CostModel::build(&net, CostOptions { q: 1, order: 2, prune_rel: 0.0, ..Default::default() }).unwrap();
        let program = compile(&model.polynomial, &CompileOptions::default()).unwrap();
        let solved = solve_exhaustive(&program).unwrap();
        let g_min = (0..8)
            .map(|m| eval_polynomial(&model.polynomial, &bits_of(m, 3)).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((solved.energy - g_min).abs() <= 1e-9 * g_min.abs().max(1.0));
    }
}

#[test]
fn compiled_toy_decodes_near_classical_equilibrium() {
    // healthy institution: the linear step is close to 1 near v = p
    let net = toy(10.0, 2.0, 1.0);
    let model = CostModel::build(&net, CostOptions { q: 1, order: 2, prune_rel: 0.0, ..Default::default() }).unwrap();
    let program = compile(&model.polynomial, &CompileOptions::default()).unwrap();
    let solved = solve_exhaustive(&program).unwrap();
    let decoded = decode_solution(&solved.bits, &model.encoding, &net, &model.approximants).unwrap();
    let classical = fixed_point_equilibrium(&net, StartPoint::FromAbove, 10, 1e-12).unwrap();
    // grid spacing is twice the resolution; the approximant bias moves the
    // optimum by at most one grid step here
    let step = 2.0 * model.encoding.resolution();
    assert!((decoded.values[0] - classical.v[0]).abs() <= step, "{:?} vs {:?}", decoded.values, classical.v);
    assert_eq!(decoded.failed, classical.failed);
}

#[test]
fn decoding_ignores_ancillas_and_zero_bits_fail() {
    let net: FinancialNetwork<f64> = random_network(&RandomNetworkParams { n: 2, m: 3, seed: 4, ..Default::default() }).unwrap();
    let model = CostModel::build(&net, CostOptions { q: 1, order: 3, ..Default::default() }).unwrap();
    let zeros = vec![0u8; 6];
    let d = decode_solution(&zeros, &model.encoding, &net, &model.approximants).unwrap();
    assert_eq!(d.values, vec![0.0, 0.0]);
    assert_eq!(d.failed, vec![true, true]);
    let mut with_ancillas = zeros.clone();
    with_ancillas.extend([1, 1, 0, 1]);
    let e = decode_solution(&with_ancillas, &model.encoding, &net, &model.approximants).unwrap();
    assert_eq!(d, e);
    assert!(decode_solution(&zeros[..5], &model.encoding, &net, &model.approximants).is_err());
}

#[test]
fn on_grid_equilibrium_has_small_exact_residual() {
    let net: FinancialNetwork<f64> = random_network(&RandomNetworkParams { n: 3, m: 5, seed: 9, ..Default::default() }).unwrap();
    let model = CostModel::build(&net, CostOptions { q: 2, order: 3, ..Default::default() }).unwrap();
    let eq = fixed_point_equilibrium(&net, StartPoint::FromAbove, 20, 1e-12).unwrap();
    let bits: Vec<u8> = eq.v.iter().flat_map(|&v| encode_value(v, &model.encoding).unwrap()).collect();
    let decoded = decode_solution(&bits, &model.encoding, &net, &model.approximants).unwrap();
    // each component moves by at most the resolution; the map v -> M b(v)
    // is flat away from thresholds, so the cost is at most n res^2
    let res = model.encoding.resolution();
    assert_eq!(decoded.failed, eq.failed);
    assert!(decoded.exact_residual <= 3.0 * res * res * (1.0 + 1e-9));
}

#[test]
fn zero_coupling_gadget_is_flat() {
    let params = GadgetParams::scaled(0.0, 10.0, 1e-6);
    let mut alloc = AncillaAllocator::starting_at(3);
    let frag = reduce_kbody(&[0, 1, 2], 0.0, &params, &mut alloc);
    let mins: Vec<f64> = (0..8u64)
        .map(|l| {
            (0..8u64)
                .map(|a| {
                    let m = l | a << 3;
                    frag.energy(|i| if m >> i & 1 == 1 { 1.0 } else { -1.0 })
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    assert!(mins.iter().all(|e| e.abs() < 1e-15), "{mins:?}");
}

#[test]
fn qubo_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net: FinancialNetwork<f64> = random_network(&RandomNetworkParams { n: 1, m: 4, seed: 2, ..Default::default() }).unwrap();
    let model = CostModel::build(&net, CostOptions { q: 1, order: 3, ..Default::default() }).unwrap();
    let program = compile(&model.polynomial, &CompileOptions::default()).unwrap();
    assert!(program.num_ancilla > 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.qubo");
    export_qubo(&program, &path, &["config {\"seed\":2}".into()]).unwrap();
    let back = import_qubo::<f64>(&path).unwrap();
    assert_eq!(back.num_variables, program.num_spins());
    assert_eq!(back.num_logical, 3);
    for _ in 0..100 {
        let bits: Vec<u8> = (0..program.num_spins()).map(|_| rng.gen_range(0..=1)).collect();
        let a = program.energy(&bits);
        assert!((a - back.energy(&bits)).abs() <= 1e-10 * a.abs().max(1.0));
    }
    let reimported = back.to_program();
    let a = solve_exhaustive(&program).unwrap();
    let b = solve_exhaustive(&reimported).unwrap();
    assert!((a.energy - b.energy).abs() <= 1e-10 * a.energy.abs().max(1.0));
    assert_eq!(a.bits, b.bits);
}

fn spin_glass(rng: &mut ChaCha8Rng, n: usize, density: f64) -> IsingProgram<f64> {
    let mut p = IsingProgram::empty(n);
    for i in 0..n {
        p.add_field(i, rng.gen_range(-1.0..1.0));
        for j in i + 1..n {
            if rng.gen_bool(density) {
                p.add_coupling(i, j, rng.gen_range(-1.0..1.0));
            }
        }
    }
    p
}

#[test]
fn anneal_matches_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut programs = vec![spin_glass(&mut rng, 20, 0.3), spin_glass(&mut rng, 16, 1.0)];
    for seed in [3, 8, 21] {
        let net: FinancialNetwork<f64> =
            random_network(&RandomNetworkParams { n: 1, m: 3, seed, ..Default::default() }).unwrap();
        let model = CostModel::build(&net, CostOptions { q: 1, order: 3, ..Default::default() }).unwrap();
        programs.push(compile(&model.polynomial, &CompileOptions::default()).unwrap());
    }
    let net: FinancialNetwork<f64> = random_network(&RandomNetworkParams { n: 3, m: 6, seed: 5, ..Default::default() }).unwrap();
    let model = CostModel::build(&net, CostOptions { q: 1, order: 2, ..Default::default() }).unwrap();
    programs.push(compile(&model.polynomial, &CompileOptions::default()).unwrap());
    assert!(programs.iter().all(|p| p.num_spins() <= 20));

    let truth: Vec<f64> = programs.iter().map(|p| solve_exhaustive(p).unwrap().energy).collect();
    let mut hits = 0;
    for run in 0..100u64 {
        let k = run as usize % programs.len();
        let schedule = AnnealSchedule::default_for(&programs[k], run);
        let r = solve_anneal(&programs[k], &schedule).unwrap();
        if (r.energy - truth[k]).abs() <= 1e-9 * truth[k].abs().max(1.0) {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn anneal_independent_spins_any_schedule() {
    let mut p = IsingProgram::<f64>::empty(8);
    for i in 0..8 {
        p.add_field(i, if i % 3 == 0 { 0.4 } else { -0.9 });
    }
    let s = AnnealSchedule { steps: 2, sweeps_per_step: 1, restarts: 1, ..AnnealSchedule::default_for(&p, 17) };
    let r = solve_anneal(&p, &s).unwrap();
    let want: Vec<u8> = (0..8).map(|i| if i % 3 == 0 { 0 } else { 1 }).collect();
    assert_eq!(r.bits, want);
}

#[test]
fn decoded_values_round_trip_encoding() {
    let net: FinancialNetwork<f64> = random_network(&RandomNetworkParams { n: 2, m: 4, seed: 8, ..Default::default() }).unwrap();
    let model = CostModel::build(&net, CostOptions { q: 2, order: 1, ..Default::default() }).unwrap();
    for mask in 0..1u64 << 10 {
        let b = bits_of(mask, 10);
        let v = decode_values(&b, 2, &model.encoding).unwrap();
        let again: Vec<u8> = v.iter().flat_map(|&x| encode_value(x, &model.encoding).unwrap()).collect();
        assert_eq!(again, b);
    }
}
