//! Dense reference implementations shared by the integration tests. None of
//! them go through the sparse engine or its eigen-based exponentials.

#![allow(dead_code)]

use duality_core::analysis::entanglement;
use duality_core::fock::{ModeLabel, ModeRegister, Occupation, PureState};
use duality_core::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `exp(a)` by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let norm: f64 = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.25 {
        squarings += 1;
    }
    let scaled = a * c(1.0 / 2f64.powi(squarings), 0.0);
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &scaled * c(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn annihilation(dim: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Leading `dim × dim` block of `D(β)` computed on `dim + pad` levels.
pub fn dense_displacement(beta: C64, dim: usize, pad: usize) -> DMatrix<C64> {
    let a = annihilation(dim + pad);
    let g = a.adjoint() * beta - &a * beta.conj();
    expm(&g).view((0, 0), (dim, dim)).into_owned()
}

/// Leading block of `S(r) = exp[(r/2)(â² − â†²)]` computed on `dim + pad` levels.
pub fn dense_squeezing(r: f64, dim: usize, pad: usize) -> DMatrix<C64> {
    let a = annihilation(dim + pad);
    let a2 = &a * &a;
    let g = (&a2 - a2.adjoint()) * c(0.5 * r, 0.0);
    expm(&g).view((0, 0), (dim, dim)).into_owned()
}

/// Two-mode mixer on the full truncated product space.
pub fn dense_mixer(theta: f64, phase: f64, dim: usize) -> DMatrix<C64> {
    let a = annihilation(dim);
    let id = DMatrix::<C64>::identity(dim, dim);
    let (aa, bb) = (kron(&a, &id), kron(&id, &a));
    let e = C64::from_polar(1.0, phase);
    let g = (aa.adjoint() * &bb * e - &aa * bb.adjoint() * e.conj()) * c(theta, 0.0);
    expm(&g)
}

pub fn dims(reg: &ModeRegister) -> Vec<usize> {
    reg.cutoffs().iter().map(|c| c + 1).collect()
}

fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = index % dims[i];
        index /= dims[i];
    }
    out
}

/// `Tr_rest |ψ⟩⟨ψ|` by explicit index loops, kept modes in register order.
pub fn dense_partial_trace(psi: &[C64], dims: &[usize], keep: &[usize]) -> DMatrix<C64> {
    let kdims: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
    let ksize: usize = kdims.iter().product();
    let mut rho = DMatrix::zeros(ksize, ksize);
    let kidx = |d: &[usize]| keep.iter().fold(0, |acc, &i| acc * dims[i] + d[i]);
    for (i, a) in psi.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let di = digits(i, dims);
        for (j, b) in psi.iter().enumerate() {
            let dj = digits(j, dims);
            let same_rest = (0..dims.len()).all(|m| keep.contains(&m) || di[m] == dj[m]);
            if same_rest {
                rho[(kidx(&di), kidx(&dj))] += a * b.conj();
            }
        }
    }
    rho
}

/// Normalized state with random amplitudes on every basis tuple accepted by `allow`.
pub fn random_state(
    reg: &ModeRegister,
    raw: &[(f64, f64)],
    allow: impl Fn(&[usize]) -> bool,
) -> PureState {
    let d = dims(reg);
    let size: usize = d.iter().product();
    let terms: Vec<(Vec<usize>, C64)> = (0..size)
        .map(|i| digits(i, &d))
        .zip(raw.iter().cycle())
        .filter(|(ns, _)| allow(ns))
        .map(|(ns, &(re, im))| (ns, c(re, im)))
        .collect();
    let s = PureState::from_terms(reg, terms).unwrap();
    if s.norm_sqr() < 1e-6 {
        PureState::vacuum(reg)
    } else {
        s.normalized().unwrap()
    }
}

pub fn raw_amplitudes(len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
}

pub fn plain_register(cutoffs: &[usize]) -> ModeRegister {
    ModeRegister::new(
        cutoffs
            .iter()
            .enumerate()
            .map(|(i, &c)| (ModeLabel::plain(i as u8 + 1), c))
            .collect(),
    )
    .unwrap()
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), TestCaseError> {
    if (a - b).abs() <= tol {
        Ok(())
    } else {
        Err(TestCaseError::fail(format!(
            "{what}: {a} vs {b} (tol {tol:e})"
        )))
    }
}

// Properties below are shared by the proptest suite and the acceptance run.

/// Mixer on two modes with `n₁ + n₂ ≤ cutoff`: norm and inner products are
/// preserved, and the result matches the dense exponential.
pub fn mixer_is_unitary(
    raw: &[(f64, f64)],
    raw2: &[(f64, f64)],
    cutoff: usize,
    theta: f64,
    phase: f64,
) -> Result<(), TestCaseError> {
    let reg = plain_register(&[cutoff, cutoff]);
    let allow = |ns: &[usize]| ns[0] + ns[1] <= cutoff;
    let (x, y) = (
        random_state(&reg, raw, allow),
        random_state(&reg, raw2, allow),
    );
    let (m1, m2) = (ModeLabel::plain(1), ModeLabel::plain(2));
    let ux = x.apply_two_mode_mixer(m1, m2, theta, phase).unwrap();
    let uy = y.apply_two_mode_mixer(m1, m2, theta, phase).unwrap();
    close(ux.norm_sqr(), 1.0, 1e-12, "norm")?;
    close(ux.norm_deficit(), 0.0, 1e-12, "deficit")?;
    let (before, after) = (x.inner(&y).unwrap(), ux.inner(&uy).unwrap());
    close((before - after).norm(), 0.0, 1e-12, "inner product")?;

    let u = dense_mixer(theta, phase, cutoff + 1);
    let xv = nalgebra::DVector::from_vec(x.to_dense());
    let expected = &u * xv;
    let got = ux.to_dense();
    let err = got
        .iter()
        .zip(expected.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    close(err, 0.0, 1e-10, "dense mixer oracle")
}

/// Norm bookkeeping: truncated displacement loses exactly what it books as
/// deficit, and creation books the input mass it drops at the cutoff.
pub fn norm_is_booked(raw: &[(f64, f64)], cutoff: usize, beta: C64) -> Result<(), TestCaseError> {
    let reg = plain_register(&[cutoff]);
    let x = random_state(&reg, raw, |_| true);
    let m = ModeLabel::plain(1);
    let d = duality_core::fock::displacement_matrix(beta, cutoff + 1);
    let y = x.apply_single_mode(m, &d).unwrap();
    close(
        y.norm_sqr() + y.norm_deficit(),
        1.0,
        1e-12,
        "displacement budget",
    )?;

    let z = x.apply_creation(m).unwrap();
    let expected: f64 = x
        .iter()
        .map(|(o, a)| {
            let n = o.get(0);
            a.norm_sqr() * if n < cutoff { (n + 1) as f64 } else { 1.0 }
        })
        .sum();
    close(
        z.norm_sqr() + z.norm_deficit(),
        expected,
        1e-12,
        "creation budget",
    )
}

/// Sparse partial trace equals the dense index-loop oracle. Needs at least
/// two modes; the kept set is a proper subset.
pub fn partial_trace_matches_dense(
    raw: &[(f64, f64)],
    cutoffs: &[usize],
    keep_mask: u8,
) -> Result<(), TestCaseError> {
    let reg = plain_register(cutoffs);
    let x = random_state(&reg, raw, |_| true);
    let mut keep: Vec<usize> = (0..cutoffs.len())
        .filter(|i| keep_mask >> i & 1 == 1)
        .collect();
    if keep.is_empty() {
        keep.push(0);
    }
    if keep.len() == cutoffs.len() {
        keep.pop();
    }
    let labels: Vec<ModeLabel> = keep.iter().map(|&i| reg.modes()[i]).collect();
    let sparse = x.partial_trace(&labels).unwrap().to_dense();
    let dense = dense_partial_trace(&x.to_dense(), &dims(&reg), &keep);
    let err = (&sparse - &dense)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    close(err, 0.0, 1e-12, "partial trace")
}

/// Entropy and log-negativity across sides {1,2} | {3,4} are unchanged by
/// mixers and phase shifts acting within one side.
pub fn entanglement_is_local_invariant(
    raw: &[(f64, f64)],
    cutoff: usize,
    angles: [f64; 6],
) -> Result<(), TestCaseError> {
    let reg = plain_register(&[cutoff; 4]);
    let x = random_state(&reg, raw, |ns| {
        ns[0] + ns[1] <= cutoff && ns[2] + ns[3] <= cutoff
    });
    let m: Vec<ModeLabel> = reg.modes().to_vec();
    let side = [m[0], m[1]];
    let before = entanglement(&x, &side).unwrap();
    let y = x
        .apply_two_mode_mixer(m[0], m[1], angles[0], angles[1])
        .unwrap()
        .apply_phase_shift(m[1], angles[2])
        .unwrap()
        .apply_two_mode_mixer(m[2], m[3], angles[3], angles[4])
        .unwrap()
        .apply_phase_shift(m[2], angles[5])
        .unwrap();
    let after = entanglement(&y, &side).unwrap();
    close(before.entropy_bits, after.entropy_bits, 1e-8, "entropy")?;
    close(
        before.log_negativity,
        after.log_negativity,
        1e-8,
        "log negativity",
    )
}

/// Occupation tuples of a state, for assertions on supports.
pub fn support(state: &PureState) -> Vec<Vec<usize>> {
    let n = state.register().len();
    state
        .iter()
        .map(|(o, _): (Occupation, C64)| o.to_vec(n))
        .collect()
}
