//! Entanglement measures, displaced-parity Bell tests and phase sensitivity.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elements::{displaced_parity_dense, two_mode_matrix, DISPLACEMENT_TOLERANCE};
use crate::error::{Error, Result};
use crate::fock::{displacement_matrix, hermitian_eigenvalues, ModeLabel, Occupation, PureState};
use crate::optimize::nelder_mead;

/// Entanglement of a pure state across a bipartition.
#[derive(Clone, Debug, Serialize)]
pub struct EntanglementSummary {
    /// Von Neumann entropy of either reduced state, in bits.
    pub entropy_bits: f64,
    pub log_negativity: f64,
    /// Squared Schmidt coefficients, descending, summing to 1.
    pub schmidt_spectrum: Vec<f64>,
}

/// Spectra below this are treated as numerical noise.
const SPECTRUM_FLOOR: f64 = 1e-15;

/// Schmidt weights below the register's tail tolerance are truncation
/// artifacts; left in, their square roots bias the log-negativity by ~1e-6.
fn spectrum_floor(state: &PureState) -> f64 {
    SPECTRUM_FLOOR.max(state.register().epsilon())
}

pub fn entropy_bits(spectrum: &[f64]) -> f64 {
    spectrum
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Schmidt spectrum and derived measures of a pure state across `keep | rest`.
pub fn entanglement(state: &PureState, keep: &[ModeLabel]) -> Result<EntanglementSummary> {
    let norm = state.norm_sqr();
    if norm < 1e-300 {
        return Err(Error::Degenerate("entanglement of a zero state".into()));
    }
    let rest: Vec<ModeLabel> = state
        .register()
        .modes()
        .iter()
        .copied()
        .filter(|m| !keep.contains(m))
        .collect();
    // the smaller reduced matrix has the same nonzero spectrum
    let side = if distinct_count(state, keep)? <= distinct_count(state, &rest)? {
        keep
    } else {
        &rest
    };
    let rho = state.partial_trace(side)?;
    let mut spectrum: Vec<f64> = rho
        .eigenvalues()
        .into_iter()
        .map(|l| l / norm)
        .filter(|&l| l > spectrum_floor(state))
        .collect();
    let total: f64 = spectrum.iter().sum();
    for p in &mut spectrum {
        *p /= total;
    }
    let root_sum: f64 = spectrum.iter().map(|p| p.sqrt()).sum();
    Ok(EntanglementSummary {
        entropy_bits: entropy_bits(&spectrum),
        log_negativity: (2.0 * root_sum.log2()).max(0.0),
        schmidt_spectrum: spectrum,
    })
}

fn distinct_count(state: &PureState, modes: &[ModeLabel]) -> Result<usize> {
    let idx = modes
        .iter()
        .map(|&m| state.register().index_of(m))
        .collect::<Result<Vec<_>>>()?;
    let mut keys: Vec<Occupation> = state
        .iter()
        .map(|(o, _)| {
            idx.iter()
                .enumerate()
                .fold(Occupation::VACUUM, |k, (j, &i)| k.with(j, o.get(i)))
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    Ok(keys.len())
}

/// `|⟨a|b⟩|² / (‖a‖²‖b‖²)`.
pub fn fidelity(a: &PureState, b: &PureState) -> Result<f64> {
    let denom = a.norm_sqr() * b.norm_sqr();
    if denom < 1e-300 {
        return Err(Error::Degenerate("fidelity with a zero state".into()));
    }
    Ok(a.inner(b)?.norm_sqr() / denom)
}

/// Quantum Fisher information for a phase imprinted by `n̂` on `probe`:
/// `4 Var(n̂)` for a pure state.
pub fn qfi_phase(state: &PureState, probe: ModeLabel) -> Result<f64> {
    Ok(4.0 * state.number_variance(probe)?)
}

/// Logarithmic negativity of a two-qubit density matrix, basis `|ab⟩` with
/// index `2a + b`.
pub fn two_qubit_log_negativity(rho: &DMatrix<C64>) -> f64 {
    let mut pt = DMatrix::<C64>::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    pt[(2 * a + d, 2 * c + b)] = rho[(2 * a + b, 2 * c + d)];
                }
            }
        }
    }
    let trace_norm: f64 = hermitian_eigenvalues(&pt).iter().map(|l| l.abs()).sum();
    let trace = rho.trace().re;
    (trace_norm / trace).log2().max(0.0)
}

/// A polarization qubit carried by a coherent envelope on one path:
/// `|H⟩ = |A⟩_H|0⟩_V`, `|V⟩ = |0⟩_H|A⟩_V`.
#[derive(Clone, Copy, Debug)]
pub struct LogicalQubit {
    pub h: ModeLabel,
    pub v: ModeLabel,
    pub amplitude: C64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogicalEntanglement {
    pub log_negativity: f64,
    /// Probability carried by the two-qubit logical subspace.
    pub logical_weight: f64,
    /// `|⟨H|V⟩|` of the non-orthogonal envelope states.
    pub envelope_overlap: f64,
    /// Projected two-qubit density matrix, trace normalized.
    #[serde(skip)]
    pub density: DMatrix<C64>,
}

/// Project a state onto the span of two logical polarization qubits, using
/// the symmetric (Löwdin) orthonormalization of each envelope pair, and
/// return the entanglement of the projected two-qubit state.
pub fn logical_entanglement(
    state: &PureState,
    qubits: [LogicalQubit; 2],
) -> Result<LogicalEntanglement> {
    let reg = state.register();
    let norm = state.norm_sqr();
    if norm < 1e-300 {
        return Err(Error::Degenerate(
            "logical projection of a zero state".into(),
        ));
    }
    let mut idx = Vec::new();
    let mut bases = Vec::new();
    let mut overlap = 0.0;
    for q in &qubits {
        let (ih, iv) = (reg.index_of(q.h)?, reg.index_of(q.v)?);
        let cutoff = reg.cutoff(ih).min(reg.cutoff(iv));
        let (basis, s) = lowdin_pair(q.amplitude, cutoff);
        overlap = s;
        idx.push((ih, iv));
        bases.push(basis);
    }
    let covered: Vec<usize> = idx.iter().flat_map(|&(h, v)| [h, v]).collect();
    let rest: Vec<usize> = (0..reg.len()).filter(|i| !covered.contains(i)).collect();

    // c[rest][2a + b] = ⟨e_a e_b, rest|ψ⟩
    let mut coeffs: std::collections::BTreeMap<Occupation, [C64; 4]> = Default::default();
    for (o, amp) in state.iter() {
        let local = |q: usize| {
            let (h, v) = idx[q];
            let (nh, nv) = (o.get(h), o.get(v));
            let b = &bases[q];
            [b.amplitude(0, nh, nv), b.amplitude(1, nh, nv)]
        };
        let (l1, l2) = (local(0), local(1));
        if l1.iter().chain(&l2).all(|c| c.norm() == 0.0) {
            continue;
        }
        let key = rest
            .iter()
            .enumerate()
            .fold(Occupation::VACUUM, |k, (j, &i)| k.with(j, o.get(i)));
        let entry = coeffs.entry(key).or_insert([C64::new(0.0, 0.0); 4]);
        for a in 0..2 {
            for b in 0..2 {
                entry[2 * a + b] += l1[a].conj() * l2[b].conj() * amp;
            }
        }
    }
    let mut rho = DMatrix::<C64>::zeros(4, 4);
    for c in coeffs.values() {
        for r in 0..4 {
            for s in 0..4 {
                rho[(r, s)] += c[r] * c[s].conj();
            }
        }
    }
    let weight = rho.trace().re / norm;
    if weight < 1e-14 {
        return Err(Error::Degenerate(
            "state has no weight in the logical subspace".into(),
        ));
    }
    let density = rho.clone() / C64::new(rho.trace().re, 0.0);
    Ok(LogicalEntanglement {
        log_negativity: two_qubit_log_negativity(&density),
        logical_weight: weight,
        envelope_overlap: overlap,
        density,
    })
}

/// Orthonormal pair spanning `{|A,0⟩, |0,A⟩}` closest to the originals.
struct LowdinPair {
    /// `e_k = u_k |A,0⟩ + w_k |0,A⟩`
    mix: [[f64; 2]; 2],
    envelope: Vec<C64>,
}

impl LowdinPair {
    fn amplitude(&self, k: usize, nh: usize, nv: usize) -> C64 {
        let coh = |n: usize| self.envelope.get(n).copied().unwrap_or_default();
        let h_part = if nv == 0 { coh(nh) } else { C64::new(0.0, 0.0) };
        let v_part = if nh == 0 { coh(nv) } else { C64::new(0.0, 0.0) };
        h_part * self.mix[k][0] + v_part * self.mix[k][1]
    }
}

fn lowdin_pair(amplitude: C64, cutoff: usize) -> (LowdinPair, f64) {
    let envelope = crate::states::coherent_ket(amplitude, cutoff).amps;
    // ⟨A,0|0,A⟩ = |⟨0|A⟩|² is real and positive
    let s = envelope[0].norm_sqr();
    let p = 1.0 / (1.0 + s).sqrt();
    let m = 1.0 / (1.0 - s).sqrt();
    let (diag, off) = (0.5 * (p + m), 0.5 * (p - m));
    (
        LowdinPair {
            mix: [[diag, off], [off, diag]],
            envelope,
        },
        s,
    )
}

/// The four displacements of a displaced-parity CHSH test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellSettings {
    pub beta1: C64,
    pub beta1p: C64,
    pub beta2: C64,
    pub beta2p: C64,
}

impl BellSettings {
    pub fn zero() -> Self {
        let z = C64::new(0.0, 0.0);
        Self {
            beta1: z,
            beta1p: z,
            beta2: z,
            beta2p: z,
        }
    }

    fn max_norm(&self) -> f64 {
        [self.beta1, self.beta1p, self.beta2, self.beta2p]
            .iter()
            .map(|b| b.norm())
            .fold(0.0, f64::max)
    }
}

/// `E(β₁,β₂) + E(β₁,β₂′) + E(β₁′,β₂) − E(β₁′,β₂′)` with displaced-parity correlators.
pub fn chsh_displaced_parity(state: &PureState, settings: &BellSettings) -> Result<f64> {
    let ctx = ParityContext::new(state)?;
    ctx.chsh(settings)
}

/// Direction of the displacements explored by the Bell optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BellAxis {
    Real,
    Imaginary,
    /// Grid on the imaginary axis, refinement over the full complex plane.
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellSearch {
    pub grid_points: usize,
    pub refine_iters: usize,
    pub radius: f64,
    pub axis: BellAxis,
}

impl Default for BellSearch {
    fn default() -> Self {
        Self {
            grid_points: 25,
            refine_iters: 400,
            radius: 0.6,
            axis: BellAxis::Imaginary,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BellOptimum {
    pub settings: BellSettings,
    /// `|B|` at the refined settings.
    pub value: f64,
    pub signed_value: f64,
    /// `|B|` at the best grid point.
    pub grid_value: f64,
    pub evaluations: usize,
}

/// Dense two-mode amplitudes shared by repeated parity evaluations.
struct ParityContext {
    psi: DMatrix<C64>,
    norm: f64,
}

impl ParityContext {
    fn new(state: &PureState) -> Result<Self> {
        let norm = state.norm_sqr();
        if norm < 1e-300 {
            return Err(Error::Degenerate("Bell test on a zero state".into()));
        }
        Ok(Self {
            psi: two_mode_matrix(state)?,
            norm,
        })
    }

    fn displacements(&self, beta: C64) -> (DMatrix<C64>, DMatrix<C64>) {
        (
            displacement_matrix(-beta, self.psi.nrows()),
            displacement_matrix(-beta, self.psi.ncols()),
        )
    }

    fn correlator(&self, d1: &DMatrix<C64>, d2: &DMatrix<C64>) -> f64 {
        displaced_parity_dense(&self.psi, d1, d2).0 / self.norm
    }

    /// Largest mass a single-mode displacement of size `beta` pushes past the cutoff.
    fn truncation_loss(&self, beta: C64) -> f64 {
        let (d1, d2) = self.displacements(beta);
        let id1 = DMatrix::identity(self.psi.nrows(), self.psi.nrows());
        let id2 = DMatrix::identity(self.psi.ncols(), self.psi.ncols());
        let l1 = self.norm - displaced_parity_dense(&self.psi, &d1, &id2).1;
        let l2 = self.norm - displaced_parity_dense(&self.psi, &id1, &d2).1;
        l1.max(l2) / self.norm
    }

    fn chsh(&self, s: &BellSettings) -> Result<f64> {
        let loss = self.truncation_loss_of(s);
        if loss > DISPLACEMENT_TOLERANCE {
            return Err(Error::CutoffExceeded {
                mode: ModeLabel::plain(1),
                cutoff: self.psi.nrows().max(self.psi.ncols()) - 1,
                tail: loss,
                epsilon: DISPLACEMENT_TOLERANCE,
            });
        }
        Ok(self.chsh_unchecked(s))
    }

    fn truncation_loss_of(&self, s: &BellSettings) -> f64 {
        [s.beta1, s.beta1p, s.beta2, s.beta2p]
            .iter()
            .map(|&b| self.truncation_loss(b))
            .fold(0.0, f64::max)
    }

    fn chsh_unchecked(&self, s: &BellSettings) -> f64 {
        let a1 = displacement_matrix(-s.beta1, self.psi.nrows());
        let a1p = displacement_matrix(-s.beta1p, self.psi.nrows());
        let b2 = displacement_matrix(-s.beta2, self.psi.ncols());
        let b2p = displacement_matrix(-s.beta2p, self.psi.ncols());
        self.correlator(&a1, &b2) + self.correlator(&a1, &b2p) + self.correlator(&a1p, &b2)
            - self.correlator(&a1p, &b2p)
    }
}

fn axis_point(axis: BellAxis, t: f64) -> C64 {
    match axis {
        BellAxis::Real => C64::new(t, 0.0),
        BellAxis::Imaginary | BellAxis::Complex => C64::new(0.0, t),
    }
}

/// Best CHSH value over a grid of settings along one axis, followed by a
/// Nelder–Mead refinement. Returns the settings maximizing `|B|`.
pub fn chsh_optimize(state: &PureState, search: &BellSearch) -> Result<BellOptimum> {
    if search.grid_points < 2 {
        return Err(Error::InvalidParameter(
            "Bell grid needs at least 2 points".into(),
        ));
    }
    if !(search.radius > 0.0 && search.radius.is_finite()) {
        return Err(Error::InvalidParameter(
            "Bell search radius must be positive".into(),
        ));
    }
    let ctx = ParityContext::new(state)?;
    let r = search.radius;
    let probes: Vec<C64> = (0..8)
        .map(|k| C64::from_polar(r, k as f64 * std::f64::consts::FRAC_PI_4))
        .collect();
    let worst = probes
        .iter()
        .map(|&b| ctx.truncation_loss(b))
        .fold(0.0, f64::max);
    if worst > DISPLACEMENT_TOLERANCE {
        return Err(Error::CutoffExceeded {
            mode: state.register().modes()[0],
            cutoff: state.register().max_cutoff(),
            tail: worst,
            epsilon: DISPLACEMENT_TOLERANCE,
        });
    }

    let g = search.grid_points;
    let ts: Vec<f64> = (0..g)
        .map(|k| -r + 2.0 * r * k as f64 / (g - 1) as f64)
        .collect();
    let mats: Vec<_> = ts
        .iter()
        .map(|&t| ctx.displacements(axis_point(search.axis, t)))
        .collect();
    let table: Vec<Vec<f64>> = (0..g)
        .into_par_iter()
        .map(|i| {
            (0..g)
                .map(|j| ctx.correlator(&mats[i].0, &mats[j].1))
                .collect()
        })
        .collect();

    // B = (E[i,k] + E[j,k]) + (E[i,l] − E[j,l]) separates in k and l
    let mut best = (f64::NEG_INFINITY, 0.0, [0usize; 4]);
    for sign in [1.0, -1.0] {
        for i in 0..g {
            for j in 0..g {
                let (mut bk, mut vk) = (0, f64::NEG_INFINITY);
                let (mut bl, mut vl) = (0, f64::NEG_INFINITY);
                for (k, (x, y)) in table[i].iter().zip(&table[j]).enumerate() {
                    let a = sign * (x + y);
                    if a > vk {
                        vk = a;
                        bk = k;
                    }
                    let b = sign * (x - y);
                    if b > vl {
                        vl = b;
                        bl = k;
                    }
                }
                if vk + vl > best.0 {
                    best = (vk + vl, sign, [i, j, bk, bl]);
                }
            }
        }
    }
    let (grid_abs, sign, [i, j, k, l]) = best;

    let to_settings = |x: &[f64]| -> BellSettings {
        match search.axis {
            BellAxis::Complex => BellSettings {
                beta1: C64::new(x[0], x[1]),
                beta1p: C64::new(x[2], x[3]),
                beta2: C64::new(x[4], x[5]),
                beta2p: C64::new(x[6], x[7]),
            },
            axis => BellSettings {
                beta1: axis_point(axis, x[0]),
                beta1p: axis_point(axis, x[1]),
                beta2: axis_point(axis, x[2]),
                beta2p: axis_point(axis, x[3]),
            },
        }
    };
    let start: Vec<f64> = match search.axis {
        BellAxis::Complex => [ts[i], ts[j], ts[k], ts[l]]
            .iter()
            .flat_map(|&t| [0.0, t])
            .collect(),
        _ => vec![ts[i], ts[j], ts[k], ts[l]],
    };
    let grid_settings = to_settings(&start);
    let objective = |x: &[f64]| {
        let s = to_settings(x);
        if s.max_norm() > r {
            return f64::INFINITY;
        }
        -sign * ctx.chsh_unchecked(&s)
    };
    let step = 2.0 * r / (g - 1) as f64;
    let refined = nelder_mead(objective, &start, 0.5 * step, search.refine_iters, 1e-15);
    let (settings, signed) = if -refined.value >= grid_abs {
        let s = to_settings(&refined.x);
        (s, ctx.chsh_unchecked(&s))
    } else {
        (grid_settings, sign * grid_abs)
    };
    Ok(BellOptimum {
        settings,
        value: signed.abs(),
        signed_value: signed,
        grid_value: grid_abs,
        evaluations: g * g + refined.evaluations,
    })
}
