//! Optical elements, conditional gates and measurement channels.
//!
//! Paths carry an H and a V mode (`ModeLabel::h(p)`, `ModeLabel::v(p)`).
//! Conditional gates act branch by branch on the occupation of a control
//! path, so they stay unitary whenever the condition does not depend on the
//! modes they modify.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    displacement_matrix, squeezing_matrix, BranchedOutcome, ModeLabel, Occupation, PureState,
};

/// Largest probability an element may push past the cutoff before it refuses.
pub const DISPLACEMENT_TOLERANCE: f64 = 1e-9;
/// Mass on doubly occupied control branches tolerated by the strict rule.
pub const CONTROL_TOLERANCE: f64 = 1e-12;

/// Deviations of the controlled operations from their ideal settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Imperfection {
    /// Displacement actually applied; `None` means the intended amplitude.
    pub displacement_actual: Option<C64>,
    pub flip_angle: f64,
    pub cphase_angle: f64,
}

impl Default for Imperfection {
    fn default() -> Self {
        Self {
            displacement_actual: None,
            flip_angle: PI,
            cphase_angle: PI,
        }
    }
}

impl Imperfection {
    pub fn is_perfect(&self) -> bool {
        self.displacement_actual.is_none() && self.flip_angle == PI && self.cphase_angle == PI
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarizerKind {
    H,
    V,
    Diag45,
}

/// When a conditional gate counts its control path as vertically polarized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlRule {
    /// V occupied and H empty; branches with both occupied are an error.
    Definite,
    /// Any V occupation triggers the gate, whatever the H mode holds.
    PresenceTriggered,
}

fn path_modes(state: &PureState, path: u8) -> Result<(usize, usize)> {
    let reg = state.register();
    Ok((
        reg.index_of(ModeLabel::h(path))?,
        reg.index_of(ModeLabel::v(path))?,
    ))
}

/// Polarizing beam splitter: H modes pass, V modes of the two paths are exchanged.
pub fn pbs(state: &PureState, path1: u8, path2: u8) -> Result<PureState> {
    path_modes(state, path1)?;
    path_modes(state, path2)?;
    state.swap_modes(ModeLabel::v(path1), ModeLabel::v(path2))
}

/// Half-wave plate at 45°: exchanges the H and V contents of a path.
pub fn hwp(state: &PureState, path: u8) -> Result<PureState> {
    path_modes(state, path)?;
    state.swap_modes(ModeLabel::h(path), ModeLabel::v(path))
}

/// `H → (H + V)/√2`, `V → (V − H)/√2` on the creation operators of a path.
pub fn rotate_diag45(state: &PureState, path: u8) -> Result<PureState> {
    path_modes(state, path)?;
    state.apply_two_mode_mixer(ModeLabel::h(path), ModeLabel::v(path), FRAC_PI_4, PI)
}

/// H or V polarizers split the state into a `pass` and a `blocked` branch;
/// the 45° element is a single unitary `pass` branch.
pub fn polarizer(state: &PureState, path: u8, kind: PolarizerKind) -> Result<BranchedOutcome> {
    let (ih, iv) = path_modes(state, path)?;
    let blocked_mode = match kind {
        PolarizerKind::H => iv,
        PolarizerKind::V => ih,
        PolarizerKind::Diag45 => {
            return Ok(BranchedOutcome::from_states(vec![(
                "pass",
                rotate_diag45(state, path)?,
            )]))
        }
    };
    Ok(BranchedOutcome::from_states(vec![
        ("pass", state.filter(|o| o.get(blocked_mode) == 0)),
        ("blocked", state.filter(|o| o.get(blocked_mode) > 0)),
    ]))
}

/// Refuse when an element lost more than the tolerated mass to truncation.
fn check_loss(before: &PureState, after: &PureState, mode: ModeLabel) -> Result<()> {
    let lost = after.norm_deficit() - before.norm_deficit();
    if lost > DISPLACEMENT_TOLERANCE * before.norm_sqr().max(f64::MIN_POSITIVE) {
        return Err(Error::CutoffExceeded {
            mode,
            cutoff: before.register().cutoff_of(mode)?,
            tail: lost,
            epsilon: DISPLACEMENT_TOLERANCE,
        });
    }
    Ok(())
}

/// `D(β) = exp(β â† − β* â)` on one mode.
pub fn displace(state: &PureState, mode: ModeLabel, beta: C64) -> Result<PureState> {
    let dim = state.register().cutoff_of(mode)? + 1;
    let out = state.apply_single_mode(mode, &displacement_matrix(beta, dim))?;
    check_loss(state, &out, mode)?;
    Ok(out)
}

/// `S(r) = exp[(r/2)(â² − â†²)]` on one mode; negative `r` anti-squeezes.
pub fn squeeze(state: &PureState, mode: ModeLabel, r: f64) -> Result<PureState> {
    let dim = state.register().cutoff_of(mode)? + 1;
    let out = state.apply_single_mode(mode, &squeezing_matrix(r, dim))?;
    check_loss(state, &out, mode)?;
    Ok(out)
}

/// `e^{iφ n̂}` on one mode.
pub fn phase_shift(state: &PureState, mode: ModeLabel, phi: f64) -> Result<PureState> {
    state.apply_phase_shift(mode, phi)
}

fn control_predicate(
    state: &PureState,
    control_path: u8,
    rule: ControlRule,
) -> Result<impl Fn(Occupation) -> bool> {
    let (ch, cv) = path_modes(state, control_path)?;
    if rule == ControlRule::Definite {
        let mixed: f64 = state
            .iter()
            .filter(|(o, _)| o.get(ch) > 0 && o.get(cv) > 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if mixed > CONTROL_TOLERANCE * state.norm_sqr() {
            return Err(Error::Contract(format!(
                "control path {control_path} carries H and V photons together (weight {mixed:.3e})"
            )));
        }
    }
    Ok(move |o: Occupation| o.get(cv) > 0)
}

/// Polarization rotation of `target` by `flip_angle` (π = full H↔V exchange)
/// on the branches where the control path is vertically polarized.
///
/// The partial flip is `exp[−i(f/2)(σ_x-like exchange)]` up to the phase that
/// makes `f = π` the plain mode swap.
pub fn cnot_pol(
    state: &PureState,
    control_path: u8,
    target_path: u8,
    flip_angle: f64,
    rule: ControlRule,
) -> Result<PureState> {
    if control_path == target_path {
        return Err(Error::IdenticalModes(ModeLabel::h(control_path)));
    }
    let pred = control_predicate(state, control_path, rule)?;
    let (th, tv) = path_modes(state, target_path)?;
    if flip_angle == PI {
        return Ok(state.permuted(|o| {
            if pred(o) {
                o.with(th, o.get(tv)).with(tv, o.get(th))
            } else {
                o
            }
        }));
    }
    let rotated = state.apply_two_mode_mixer_where(
        ModeLabel::h(target_path),
        ModeLabel::v(target_path),
        flip_angle / 2.0,
        -FRAC_PI_2,
        &pred,
    )?;
    let half = flip_angle / 2.0;
    Ok(rotated.phased(|o| {
        if pred(o) {
            C64::from_polar(1.0, half * (o.get(th) + o.get(tv)) as f64)
        } else {
            C64::new(1.0, 0.0)
        }
    }))
}

/// `e^{iφ(n̂_H + n̂_V)}` on each target path, on control-V branches.
pub fn cphase_pol(
    state: &PureState,
    control_path: u8,
    targets: &[u8],
    angle: f64,
    rule: ControlRule,
) -> Result<PureState> {
    let pred = control_predicate(state, control_path, rule)?;
    let mut idx = Vec::new();
    for &t in targets {
        if t == control_path {
            return Err(Error::IdenticalModes(ModeLabel::h(t)));
        }
        let (h, v) = path_modes(state, t)?;
        idx.extend([h, v]);
    }
    Ok(state.phased(|o| {
        if pred(o) {
            let n: usize = idx.iter().map(|&i| o.get(i)).sum();
            C64::from_polar(1.0, angle * n as f64)
        } else {
            C64::new(1.0, 0.0)
        }
    }))
}

/// Exchange the target path's H and V contents when the control mode holds
/// an odd number of photons. The control may be a plain mode or a path, in
/// which case its total occupation counts.
pub fn parity_controlled_flip(
    state: &PureState,
    control: &[ModeLabel],
    target_path: u8,
) -> Result<PureState> {
    let reg = state.register();
    let ctrl = control
        .iter()
        .map(|&m| reg.index_of(m))
        .collect::<Result<Vec<_>>>()?;
    let (th, tv) = path_modes(state, target_path)?;
    if ctrl.contains(&th) || ctrl.contains(&tv) {
        return Err(Error::IdenticalModes(ModeLabel::h(target_path)));
    }
    Ok(state.permuted(|o| {
        let n: usize = ctrl.iter().map(|&i| o.get(i)).sum();
        if n % 2 == 1 {
            o.with(th, o.get(tv)).with(tv, o.get(th))
        } else {
            o
        }
    }))
}

/// Controlled exchange of two paths on control-V branches. The exchange is
/// crossed in polarization: `a_H ↔ b_V` and `a_V ↔ b_H`, i.e. a path swap
/// composed with a half-wave plate on both paths.
pub fn cswap_pol(state: &PureState, control_path: u8, path_a: u8, path_b: u8) -> Result<PureState> {
    if path_a == path_b || control_path == path_a || control_path == path_b {
        return Err(Error::IdenticalModes(ModeLabel::h(control_path)));
    }
    let (_, cv) = path_modes(state, control_path)?;
    let (ah, av) = path_modes(state, path_a)?;
    let (bh, bv) = path_modes(state, path_b)?;
    let reg = state.register();
    if reg.cutoff(ah) != reg.cutoff(bv) || reg.cutoff(av) != reg.cutoff(bh) {
        return Err(Error::RegisterMismatch(
            "swapped modes need equal cutoffs".into(),
        ));
    }
    Ok(state.permuted(|o| {
        if o.get(cv) > 0 {
            o.with(ah, o.get(bv))
                .with(bv, o.get(ah))
                .with(av, o.get(bh))
                .with(bh, o.get(av))
        } else {
            o
        }
    }))
}

/// Bucket detector: `click` projects on n ≥ 1, `no_click` on vacuum.
pub fn onoff_detect(state: &PureState, mode: ModeLabel) -> Result<BranchedOutcome> {
    let i = state.register().index_of(mode)?;
    Ok(BranchedOutcome::from_states(vec![
        ("click", state.filter(|o| o.get(i) > 0)),
        ("no_click", state.filter(|o| o.get(i) == 0)),
    ]))
}

/// Absorber in one arm: `explode` if any photon is in the arm, else `survive`.
pub fn absorb_arm(state: &PureState, mode: ModeLabel) -> Result<BranchedOutcome> {
    let i = state.register().index_of(mode)?;
    Ok(BranchedOutcome::from_states(vec![
        ("explode", state.filter(|o| o.get(i) > 0)),
        ("survive", state.filter(|o| o.get(i) == 0)),
    ]))
}

/// Dense coefficient matrix `Ψ[m, n]` of a two-mode state.
pub fn two_mode_matrix(state: &PureState) -> Result<DMatrix<C64>> {
    let reg = state.register();
    if reg.len() != 2 {
        return Err(Error::RegisterMismatch(format!(
            "expected a two-mode state, got {} modes",
            reg.len()
        )));
    }
    let mut psi = DMatrix::zeros(reg.cutoff(0) + 1, reg.cutoff(1) + 1);
    for (o, a) in state.iter() {
        psi[(o.get(0), o.get(1))] = a;
    }
    Ok(psi)
}

/// `Σ (−1)^{m+n} |Φ_mn|²` with `Φ = D₁ Ψ D₂ᵀ`, plus the mass `Φ` lost.
pub fn displaced_parity_dense(
    psi: &DMatrix<C64>,
    d1: &DMatrix<C64>,
    d2: &DMatrix<C64>,
) -> (f64, f64) {
    let phi = d1 * psi * d2.transpose();
    let mut signed = 0.0;
    let mut total = 0.0;
    for n in 0..phi.ncols() {
        for m in 0..phi.nrows() {
            let p = phi[(m, n)].norm_sqr();
            total += p;
            if (m + n) % 2 == 0 {
                signed += p;
            } else {
                signed -= p;
            }
        }
    }
    (signed, total)
}

/// `⟨D(β₁)D(β₂)(−1)^{n̂₁+n̂₂}D†(β₂)D†(β₁)⟩` on a two-mode state.
pub fn displaced_parity_expect(state: &PureState, beta1: C64, beta2: C64) -> Result<f64> {
    let psi = two_mode_matrix(state)?;
    let norm = state.norm_sqr();
    let d1 = displacement_matrix(-beta1, psi.nrows());
    let d2 = displacement_matrix(-beta2, psi.ncols());
    let (signed, total) = displaced_parity_dense(&psi, &d1, &d2);
    let lost = norm - total;
    if lost > DISPLACEMENT_TOLERANCE * norm {
        let reg = state.register();
        return Err(Error::CutoffExceeded {
            mode: reg.modes()[if beta1.norm() >= beta2.norm() { 0 } else { 1 }],
            cutoff: reg.max_cutoff(),
            tail: lost,
            epsilon: DISPLACEMENT_TOLERANCE,
        });
    }
    Ok(signed / norm)
}
