//! Composite optical circuits built from [`crate::elements`].
//!
//! Post-selection never renormalizes in place: every kept branch is logged
//! with its probability conditional on the previous stages, and the circuit
//! output is normalized once at the end.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analysis::LogicalQubit;
use crate::elements::{
    self, absorb_arm, cnot_pol, cphase_pol, cswap_pol, displace, hwp, onoff_detect,
    parity_controlled_flip, pbs, phase_shift, polarizer, rotate_diag45, squeeze, ControlRule,
    Imperfection, PolarizerKind,
};
use crate::error::{Error, Result};
use crate::fock::{BranchedOutcome, ModeLabel, ModeRegister, PureState};
use crate::states::{self, CatParams, ModeKet, SqueezeParams};

/// Heralds below this probability are reported as never firing.
pub const NULL_HERALD: f64 = 1e-14;

/// Relative sign of the two terms of a parity-entangled state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchRecord {
    pub stage: String,
    /// Probability of the kept branch given all earlier stages.
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct CircuitReport {
    /// Conditional output, normalized unless the herald never fires.
    pub output_state: PureState,
    pub postselect_probability: f64,
    pub branch_log: Vec<BranchRecord>,
    pub imperfection: Imperfection,
    pub warnings: Vec<String>,
}

impl CircuitReport {
    pub fn heralded(&self) -> bool {
        self.postselect_probability >= NULL_HERALD
    }

    pub fn branch_product(&self) -> f64 {
        self.branch_log.iter().map(|b| b.probability).product()
    }
}

/// Accumulates kept branches while a circuit runs.
struct Conditioning {
    log: Vec<BranchRecord>,
    probability: f64,
}

impl Conditioning {
    fn new() -> Self {
        Self {
            log: Vec::new(),
            probability: 1.0,
        }
    }

    fn keep(
        &mut self,
        stage: &str,
        input: &PureState,
        outcome: BranchedOutcome,
        label: &str,
    ) -> Result<PureState> {
        let before = input.norm_sqr();
        let branch = outcome.into_branch(label)?;
        let p = if before > 0.0 {
            branch.probability / before
        } else {
            0.0
        };
        self.probability *= p;
        self.log.push(BranchRecord {
            stage: stage.to_string(),
            probability: p,
        });
        Ok(branch.state)
    }

    fn finish(
        self,
        state: PureState,
        imperfection: Imperfection,
        mut warnings: Vec<String>,
    ) -> Result<CircuitReport> {
        let output_state = if self.probability >= NULL_HERALD {
            state.normalized()?
        } else {
            warnings.push(format!(
                "post-selection probability {:.3e} is below {NULL_HERALD:.0e}; output left unnormalized",
                self.probability
            ));
            state
        };
        Ok(CircuitReport {
            output_state,
            postselect_probability: self.probability,
            branch_log: self.log,
            imperfection,
            warnings,
        })
    }
}

/// Uniformly cut register over paths `1..=paths`, carrying `epsilon`.
fn path_register(paths: u8, cutoff: usize, epsilon: f64) -> Result<ModeRegister> {
    Ok(ModeRegister::polarized_paths(paths, cutoff)?.with_epsilon(epsilon))
}

/// `(|even⟩_a|odd⟩_b ± |odd⟩_a|even⟩_b)/√2` with cats of amplitude `alpha`.
pub fn parity_entangled(
    register: &ModeRegister,
    a: ModeLabel,
    b: ModeLabel,
    alpha: f64,
    sign: Sign,
) -> Result<PureState> {
    let (ca, cb) = (register.cutoff_of(a)?, register.cutoff_of(b)?);
    let even = |c| states::cat_ket(CatParams::even(alpha), c);
    let odd = |c| states::cat_ket(CatParams::odd(alpha), c);
    let first = states::embed_product(register, &[(a, &even(ca)?), (b, &odd(cb)?)])?;
    let second = states::embed_product(register, &[(a, &odd(ca)?), (b, &even(cb)?)])?;
    Ok(first
        .add(&second.scaled(C64::new(sign.factor(), 0.0)))?
        .scaled(C64::new(FRAC_1_SQRT_2, 0.0)))
}

/// Two-mode parity-entangled state on plain modes 1 and 2, cut so that it
/// can still be displaced by `headroom` without leaving the register.
pub fn parity_entangled_plain(
    alpha: f64,
    sign: Sign,
    headroom: f64,
    epsilon: f64,
) -> Result<PureState> {
    let cutoff = states::coherent_cutoff(alpha + headroom, epsilon)?
        .max(states::cat_cutoff(CatParams::even(alpha), epsilon)?)
        .max(states::cat_cutoff(CatParams::odd(alpha), epsilon)?);
    let reg = ModeRegister::uniform(&[ModeLabel::plain(1), ModeLabel::plain(2)], cutoff)?
        .with_epsilon(epsilon);
    parity_entangled(&reg, ModeLabel::plain(1), ModeLabel::plain(2), alpha, sign)
}

/// Cat of amplitude `√2 α` through a 50:50 mixer, polarizers and a PBS.
/// The output lives on the H and V modes of path 1.
pub fn generate_entangled(alpha: f64, sign: Sign, epsilon: f64) -> Result<CircuitReport> {
    generate_with(CatParams::odd(2f64.sqrt() * alpha), sign, epsilon)
}

/// The same circuit fed with an even cat.
pub fn generate_even_control(alpha: f64, epsilon: f64) -> Result<CircuitReport> {
    generate_with(CatParams::even(2f64.sqrt() * alpha), Sign::Minus, epsilon)
}

fn generate_with(input: CatParams, sign: Sign, epsilon: f64) -> Result<CircuitReport> {
    if input.alpha.norm() == 0.0 {
        return Err(Error::Degenerate("generation needs alpha != 0".into()));
    }
    let cutoff = states::cat_cutoff(input, epsilon)?;
    let reg = path_register(2, cutoff, epsilon)?;
    let mut cond = Conditioning::new();
    let s = states::cat(&reg, ModeLabel::h(1), input)?;
    // φ = 0 sends |γ⟩|0⟩ to |γ/√2⟩|−γ/√2⟩; φ = π to |γ/√2⟩|γ/√2⟩
    let phase = match sign {
        Sign::Minus => 0.0,
        Sign::Plus => PI,
    };
    let s = s.apply_two_mode_mixer(ModeLabel::h(1), ModeLabel::h(2), FRAC_PI_4, phase)?;
    let s = cond.keep(
        "polarizer_h_path1",
        &s,
        polarizer(&s, 1, PolarizerKind::H)?,
        "pass",
    )?;
    let s = hwp(&s, 2)?;
    let s = cond.keep(
        "polarizer_v_path2",
        &s,
        polarizer(&s, 2, PolarizerKind::V)?,
        "pass",
    )?;
    let s = pbs(&s, 1, 2)?;
    let out = s.restrict_to(&[ModeLabel::h(1), ModeLabel::v(1)])?;
    cond.finish(out, Imperfection::default(), Vec::new())
}

/// PBS and half-wave plate: moves the V mode of path 1 to the H mode of path 2.
pub fn access_parity(state: &PureState) -> Result<CircuitReport> {
    let cutoff = state.register().max_cutoff();
    let reg = path_register(2, cutoff, state.register().epsilon())?;
    let s = state.extend_to(&reg)?;
    let s = pbs(&s, 1, 2)?;
    let s = hwp(&s, 2)?;
    let out = s.restrict_to(&[ModeLabel::h(1), ModeLabel::h(2)])?;
    Conditioning::new().finish(out, Imperfection::default(), Vec::new())
}

/// Logical polarization qubits on paths 1 and 2 with envelope `amplitude`.
pub fn path_qubits(amplitude: C64) -> [LogicalQubit; 2] {
    [1, 2].map(|p| LogicalQubit {
        h: ModeLabel::h(p),
        v: ModeLabel::v(p),
        amplitude,
    })
}

/// Four-path polarization access circuit acting on an input carried by the
/// H and V modes of path 1 with cat amplitude `alpha`. Paths 3 and 4 start
/// in vacuum; the output is conditioned on the herald of path 3.
pub fn access_polarization(
    state: &PureState,
    alpha: f64,
    imperfection: Imperfection,
) -> Result<CircuitReport> {
    let a = C64::new(alpha * FRAC_1_SQRT_2, 0.0);
    let b = imperfection.displacement_actual.unwrap_or(a);
    let epsilon = state.register().epsilon();
    let cutoff =
        states::coherent_cutoff(a.norm() + b.norm(), epsilon)?.max(state.register().max_cutoff());
    let reg = path_register(4, cutoff, epsilon)?;
    let mut warnings = Vec::new();
    if (a.norm_sqr() - 1.0).abs() > 1e-9 {
        warnings.push(format!(
            "envelope amplitude |A|^2 = {:.6} differs from 1; logical qubits are non-orthogonal",
            a.norm_sqr()
        ));
    }
    let rule = if b == a {
        ControlRule::Definite
    } else {
        ControlRule::PresenceTriggered
    };

    let mut cond = Conditioning::new();
    let s = state.extend_to(&reg)?;
    let s = pbs(&s, 1, 2)?;
    let s = s.apply_two_mode_mixer(ModeLabel::h(1), ModeLabel::h(3), FRAC_PI_4, PI)?;
    let s = s.apply_two_mode_mixer(ModeLabel::v(2), ModeLabel::v(4), FRAC_PI_4, PI)?;
    let s = displace(&s, ModeLabel::h(3), b)?;
    let s = displace(&s, ModeLabel::v(4), b)?;
    let s = pbs(&s, 3, 4)?;
    let s = phase_shift(&s, ModeLabel::v(2), PI)?;
    let s = cnot_pol(&s, 3, 1, imperfection.flip_angle, rule)?;
    let s = cnot_pol(&s, 3, 2, imperfection.flip_angle, rule)?;
    let s = cphase_pol(&s, 3, &[1, 2], imperfection.cphase_angle, rule)?;
    let s = rotate_diag45(&s, 3)?;
    let s = cond.keep(
        "herald_3h_no_click",
        &s,
        onoff_detect(&s, ModeLabel::h(3))?,
        "no_click",
    )?;
    let s = cond.keep(
        "herald_3v_click",
        &s,
        onoff_detect(&s, ModeLabel::v(3))?,
        "click",
    )?;
    cond.finish(s, imperfection, warnings)
}

/// `(|A⟩_H|0⟩_V ⊗ |0⟩_H|A⟩_V ∓ |0⟩_H|A⟩_V ⊗ |A⟩_H|0⟩_V)` on paths 1 and 2, normalized.
pub fn polarization_target(
    register: &ModeRegister,
    amplitude: C64,
    sign: Sign,
) -> Result<PureState> {
    let cut = |m| register.cutoff_of(m);
    let env = |m| -> Result<ModeKet> { Ok(states::coherent_ket(amplitude, cut(m)?)) };
    let (h1, v1, h2, v2) = (
        ModeLabel::h(1),
        ModeLabel::v(1),
        ModeLabel::h(2),
        ModeLabel::v(2),
    );
    let hv = states::embed_product(register, &[(h1, &env(h1)?), (v2, &env(v2)?)])?;
    let vh = states::embed_product(register, &[(v1, &env(v1)?), (h2, &env(h2)?)])?;
    // minus sign for Sign::Minus, matching the antisymmetric output
    hv.add(&vh.scaled(C64::new(sign.factor(), 0.0)))?
        .normalized()
}

/// The four-mode target of the polarization access circuit on its own register.
pub fn polarization_access_target(alpha: f64, cutoff: usize, epsilon: f64) -> Result<PureState> {
    let labels = [
        ModeLabel::h(1),
        ModeLabel::v(1),
        ModeLabel::h(2),
        ModeLabel::v(2),
    ];
    let reg = ModeRegister::uniform(&labels, cutoff)?.with_epsilon(epsilon);
    polarization_target(&reg, C64::new(alpha * FRAC_1_SQRT_2, 0.0), Sign::Minus)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IfmInput {
    /// `(|H⟩|V⟩ + |V⟩|H⟩)/√2`
    Entangled,
    /// `cos θ |H⟩|V⟩ + sin θ |V⟩|H⟩`
    Nonmaximal { theta: f64 },
    /// One photon through a Mach–Zehnder interferometer with ordinary beam
    /// splitters of the given reflectivity.
    SinglePhoton { reflectivity: f64 },
}

/// Probabilities below this count as "never happens without the absorber".
pub const IFM_IMPOSSIBLE: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct IfmOutcome {
    pub bomb: bool,
    /// `(label, probability)` per detection pattern, fixed order.
    pub events: Vec<(String, f64)>,
    pub p_same_pol: f64,
    pub p_diff_pol: f64,
    pub p_explode: f64,
    pub p_other: f64,
    /// Probability of the event that signals the absorber.
    pub p_signal: f64,
    pub eta: f64,
    /// Efficiency counting only patterns that never occur without the absorber.
    pub eta_discriminative: f64,
}

fn efficiency(signal: f64, explode: f64) -> f64 {
    if signal + explode > 0.0 {
        signal / (signal + explode)
    } else {
        0.0
    }
}

/// Interaction-free measurement. `bomb_arm` is the absorbed mode (path 1, V
/// by default for the polarization inputs, plain mode 2 for the single photon).
pub fn ifm_run(input: IfmInput, bomb: bool, bomb_arm: Option<ModeLabel>) -> Result<IfmOutcome> {
    let (events, explode) = ifm_events(input, bomb, bomb_arm)?;
    let reference = if bomb {
        ifm_events(input, false, bomb_arm)?.0
    } else {
        events.clone()
    };
    let p = |label: &str| {
        events
            .iter()
            .find(|(l, _)| l == label)
            .map(|e| e.1)
            .unwrap_or(0.0)
    };
    let discriminative: f64 = events
        .iter()
        .zip(&reference)
        .filter(|(_, (_, p0))| *p0 <= IFM_IMPOSSIBLE)
        .map(|((_, p), _)| *p)
        .sum();
    let (same, diff, other, signal) = match input {
        IfmInput::SinglePhoton { .. } => (0.0, 0.0, p("bright") + p("dark"), p("dark")),
        _ => {
            let same = p("HH") + p("VV");
            let diff = p("HV") + p("VH");
            (same, diff, p("other"), diff)
        }
    };
    Ok(IfmOutcome {
        bomb,
        events,
        p_same_pol: same,
        p_diff_pol: diff,
        p_explode: explode,
        p_other: other,
        p_signal: signal,
        // with no absorber there is nothing to detect
        eta: if bomb {
            efficiency(signal, explode)
        } else {
            0.0
        },
        eta_discriminative: if bomb {
            efficiency(discriminative, explode)
        } else {
            0.0
        },
    })
}

fn ifm_events(
    input: IfmInput,
    bomb: bool,
    bomb_arm: Option<ModeLabel>,
) -> Result<(Vec<(String, f64)>, f64)> {
    let one = C64::new(1.0, 0.0);
    match input {
        IfmInput::SinglePhoton { reflectivity } => {
            if !(0.0..=1.0).contains(&reflectivity) {
                return Err(Error::InvalidParameter(
                    "reflectivity must lie in [0, 1]".into(),
                ));
            }
            let (m1, m2) = (ModeLabel::plain(1), ModeLabel::plain(2));
            let reg = ModeRegister::uniform(&[m1, m2], 1)?;
            let theta = reflectivity.sqrt().asin();
            let s = PureState::from_terms(&reg, [([1, 0], one)])?;
            let s = s.apply_two_mode_mixer(m1, m2, theta, 0.0)?;
            let (s, explode) = absorb(&s, bomb, bomb_arm.unwrap_or(m2))?;
            let s = s.apply_two_mode_mixer(m1, m2, -theta, 0.0)?;
            let (i1, i2) = (0, 1);
            let mut bright = 0.0;
            let mut dark = 0.0;
            for (o, a) in s.iter() {
                if o.get(i1) > 0 {
                    bright += a.norm_sqr();
                } else if o.get(i2) > 0 {
                    dark += a.norm_sqr();
                }
            }
            Ok((
                vec![("bright".into(), bright), ("dark".into(), dark)],
                explode,
            ))
        }
        IfmInput::Entangled | IfmInput::Nonmaximal { .. } => {
            let theta = match input {
                IfmInput::Nonmaximal { theta } => theta,
                _ => FRAC_PI_4,
            };
            let reg = ModeRegister::polarized_paths(2, 1)?;
            let s = PureState::from_terms(
                &reg,
                [
                    ([1, 0, 0, 1], C64::new(theta.cos(), 0.0)),
                    ([0, 1, 1, 0], C64::new(theta.sin(), 0.0)),
                ],
            )?;
            // a PBS interferometer maps the state to itself when no absorber is present
            let (s, explode) = absorb(&s, bomb, bomb_arm.unwrap_or(ModeLabel::v(1)))?;
            let s = rotate_diag45(&rotate_diag45(&s, 1)?, 2)?;
            let mut probs = [0.0; 5];
            for (o, a) in s.iter() {
                let p = a.norm_sqr();
                let slot = match (o.get(0) > 0, o.get(1) > 0, o.get(2) > 0, o.get(3) > 0) {
                    (true, false, true, false) => 0,
                    (false, true, false, true) => 1,
                    (true, false, false, true) => 2,
                    (false, true, true, false) => 3,
                    _ => 4,
                };
                probs[slot] += p;
            }
            let labels = ["HH", "VV", "HV", "VH", "other"];
            Ok((
                labels
                    .iter()
                    .zip(probs)
                    .map(|(l, p)| (l.to_string(), p))
                    .collect(),
                explode,
            ))
        }
    }
}

fn absorb(state: &PureState, bomb: bool, arm: ModeLabel) -> Result<(PureState, f64)> {
    if !bomb {
        state.register().index_of(arm)?;
        return Ok((state.clone(), 0.0));
    }
    let out = absorb_arm(state, arm)?;
    let explode = out.probability("explode");
    Ok((out.into_branch("survive")?.state, explode))
}

/// Two squeezed vacua, one coherent photon subtraction `√T â₁ + √(1−T) â₂`,
/// then polarizers and a PBS that fold both paths onto path 1.
pub fn sv_generate(r: f64, t: f64, epsilon: f64) -> Result<CircuitReport> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(
            "transmittance T must lie in [0, 1]".into(),
        ));
    }
    if r <= 0.0 {
        return Err(Error::Degenerate("photon subtraction needs r > 0".into()));
    }
    let cutoff = sv_cutoff(r, epsilon)?;
    let reg = path_register(2, cutoff, epsilon)?;
    let sv = states::squeezed_ket(SqueezeParams { r }, cutoff);
    let s = states::embed_product(&reg, &[(ModeLabel::h(1), &sv), (ModeLabel::h(2), &sv)])?;
    let sub1 = s
        .apply_annihilation(ModeLabel::h(1))?
        .scaled(C64::new(t.sqrt(), 0.0));
    let sub2 = s
        .apply_annihilation(ModeLabel::h(2))?
        .scaled(C64::new((1.0 - t).sqrt(), 0.0));
    // the subtraction is an operation, not a measurement branch: normalize it away
    let s = sub1.add(&sub2)?.normalized()?;
    let mut cond = Conditioning::new();
    let s = cond.keep(
        "polarizer_h_path1",
        &s,
        polarizer(&s, 1, PolarizerKind::H)?,
        "pass",
    )?;
    let s = hwp(&s, 2)?;
    let s = cond.keep(
        "polarizer_v_path2",
        &s,
        polarizer(&s, 2, PolarizerKind::V)?,
        "pass",
    )?;
    let s = pbs(&s, 1, 2)?;
    let out = s.restrict_to(&[ModeLabel::h(1), ModeLabel::v(1)])?;
    cond.finish(out, Imperfection::default(), Vec::new())
}

/// Cutoff holding both `|S⟩` and `â|S⟩` within the tail budget.
pub fn sv_cutoff(r: f64, epsilon: f64) -> Result<usize> {
    Ok(states::squeezed_cutoff(r, epsilon)?.max(states::subtracted_sv_cutoff(r, epsilon)?))
}

/// `(√T â|S⟩_H |S⟩_V + √(1−T) |S⟩_H â|S⟩_V)/sinh r` on the modes of path 1.
pub fn sv_target(r: f64, t: f64, cutoff: usize, epsilon: f64) -> Result<PureState> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(
            "transmittance T must lie in [0, 1]".into(),
        ));
    }
    let (h, v) = (ModeLabel::h(1), ModeLabel::v(1));
    let reg = ModeRegister::uniform(&[h, v], cutoff)?.with_epsilon(epsilon);
    let p = SqueezeParams { r };
    let sv = states::squeezed_ket(p, cutoff);
    let sub = states::subtracted_sv_ket(p, cutoff)?;
    // â|S⟩ is odd and |S⟩ even, so the two terms are orthogonal
    let first = states::embed_product(&reg, &[(h, &sub), (v, &sv)])?;
    let second = states::embed_product(&reg, &[(h, &sv), (v, &sub)])?;
    first
        .scaled(C64::new(t.sqrt(), 0.0))
        .add(&second.scaled(C64::new((1.0 - t).sqrt(), 0.0)))
}

/// Options of the squeezed-vacuum polarization access pipeline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SvAccessOptions {
    /// Drop the controlled swap (ablation).
    pub skip_cswap: bool,
}

/// Squeezed-vacuum polarization access: ancilla photon on path 3, parity
/// controlled flip, two CNOTs, a controlled swap, coherent subtraction on
/// path 2 and a 45° herald on path 3. Input on the H and V modes of path 1.
pub fn sv_access(state: &PureState, options: SvAccessOptions) -> Result<CircuitReport> {
    let cutoff = state.register().max_cutoff();
    let epsilon = state.register().epsilon();
    let reg = ModeRegister::new(
        [1, 2]
            .iter()
            .flat_map(|&p| [(ModeLabel::h(p), cutoff), (ModeLabel::v(p), cutoff)])
            .chain([(ModeLabel::h(3), 1), (ModeLabel::v(3), 1)])
            .collect(),
    )?
    .with_epsilon(epsilon);
    let mut cond = Conditioning::new();
    let s = state.extend_to(&reg)?;
    let s = pbs(&s, 1, 2)?;
    let s = s.apply_creation(ModeLabel::h(3))?;
    let s = parity_controlled_flip(&s, &[ModeLabel::h(2), ModeLabel::v(2)], 3)?;
    let s = cnot_pol(&s, 3, 1, PI, ControlRule::Definite)?;
    let s = cnot_pol(&s, 3, 2, PI, ControlRule::Definite)?;
    let s = if options.skip_cswap {
        s
    } else {
        cswap_pol(&s, 3, 1, 2)?
    };
    // subtraction that does not reveal the polarization of path 2
    let sh = s.apply_annihilation(ModeLabel::h(2))?;
    let sv = s.apply_annihilation(ModeLabel::v(2))?;
    let s = sh.add(&sv)?.normalized()?;
    let s = rotate_diag45(&s, 3)?;
    let s = cond.keep(
        "herald_3h_no_click",
        &s,
        onoff_detect(&s, ModeLabel::h(3))?,
        "no_click",
    )?;
    let s = cond.keep(
        "herald_3v_click",
        &s,
        onoff_detect(&s, ModeLabel::v(3))?,
        "click",
    )?;
    cond.finish(s, Imperfection::default(), Vec::new())
}

/// `(â|S⟩)_{1H}(â|S⟩)_{2V} + (â|S⟩)_{1V}(â|S⟩)_{2H}`, normalized, on paths 1 and 2.
pub fn sv_access_target(r: f64, cutoff: usize, epsilon: f64) -> Result<PureState> {
    let labels = [
        ModeLabel::h(1),
        ModeLabel::v(1),
        ModeLabel::h(2),
        ModeLabel::v(2),
    ];
    let reg = ModeRegister::uniform(&labels, cutoff)?.with_epsilon(epsilon);
    let sub = states::subtracted_sv_ket(SqueezeParams { r }, cutoff)?;
    let hv = states::embed_product(&reg, &[(labels[0], &sub), (labels[3], &sub)])?;
    let vh = states::embed_product(&reg, &[(labels[1], &sub), (labels[2], &sub)])?;
    hv.add(&vh)?.normalized()
}

/// `(â₁ + â₂)|S⟩|S⟩` on two plain modes followed by `S(−r)` on each mode.
pub fn sv_antisqueeze_to_single_photon(r: f64, epsilon: f64) -> Result<CircuitReport> {
    if r <= 0.0 {
        return Err(Error::Degenerate("photon subtraction needs r > 0".into()));
    }
    let (m1, m2) = (ModeLabel::plain(1), ModeLabel::plain(2));
    let cutoff = sv_cutoff(r, epsilon)?;
    let reg = ModeRegister::uniform(&[m1, m2], cutoff)?.with_epsilon(epsilon);
    let sv = states::squeezed_ket(SqueezeParams { r }, cutoff);
    let s = states::embed_product(&reg, &[(m1, &sv), (m2, &sv)])?;
    let s = s
        .apply_annihilation(m1)?
        .add(&s.apply_annihilation(m2)?)?
        .normalized()?;
    let s = squeeze(&s, m1, -r)?;
    let s = squeeze(&s, m2, -r)?;
    Conditioning::new().finish(s, Imperfection::default(), Vec::new())
}

/// Local displacements `D(α) ⊗ D(α)` on the two-mode parity-entangled state,
/// producing `|2α⟩|0⟩ − |0⟩|2α⟩` up to normalization.
pub fn noon_coherent(alpha: f64, epsilon: f64) -> Result<PureState> {
    let input = parity_entangled_plain(alpha, Sign::Minus, alpha, epsilon)?;
    let beta = C64::new(alpha, 0.0);
    let s = elements::displace(&input, ModeLabel::plain(1), beta)?;
    elements::displace(&s, ModeLabel::plain(2), beta)
}
