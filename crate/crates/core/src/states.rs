//! Single-mode state families and the cutoff rule.
//!
//! Every factory works on a truncated amplitude vector ([`ModeKet`]) that
//! knows how much probability it lost above the cutoff. Factories refuse to
//! build a state whose tail mass exceeds the register's epsilon.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeLabel, ModeRegister, PureState, MAX_CUTOFF};

/// Amplitudes are generated up to this index when measuring tails.
const HORIZON: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatParams {
    pub alpha: C64,
    pub parity: Parity,
}

impl CatParams {
    pub fn even(alpha: f64) -> Self {
        Self {
            alpha: C64::new(alpha, 0.0),
            parity: Parity::Even,
        }
    }

    pub fn odd(alpha: f64) -> Self {
        Self {
            alpha: C64::new(alpha, 0.0),
            parity: Parity::Odd,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    pub r: f64,
}

/// `N_e = [2(1 + e^{−2|α|²})]^{−1/2}`.
pub fn even_norm(alpha: C64) -> f64 {
    1.0 / (2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp())).sqrt()
}

/// `N_o = [2(1 − e^{−2|α|²})]^{−1/2}`; infinite at α = 0.
pub fn odd_norm(alpha: C64) -> f64 {
    1.0 / (-2.0 * (-2.0 * alpha.norm_sqr()).exp_m1()).sqrt()
}

/// Truncated single-mode amplitudes `c_0..=c_cutoff` and the mass above them.
#[derive(Clone, Debug)]
pub struct ModeKet {
    pub amps: Vec<C64>,
    pub tail: f64,
}

impl ModeKet {
    fn from_series(series: Vec<C64>, cutoff: usize) -> Self {
        let tail = series.iter().skip(cutoff + 1).map(|c| c.norm_sqr()).sum();
        let mut amps = series;
        amps.truncate(cutoff + 1);
        Self { amps, tail }
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn mean_number(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr())
            .sum::<f64>()
            / self.norm_sqr()
    }
}

fn coherent_series(alpha: C64) -> Vec<C64> {
    let mut out = Vec::with_capacity(HORIZON + 1);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..=HORIZON {
        out.push(c);
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    out
}

fn cat_series(params: CatParams) -> Result<Vec<C64>> {
    let (norm, keep) = match params.parity {
        Parity::Even => (even_norm(params.alpha), 0),
        Parity::Odd => {
            if params.alpha.norm() == 0.0 {
                return Err(Error::Degenerate("odd cat state needs alpha != 0".into()));
            }
            (odd_norm(params.alpha), 1)
        }
    };
    // N(|α⟩ ± |−α⟩) doubles the coherent amplitudes of matching parity
    Ok(coherent_series(params.alpha)
        .into_iter()
        .enumerate()
        .map(|(n, c)| {
            if n % 2 == keep {
                c * (2.0 * norm)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect())
}

fn squeezed_series(r: f64) -> Vec<C64> {
    let t = r.tanh();
    let mut out = vec![C64::new(0.0, 0.0); HORIZON + 1];
    let mut c = 1.0 / r.cosh().sqrt();
    let mut n = 0;
    while n <= HORIZON {
        out[n] = C64::new(c, 0.0);
        c *= -t * ((n + 1) as f64 / (n + 2) as f64).sqrt();
        n += 2;
    }
    out
}

fn subtracted_series(r: f64) -> Result<Vec<C64>> {
    if r == 0.0 {
        return Err(Error::Degenerate(
            "photon subtraction from the vacuum gives the zero vector".into(),
        ));
    }
    let sv = squeezed_series(r);
    let scale = 1.0 / r.sinh().abs();
    let mut out: Vec<C64> = (0..HORIZON)
        .map(|n| sv[n + 1] * (((n + 1) as f64).sqrt() * scale))
        .collect();
    out.push(C64::new(0.0, 0.0));
    Ok(out)
}

/// Smallest cutoff whose tail mass is below `epsilon`.
fn minimal_cutoff(series: &[C64], epsilon: f64) -> Result<usize> {
    let mut tail = 0.0;
    let mut best = None;
    for n in (0..series.len()).rev() {
        if tail < epsilon {
            best = Some(n);
        } else {
            break;
        }
        tail += series[n].norm_sqr();
    }
    match best {
        Some(n) if n <= MAX_CUTOFF => Ok(n),
        _ => Err(Error::InvalidParameter(format!(
            "no cutoff up to {MAX_CUTOFF} reaches tail mass {epsilon:.1e}"
        ))),
    }
}

pub fn coherent_cutoff(alpha: f64, epsilon: f64) -> Result<usize> {
    minimal_cutoff(&coherent_series(C64::new(alpha, 0.0)), epsilon)
}

pub fn cat_cutoff(params: CatParams, epsilon: f64) -> Result<usize> {
    minimal_cutoff(&cat_series(params)?, epsilon)
}

pub fn squeezed_cutoff(r: f64, epsilon: f64) -> Result<usize> {
    minimal_cutoff(&squeezed_series(r), epsilon)
}

pub fn subtracted_sv_cutoff(r: f64, epsilon: f64) -> Result<usize> {
    minimal_cutoff(&subtracted_series(r)?, epsilon)
}

pub fn coherent_ket(alpha: C64, cutoff: usize) -> ModeKet {
    ModeKet::from_series(coherent_series(alpha), cutoff)
}

pub fn cat_ket(params: CatParams, cutoff: usize) -> Result<ModeKet> {
    Ok(ModeKet::from_series(cat_series(params)?, cutoff))
}

pub fn squeezed_ket(params: SqueezeParams, cutoff: usize) -> ModeKet {
    ModeKet::from_series(squeezed_series(params.r), cutoff)
}

/// Normalized `â S(r)|0⟩ / sinh r`.
pub fn subtracted_sv_ket(params: SqueezeParams, cutoff: usize) -> Result<ModeKet> {
    Ok(ModeKet::from_series(subtracted_series(params.r)?, cutoff))
}

/// Place one ket on `mode` of `register`, all other modes in vacuum.
pub fn embed(register: &ModeRegister, mode: ModeLabel, ket: &ModeKet) -> Result<PureState> {
    check_tail(register, mode, ket)?;
    PureState::product(register, &[(mode, &ket.amps, ket.tail)])
}

/// Product of kets on distinct modes.
pub fn embed_product(register: &ModeRegister, kets: &[(ModeLabel, &ModeKet)]) -> Result<PureState> {
    for &(mode, ket) in kets {
        check_tail(register, mode, ket)?;
    }
    let factors: Vec<_> = kets
        .iter()
        .map(|&(m, k)| (m, k.amps.as_slice(), k.tail))
        .collect();
    PureState::product(register, &factors)
}

fn check_tail(register: &ModeRegister, mode: ModeLabel, ket: &ModeKet) -> Result<()> {
    let cutoff = register.cutoff_of(mode)?;
    if ket.cutoff() != cutoff {
        return Err(Error::RegisterMismatch(format!(
            "ket cut at {} placed on {mode} with cutoff {cutoff}",
            ket.cutoff()
        )));
    }
    if ket.tail >= register.epsilon() {
        return Err(Error::CutoffExceeded {
            mode,
            cutoff,
            tail: ket.tail,
            epsilon: register.epsilon(),
        });
    }
    Ok(())
}

pub fn coherent(register: &ModeRegister, mode: ModeLabel, alpha: C64) -> Result<PureState> {
    embed(
        register,
        mode,
        &coherent_ket(alpha, register.cutoff_of(mode)?),
    )
}

pub fn cat(register: &ModeRegister, mode: ModeLabel, params: CatParams) -> Result<PureState> {
    embed(register, mode, &cat_ket(params, register.cutoff_of(mode)?)?)
}

pub fn squeezed_vacuum(
    register: &ModeRegister,
    mode: ModeLabel,
    params: SqueezeParams,
) -> Result<PureState> {
    if params.r < 0.0 {
        return Err(Error::InvalidParameter(
            "squeezed vacuum generation needs r >= 0".into(),
        ));
    }
    embed(
        register,
        mode,
        &squeezed_ket(params, register.cutoff_of(mode)?),
    )
}

pub fn subtracted_sv(
    register: &ModeRegister,
    mode: ModeLabel,
    params: SqueezeParams,
) -> Result<PureState> {
    if params.r < 0.0 {
        return Err(Error::InvalidParameter(
            "squeezed vacuum generation needs r >= 0".into(),
        ));
    }
    embed(
        register,
        mode,
        &subtracted_sv_ket(params, register.cutoff_of(mode)?)?,
    )
}
