//! Sparse multimode Fock-space states.
//!
//! A [`PureState`] stores the nonzero amplitudes of a ket over occupation
//! tuples of a [`ModeRegister`], sorted by packed occupation so that every
//! operation is deterministic. Probability mass that leaves the truncated
//! space is never renormalized away; it accumulates in
//! [`PureState::norm_deficit`].

use rustc_hash::FxHashMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tail-mass budget used by the cutoff rule.
pub const DEFAULT_EPSILON: f64 = 1e-12;
/// Amplitudes smaller than this in magnitude are dropped after every operation.
pub const DEFAULT_PRUNE: f64 = 1e-16;
/// Occupations are packed eight bits per mode into a `u128`.
pub const MAX_MODES: usize = 16;
pub const MAX_CUTOFF: usize = 255;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
    /// Plain bosonic mode without a polarization label.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeLabel {
    pub path: u8,
    pub pol: Polarization,
}

impl ModeLabel {
    pub const fn new(path: u8, pol: Polarization) -> Self {
        Self { path, pol }
    }

    pub const fn h(path: u8) -> Self {
        Self::new(path, Polarization::H)
    }

    pub const fn v(path: u8) -> Self {
        Self::new(path, Polarization::V)
    }

    pub const fn plain(path: u8) -> Self {
        Self::new(path, Polarization::None)
    }

    /// The same path with the other polarization. Plain modes map to themselves.
    pub const fn flipped(self) -> Self {
        match self.pol {
            Polarization::H => Self::v(self.path),
            Polarization::V => Self::h(self.path),
            Polarization::None => self,
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pol {
            Polarization::H => write!(f, "{}H", self.path),
            Polarization::V => write!(f, "{}V", self.path),
            Polarization::None => write!(f, "{}", self.path),
        }
    }
}

/// Ordered set of modes, each with its own maximum occupation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeRegister {
    modes: Vec<ModeLabel>,
    cutoffs: Vec<usize>,
    epsilon: f64,
}

impl ModeRegister {
    pub fn new(modes: Vec<(ModeLabel, usize)>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidRegister("register has no modes".into()));
        }
        if modes.len() > MAX_MODES {
            return Err(Error::InvalidRegister(format!(
                "{} modes requested, at most {MAX_MODES} supported",
                modes.len()
            )));
        }
        for (i, (label, cutoff)) in modes.iter().enumerate() {
            if *cutoff > MAX_CUTOFF {
                return Err(Error::InvalidRegister(format!(
                    "cutoff {cutoff} on {label} exceeds {MAX_CUTOFF}"
                )));
            }
            if modes[..i].iter().any(|(other, _)| other == label) {
                return Err(Error::InvalidRegister(format!("mode {label} listed twice")));
            }
        }
        let (modes, cutoffs) = modes.into_iter().unzip();
        Ok(Self {
            modes,
            cutoffs,
            epsilon: DEFAULT_EPSILON,
        })
    }

    pub fn uniform(labels: &[ModeLabel], cutoff: usize) -> Result<Self> {
        Self::new(labels.iter().map(|&m| (m, cutoff)).collect())
    }

    /// Paths `1..=paths`, each carrying an H and a V mode.
    pub fn polarized_paths(paths: u8, cutoff: usize) -> Result<Self> {
        let labels: Vec<_> = (1..=paths)
            .flat_map(|p| [ModeLabel::h(p), ModeLabel::v(p)])
            .collect();
        Self::uniform(&labels, cutoff)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn cutoff(&self, index: usize) -> usize {
        self.cutoffs[index]
    }

    pub fn max_cutoff(&self) -> usize {
        self.cutoffs.iter().copied().max().unwrap_or(0)
    }

    pub fn contains(&self, mode: ModeLabel) -> bool {
        self.modes.contains(&mode)
    }

    pub fn index_of(&self, mode: ModeLabel) -> Result<usize> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .ok_or(Error::UnknownMode(mode))
    }

    pub fn cutoff_of(&self, mode: ModeLabel) -> Result<usize> {
        Ok(self.cutoffs[self.index_of(mode)?])
    }

    /// Sub-register with the given modes, kept in register order.
    fn subregister(&self, indices: &[usize]) -> ModeRegister {
        ModeRegister {
            modes: indices.iter().map(|&i| self.modes[i]).collect(),
            cutoffs: indices.iter().map(|&i| self.cutoffs[i]).collect(),
            epsilon: self.epsilon,
        }
    }

    /// Resolve and validate a bipartition, returning kept and traced indices.
    fn split(&self, keep: &[ModeLabel]) -> Result<(Vec<usize>, Vec<usize>)> {
        if keep.is_empty() {
            return Err(Error::InvalidPartition("kept subset is empty".into()));
        }
        let mut kept = Vec::with_capacity(keep.len());
        for &m in keep {
            let i = self.index_of(m)?;
            if kept.contains(&i) {
                return Err(Error::InvalidPartition(format!("mode {m} listed twice")));
            }
            kept.push(i);
        }
        if kept.len() == self.len() {
            return Err(Error::InvalidPartition(
                "kept subset covers the whole register".into(),
            ));
        }
        kept.sort_unstable();
        let rest = (0..self.len()).filter(|i| !kept.contains(i)).collect();
        Ok((kept, rest))
    }
}

/// Occupation tuple packed eight bits per mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occupation(u128);

impl Occupation {
    pub const VACUUM: Occupation = Occupation(0);

    pub fn from_slice(ns: &[usize]) -> Self {
        debug_assert!(ns.len() <= MAX_MODES);
        ns.iter()
            .enumerate()
            .fold(Self::VACUUM, |occ, (i, &n)| occ.with(i, n))
    }

    #[inline]
    pub fn get(self, index: usize) -> usize {
        ((self.0 >> (8 * index)) & 0xff) as usize
    }

    #[inline]
    pub fn with(self, index: usize, n: usize) -> Self {
        debug_assert!(n <= MAX_CUTOFF);
        let shift = 8 * index;
        Occupation((self.0 & !(0xff_u128 << shift)) | ((n as u128) << shift))
    }

    pub fn to_vec(self, len: usize) -> Vec<usize> {
        (0..len).map(|i| self.get(i)).collect()
    }

    /// Pack the listed indices into a fresh occupation, in listed order.
    fn gather(self, indices: &[usize]) -> Self {
        indices
            .iter()
            .enumerate()
            .fold(Self::VACUUM, |occ, (j, &i)| occ.with(j, self.get(i)))
    }
}

/// Accumulator used while building a new state.
type Accumulator = FxHashMap<Occupation, C64>;

#[derive(Clone, Debug)]
pub struct PureState {
    register: ModeRegister,
    amps: Vec<(Occupation, C64)>,
    norm_deficit: f64,
}

impl PureState {
    pub fn vacuum(register: &ModeRegister) -> Self {
        Self {
            register: register.clone(),
            amps: vec![(Occupation::VACUUM, C64::new(1.0, 0.0))],
            norm_deficit: 0.0,
        }
    }

    pub fn zero(register: &ModeRegister) -> Self {
        Self {
            register: register.clone(),
            amps: Vec::new(),
            norm_deficit: 0.0,
        }
    }

    /// Build a state from explicit occupation tuples (repeated tuples add up).
    pub fn from_terms<I, T>(register: &ModeRegister, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, C64)>,
        T: AsRef<[usize]>,
    {
        let mut acc = Accumulator::default();
        for (ns, amp) in terms {
            let ns = ns.as_ref();
            if ns.len() != register.len() {
                return Err(Error::RegisterMismatch(format!(
                    "tuple of length {} for a {}-mode register",
                    ns.len(),
                    register.len()
                )));
            }
            for (i, &n) in ns.iter().enumerate() {
                if n > register.cutoff(i) {
                    return Err(Error::CutoffExceeded {
                        mode: register.modes()[i],
                        cutoff: register.cutoff(i),
                        tail: f64::INFINITY,
                        epsilon: register.epsilon(),
                    });
                }
            }
            *acc.entry(Occupation::from_slice(ns)).or_insert(ZERO) += amp;
        }
        Ok(Self::collect(register.clone(), acc, 0.0))
    }

    /// Product state from single-mode amplitude vectors; unlisted modes are vacuum.
    ///
    /// `tails` are the probability masses each factor already lost to truncation.
    pub fn product(register: &ModeRegister, factors: &[(ModeLabel, &[C64], f64)]) -> Result<Self> {
        let mut state = Self::vacuum(register);
        let mut kept = 1.0;
        for &(mode, amps, tail) in factors {
            let i = register.index_of(mode)?;
            if amps.len() > register.cutoff(i) + 1
                && amps[register.cutoff(i) + 1..]
                    .iter()
                    .any(|a| a.norm() > 0.0)
            {
                return Err(Error::RegisterMismatch(format!(
                    "factor on {mode} has support above the register cutoff"
                )));
            }
            let mut out = Vec::with_capacity(state.amps.len() * amps.len());
            for &(occ, a) in &state.amps {
                if occ.get(i) != 0 {
                    return Err(Error::InvalidParameter(format!("mode {mode} listed twice")));
                }
                for (n, &c) in amps.iter().enumerate().take(register.cutoff(i) + 1) {
                    if c != ZERO {
                        out.push((occ.with(i, n), a * c));
                    }
                }
            }
            state.amps = out;
            kept *= 1.0 - tail;
        }
        state.norm_deficit = (1.0 - kept).max(0.0);
        state.finish_prune();
        state.amps.sort_unstable_by_key(|&(occ, _)| occ);
        Ok(state)
    }

    fn collect(register: ModeRegister, acc: Accumulator, norm_deficit: f64) -> Self {
        let mut state = Self {
            register,
            amps: acc.into_iter().collect(),
            norm_deficit,
        };
        state.finish_prune();
        state.amps.sort_unstable_by_key(|&(occ, _)| occ);
        state
    }

    fn finish_prune(&mut self) {
        let mut dropped = 0.0;
        self.amps.retain(|&(_, a)| {
            let keep = a.norm() >= DEFAULT_PRUNE;
            if !keep {
                dropped += a.norm_sqr();
            }
            keep
        });
        self.norm_deficit += dropped;
    }

    pub fn register(&self) -> &ModeRegister {
        &self.register
    }

    pub fn norm_deficit(&self) -> f64 {
        self.norm_deficit
    }

    /// Number of stored (nonzero) amplitudes.
    pub fn support_size(&self) -> usize {
        self.amps.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Occupation, C64)> + '_ {
        self.amps.iter().copied()
    }

    pub fn amplitude(&self, ns: &[usize]) -> C64 {
        self.amplitude_of(Occupation::from_slice(ns))
    }

    pub fn amplitude_of(&self, occ: Occupation) -> C64 {
        self.amps
            .binary_search_by_key(&occ, |&(o, _)| o)
            .map(|i| self.amps[i].1)
            .unwrap_or(ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = self.clone();
        for (_, a) in &mut out.amps {
            *a *= factor;
        }
        out.norm_deficit *= factor.norm_sqr();
        out.finish_prune();
        out
    }

    /// Explicitly renormalized copy. Deficit is rescaled with the amplitudes.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-150 {
            return Err(Error::Degenerate("cannot normalize a zero state".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    /// Linear combination `self + other`.
    pub fn add(&self, other: &PureState) -> Result<Self> {
        self.check_same_register(other)?;
        let mut acc: Accumulator = self.amps.iter().copied().collect();
        for &(occ, a) in &other.amps {
            *acc.entry(occ).or_insert(ZERO) += a;
        }
        Ok(Self::collect(
            self.register.clone(),
            acc,
            self.norm_deficit + other.norm_deficit,
        ))
    }

    fn check_same_register(&self, other: &PureState) -> Result<()> {
        if self.register.modes != other.register.modes
            || self.register.cutoffs != other.register.cutoffs
        {
            return Err(Error::RegisterMismatch(
                "states live on different registers".into(),
            ));
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        self.check_same_register(other)?;
        let (mut i, mut j) = (0, 0);
        let mut sum = ZERO;
        while i < self.amps.len() && j < other.amps.len() {
            let (oa, a) = self.amps[i];
            let (ob, b) = other.amps[j];
            match oa.cmp(&ob) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a.conj() * b;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(sum)
    }

    /// Tensor product with a state on a disjoint register; modes of `other` are appended.
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        let mut modes: Vec<(ModeLabel, usize)> = self
            .register
            .modes
            .iter()
            .copied()
            .zip(self.register.cutoffs.iter().copied())
            .collect();
        modes.extend(
            other
                .register
                .modes
                .iter()
                .copied()
                .zip(other.register.cutoffs.iter().copied()),
        );
        let register = ModeRegister::new(modes)?.with_epsilon(self.register.epsilon);
        let offset = self.register.len();
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for &(oa, a) in &self.amps {
            for &(ob, b) in &other.amps {
                let occ =
                    (0..other.register.len()).fold(oa, |occ, k| occ.with(offset + k, ob.get(k)));
                amps.push((occ, a * b));
            }
        }
        let kept = (1.0 - self.norm_deficit) * (1.0 - other.norm_deficit);
        let mut state = Self {
            register,
            amps,
            norm_deficit: (1.0 - kept).max(0.0),
        };
        state.finish_prune();
        state.amps.sort_unstable_by_key(|&(occ, _)| occ);
        Ok(state)
    }

    /// Re-express the state on a larger register (new modes start in vacuum).
    pub fn extend_to(&self, register: &ModeRegister) -> Result<Self> {
        let mut map = Vec::with_capacity(self.register.len());
        for (i, &m) in self.register.modes.iter().enumerate() {
            let j = register.index_of(m)?;
            if register.cutoff(j) < self.register.cutoff(i) {
                return Err(Error::RegisterMismatch(format!(
                    "target cutoff on {m} is below the source cutoff"
                )));
            }
            map.push(j);
        }
        let mut amps: Vec<_> = self
            .amps
            .iter()
            .map(|&(occ, a)| {
                let moved = map
                    .iter()
                    .enumerate()
                    .fold(Occupation::VACUUM, |o, (i, &j)| o.with(j, occ.get(i)));
                (moved, a)
            })
            .collect();
        amps.sort_unstable_by_key(|&(occ, _)| occ);
        Ok(Self {
            register: register.clone().with_epsilon(self.register.epsilon),
            amps,
            norm_deficit: self.norm_deficit,
        })
    }

    /// Project the modes outside `keep` onto vacuum and drop them from the register.
    pub fn restrict_to(&self, keep: &[ModeLabel]) -> Result<Self> {
        let (kept, rest) = self.register.split(keep)?;
        let sub = self.register.subregister(&kept);
        let amps = self
            .amps
            .iter()
            .filter(|(occ, _)| rest.iter().all(|&r| occ.get(r) == 0))
            .map(|&(occ, a)| (occ.gather(&kept), a))
            .collect::<Vec<_>>();
        let mut state = Self {
            register: sub,
            amps,
            norm_deficit: self.norm_deficit,
        };
        state.amps.sort_unstable_by_key(|&(occ, _)| occ);
        Ok(state)
    }

    /// Keep only the amplitudes whose occupation satisfies `pred`.
    /// The truncation deficit of the parent is inherited unchanged.
    pub fn filter(&self, pred: impl Fn(Occupation) -> bool) -> Self {
        Self {
            register: self.register.clone(),
            amps: self
                .amps
                .iter()
                .copied()
                .filter(|&(o, _)| pred(o))
                .collect(),
            norm_deficit: self.norm_deficit,
        }
    }

    /// Projection on occupations of one mode satisfying `pred`.
    pub fn project_mode(&self, mode: ModeLabel, pred: impl Fn(usize) -> bool) -> Result<Self> {
        let i = self.register.index_of(mode)?;
        Ok(self.filter(|occ| pred(occ.get(i))))
    }

    /// Relabel occupations through a bijection (mode permutations, swaps).
    pub fn permuted(&self, f: impl Fn(Occupation) -> Occupation) -> Self {
        let mut amps: Vec<_> = self.amps.iter().map(|&(o, a)| (f(o), a)).collect();
        amps.sort_unstable_by_key(|&(occ, _)| occ);
        Self {
            register: self.register.clone(),
            amps,
            norm_deficit: self.norm_deficit,
        }
    }

    /// Multiply each amplitude by a phase depending on its occupation.
    pub fn phased(&self, f: impl Fn(Occupation) -> C64) -> Self {
        let mut out = self.clone();
        for (o, a) in &mut out.amps {
            *a *= f(*o);
        }
        out
    }

    /// Exchange the contents of two modes.
    pub fn swap_modes(&self, a: ModeLabel, b: ModeLabel) -> Result<Self> {
        let (ia, ib) = (self.register.index_of(a)?, self.register.index_of(b)?);
        if ia == ib {
            return Ok(self.clone());
        }
        if self.register.cutoff(ia) != self.register.cutoff(ib) {
            return Err(Error::RegisterMismatch(format!(
                "cannot swap {a} and {b}: cutoffs differ"
            )));
        }
        Ok(self.permuted(|o| o.with(ia, o.get(ib)).with(ib, o.get(ia))))
    }

    pub fn mean_number(&self, mode: ModeLabel) -> Result<f64> {
        let i = self.register.index_of(mode)?;
        Ok(self
            .amps
            .iter()
            .map(|(o, a)| o.get(i) as f64 * a.norm_sqr())
            .sum::<f64>()
            / self.norm_sqr())
    }

    pub fn number_variance(&self, mode: ModeLabel) -> Result<f64> {
        let i = self.register.index_of(mode)?;
        let norm = self.norm_sqr();
        let (m1, m2) = self.amps.iter().fold((0.0, 0.0), |(s1, s2), (o, a)| {
            let n = o.get(i) as f64;
            let p = a.norm_sqr();
            (s1 + n * p, s2 + n * n * p)
        });
        let mean = m1 / norm;
        Ok(m2 / norm - mean * mean)
    }

    /// `⟨(−1)^{Σ n_k}⟩` over the listed modes.
    pub fn parity_expectation(&self, modes: &[ModeLabel]) -> Result<f64> {
        let idx = modes
            .iter()
            .map(|&m| self.register.index_of(m))
            .collect::<Result<Vec<_>>>()?;
        let signed: f64 = self
            .amps
            .iter()
            .map(|(o, a)| {
                let n: usize = idx.iter().map(|&i| o.get(i)).sum();
                if n.is_multiple_of(2) {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum();
        Ok(signed / self.norm_sqr())
    }

    /// â on `mode`: n+1 → n with factor √(n+1). Unnormalized.
    pub fn apply_annihilation(&self, mode: ModeLabel) -> Result<Self> {
        let i = self.register.index_of(mode)?;
        let amps = self
            .amps
            .iter()
            .filter(|(o, _)| o.get(i) > 0)
            .map(|&(o, a)| {
                let n = o.get(i);
                (o.with(i, n - 1), a * (n as f64).sqrt())
            })
            .collect::<Vec<_>>();
        let mut state = Self {
            register: self.register.clone(),
            amps,
            norm_deficit: self.norm_deficit,
        };
        state.finish_prune();
        // lowering by one keeps the order of packed tuples
        state.amps.sort_unstable_by_key(|&(occ, _)| occ);
        Ok(state)
    }

    /// â† on `mode`. Amplitudes pushed past the cutoff are dropped and
    /// their input probability mass is added to the deficit.
    pub fn apply_creation(&self, mode: ModeLabel) -> Result<Self> {
        let i = self.register.index_of(mode)?;
        let cutoff = self.register.cutoff(i);
        let mut lost = 0.0;
        let mut amps = Vec::with_capacity(self.amps.len());
        for &(o, a) in &self.amps {
            let n = o.get(i);
            if n >= cutoff {
                lost += a.norm_sqr();
            } else {
                amps.push((o.with(i, n + 1), a * ((n + 1) as f64).sqrt()));
            }
        }
        let mut state = Self {
            register: self.register.clone(),
            amps,
            norm_deficit: self.norm_deficit + lost,
        };
        state.finish_prune();
        state.amps.sort_unstable_by_key(|&(occ, _)| occ);
        Ok(state)
    }

    /// Apply a single-mode operator given by its matrix `op[(m, n)] = ⟨m|O|n⟩`
    /// on the truncated space of `mode`. The matrix must be square with
    /// dimension `cutoff + 1`. For unitary `O` the mass that leaves the
    /// truncated space is booked as deficit.
    pub fn apply_single_mode(&self, mode: ModeLabel, op: &DMatrix<C64>) -> Result<Self> {
        let i = self.register.index_of(mode)?;
        let dim = self.register.cutoff(i) + 1;
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::RegisterMismatch(format!(
                "operator of size {}x{} on mode {mode} with cutoff {}",
                op.nrows(),
                op.ncols(),
                dim - 1
            )));
        }
        let mut acc =
            Accumulator::with_capacity_and_hasher(self.amps.len() * 2, Default::default());
        for &(o, a) in &self.amps {
            let n = o.get(i);
            let base = o.with(i, 0);
            for m in 0..dim {
                let c = op[(m, n)];
                if c != ZERO {
                    *acc.entry(base.with(i, m)).or_insert(ZERO) += c * a;
                }
            }
        }
        Ok(self.finish_unitary(acc))
    }

    fn finish_unitary(&self, acc: Accumulator) -> Self {
        let before = self.norm_sqr();
        let after: f64 = acc.values().map(|a| a.norm_sqr()).sum();
        Self::collect(
            self.register.clone(),
            acc,
            self.norm_deficit + (before - after).max(0.0),
        )
    }

    /// Two-mode mixer `exp[θ(e^{iφ} â†b̂ − e^{−iφ} âb̂†)]`.
    ///
    /// The mixer conserves `n_a + n_b`, so it is applied exactly block by block
    /// on each fixed-total-number subspace. Under this convention
    /// `|γ⟩|0⟩ ↦ |γ cos θ⟩|−γ e^{−iφ} sin θ⟩`.
    pub fn apply_two_mode_mixer(
        &self,
        a: ModeLabel,
        b: ModeLabel,
        theta: f64,
        phase: f64,
    ) -> Result<Self> {
        self.apply_two_mode_mixer_where(a, b, theta, phase, |_| true)
    }

    /// The mixer applied only to amplitudes whose occupation satisfies `pred`.
    /// `pred` must not depend on the occupations of `a` and `b`, otherwise
    /// the result is not unitary.
    pub fn apply_two_mode_mixer_where(
        &self,
        a: ModeLabel,
        b: ModeLabel,
        theta: f64,
        phase: f64,
        pred: impl Fn(Occupation) -> bool,
    ) -> Result<Self> {
        if a == b {
            return Err(Error::IdenticalModes(a));
        }
        let (ia, ib) = (self.register.index_of(a)?, self.register.index_of(b)?);
        let (ca, cb) = (self.register.cutoff(ia), self.register.cutoff(ib));
        let mut blocks: FxHashMap<usize, DMatrix<C64>> = FxHashMap::default();
        let mut acc =
            Accumulator::with_capacity_and_hasher(self.amps.len() * 2, Default::default());
        for &(o, amp) in &self.amps {
            if !pred(o) {
                *acc.entry(o).or_insert(ZERO) += amp;
                continue;
            }
            let (na, nb) = (o.get(ia), o.get(ib));
            let total = na + nb;
            let block = blocks
                .entry(total)
                .or_insert_with(|| mixer_block(total, theta, phase));
            let base = o.with(ia, 0).with(ib, 0);
            let lo = total.saturating_sub(cb);
            let hi = total.min(ca);
            for k in lo..=hi {
                let c = block[(k, na)];
                if c != ZERO {
                    *acc.entry(base.with(ia, k).with(ib, total - k))
                        .or_insert(ZERO) += c * amp;
                }
            }
        }
        Ok(self.finish_unitary(acc))
    }

    pub fn apply_phase_shift(&self, mode: ModeLabel, phi: f64) -> Result<Self> {
        let i = self.register.index_of(mode)?;
        Ok(self.phased(|o| C64::from_polar(1.0, phi * o.get(i) as f64)))
    }

    /// Reduced density operator on `keep`, indexed by the kept occupations
    /// that occur in the support.
    pub fn partial_trace(&self, keep: &[ModeLabel]) -> Result<DensityView> {
        let (kept, rest) = self.register.split(keep)?;
        let (basis, matrix) = reduced_matrix(&self.amps, &kept, &rest);
        Ok(DensityView {
            register: self.register.subregister(&kept),
            basis,
            matrix,
        })
    }

    /// `⟨t|ρ_keep|t⟩ / (‖ψ‖²‖t‖²)` for a target living on the kept modes.
    pub fn reduced_fidelity(&self, target: &PureState) -> Result<f64> {
        let keep = target.register.modes.clone();
        let (kept, rest) = self.register.split(&keep)?;
        for (j, &i) in kept.iter().enumerate() {
            // split() sorts indices, so the target must list modes in register order
            if target.register.modes[j] != self.register.modes[i] {
                return Err(Error::RegisterMismatch(
                    "target modes must follow the order of the source register".into(),
                ));
            }
        }
        let lookup: FxHashMap<Occupation, C64> = target.amps.iter().copied().collect();
        let mut acc = Accumulator::default();
        for &(o, a) in &self.amps {
            if let Some(t) = lookup.get(&o.gather(&kept)) {
                *acc.entry(o.gather(&rest)).or_insert(ZERO) += t.conj() * a;
            }
        }
        let overlap: f64 = acc.values().map(|c| c.norm_sqr()).sum();
        Ok(overlap / (self.norm_sqr() * target.norm_sqr()))
    }

    /// Coefficient matrix across a bipartition, rows = kept occupations,
    /// columns = traced occupations. Dense; intended for small partitions.
    pub fn bipartite_matrix(&self, keep: &[ModeLabel]) -> Result<BipartiteMatrix> {
        let (kept, rest) = self.register.split(keep)?;
        let mut keep_basis: Vec<Occupation> =
            self.amps.iter().map(|(o, _)| o.gather(&kept)).collect();
        keep_basis.sort_unstable();
        keep_basis.dedup();
        let mut rest_basis: Vec<Occupation> =
            self.amps.iter().map(|(o, _)| o.gather(&rest)).collect();
        rest_basis.sort_unstable();
        rest_basis.dedup();
        let mut matrix = DMatrix::zeros(keep_basis.len(), rest_basis.len());
        for &(o, a) in &self.amps {
            let r = keep_basis.binary_search(&o.gather(&kept)).unwrap();
            let c = rest_basis.binary_search(&o.gather(&rest)).unwrap();
            matrix[(r, c)] += a;
        }
        Ok(BipartiteMatrix {
            keep_register: self.register.subregister(&kept),
            keep_basis,
            rest_basis,
            matrix,
        })
    }

    /// Dense amplitude vector in row-major order of the register's product basis.
    pub fn to_dense(&self) -> Vec<C64> {
        let dims: Vec<usize> = self.register.cutoffs.iter().map(|c| c + 1).collect();
        let size: usize = dims.iter().product();
        let mut out = vec![ZERO; size];
        for &(o, a) in &self.amps {
            out[dense_index(o, &dims)] = a;
        }
        out
    }
}

/// One classical outcome of a measurement channel.
#[derive(Clone, Debug)]
pub struct Branch {
    pub label: String,
    /// Unnormalized post-measurement state.
    pub state: PureState,
    pub probability: f64,
}

/// Result of a measurement channel: every outcome with its unnormalized state.
#[derive(Clone, Debug)]
pub struct BranchedOutcome {
    pub branches: Vec<Branch>,
}

impl BranchedOutcome {
    /// Branch probabilities are the squared norms of the branch states.
    pub fn from_states(parts: Vec<(&str, PureState)>) -> Self {
        Self {
            branches: parts
                .into_iter()
                .map(|(label, state)| Branch {
                    label: label.to_string(),
                    probability: state.norm_sqr(),
                    state,
                })
                .collect(),
        }
    }

    pub fn branch(&self, label: &str) -> Result<&Branch> {
        self.branches
            .iter()
            .find(|b| b.label == label)
            .ok_or_else(|| Error::InvalidParameter(format!("no branch labelled {label}")))
    }

    pub fn probability(&self, label: &str) -> f64 {
        self.branch(label).map(|b| b.probability).unwrap_or(0.0)
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    /// Take the state of one branch, leaving the rest behind.
    pub fn into_branch(self, label: &str) -> Result<Branch> {
        self.branches
            .into_iter()
            .find(|b| b.label == label)
            .ok_or_else(|| Error::InvalidParameter(format!("no branch labelled {label}")))
    }
}

/// Row-major index of an occupation in the product basis with the given dimensions.
pub fn dense_index(occ: Occupation, dims: &[usize]) -> usize {
    dims.iter()
        .enumerate()
        .fold(0, |idx, (i, &d)| idx * d + occ.get(i))
}

pub struct BipartiteMatrix {
    pub keep_register: ModeRegister,
    pub keep_basis: Vec<Occupation>,
    pub rest_basis: Vec<Occupation>,
    pub matrix: DMatrix<C64>,
}

/// Reduced density operator on a subset of modes.
#[derive(Clone, Debug)]
pub struct DensityView {
    register: ModeRegister,
    basis: Vec<Occupation>,
    matrix: DMatrix<C64>,
}

impl DensityView {
    pub fn register(&self) -> &ModeRegister {
        &self.register
    }

    /// Kept occupations labelling rows and columns of [`DensityView::matrix`].
    pub fn basis(&self) -> &[Occupation] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Embed into the full product basis of the kept register (small registers only).
    pub fn to_dense(&self) -> DMatrix<C64> {
        let dims: Vec<usize> = self.register.cutoffs.iter().map(|c| c + 1).collect();
        let size: usize = dims.iter().product();
        let mut out = DMatrix::zeros(size, size);
        for (r, &br) in self.basis.iter().enumerate() {
            for (c, &bc) in self.basis.iter().enumerate() {
                out[(dense_index(br, &dims), dense_index(bc, &dims))] = self.matrix[(r, c)];
            }
        }
        out
    }
}

/// Sparse accumulation of `ρ = Σ_rest v_rest v_rest†`.
fn reduced_matrix(
    amps: &[(Occupation, C64)],
    kept: &[usize],
    rest: &[usize],
) -> (Vec<Occupation>, DMatrix<C64>) {
    let mut basis: Vec<Occupation> = amps.iter().map(|(o, _)| o.gather(kept)).collect();
    basis.sort_unstable();
    basis.dedup();
    let mut entries: Vec<(Occupation, usize, C64)> = amps
        .iter()
        .map(|&(o, a)| {
            (
                o.gather(rest),
                basis.binary_search(&o.gather(kept)).unwrap(),
                a,
            )
        })
        .collect();
    entries.sort_unstable_by_key(|&(r, k, _)| (r, k));
    let mut rho = DMatrix::<C64>::zeros(basis.len(), basis.len());
    let mut start = 0;
    while start < entries.len() {
        let mut end = start + 1;
        while end < entries.len() && entries[end].0 == entries[start].0 {
            end += 1;
        }
        let group = &entries[start..end];
        for &(_, r, a) in group {
            for &(_, c, b) in group {
                rho[(r, c)] += a * b.conj();
            }
        }
        start = end;
    }
    (basis, rho)
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let hermitian = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut values: Vec<f64> = SymmetricEigen::new(hermitian)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    values
}

/// `exp(−i t H)` for Hermitian `H`, through its eigendecomposition.
pub fn unitary_exp(hamiltonian: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(hamiltonian.clone());
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, -t * l)));
    v * phases * v.adjoint()
}

/// Mixer restricted to the `n_a + n_b = total` block, basis `|k, total − k⟩`.
fn mixer_block(total: usize, theta: f64, phase: f64) -> DMatrix<C64> {
    let dim = total + 1;
    if theta == 0.0 {
        return DMatrix::identity(dim, dim);
    }
    // H = iG with G = θ(e^{iφ} a†b − e^{−iφ} a b†), so exp(G) = exp(−iH)
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    let i = C64::new(0.0, 1.0);
    for k in 0..total {
        let g = ((k + 1) as f64 * (total - k) as f64).sqrt();
        let lower = C64::from_polar(theta * g, phase);
        h[(k + 1, k)] = i * lower;
        h[(k, k + 1)] = (i * lower).conj();
    }
    unitary_exp(&h, 1.0)
}

/// `⟨m|D(β)|n⟩` for `m, n < dim`.
///
/// For `m ≥ n` the element is `e^{−x/2} √(n!/m!) β^{m−n} L_n^{(m−n)}(x)` with
/// `x = |β|²`; the normalized Laguerre values are generated by their
/// recursion in degree, which stays bounded where the ladder recursion in
/// `m` blows up.
pub fn displacement_matrix(beta: C64, dim: usize) -> DMatrix<C64> {
    let mut d = DMatrix::<C64>::zeros(dim, dim);
    let x = beta.norm_sqr();
    if x == 0.0 {
        return DMatrix::identity(dim, dim);
    }
    let unit = beta / beta.norm();
    let mut log_fact = 0.0;
    for shift in 0..dim {
        if shift > 0 {
            log_fact += (shift as f64).ln();
        }
        let a = shift as f64;
        let below = unit.powu(shift as u32);
        let above = (-unit.conj()).powu(shift as u32);
        // f_k = e^{−x/2} x^{a/2} √(k!/(k+a)!) L_k^{(a)}(x)
        let mut prev = 0.0;
        let mut f = (-0.5 * x + 0.5 * a * x.ln() - 0.5 * log_fact).exp();
        for k in 0..dim - shift {
            d[(k + shift, k)] = below * f;
            if shift > 0 {
                d[(k, k + shift)] = above * f;
            }
            let kf = k as f64;
            let next = ((2.0 * kf + 1.0 + a - x) * f - (kf * (kf + a)).sqrt() * prev)
                / ((kf + 1.0) * (kf + 1.0 + a)).sqrt();
            prev = f;
            f = next;
        }
    }
    d
}

/// `⟨m|S(r)|n⟩` for real `r`, with `S(r) = exp[(r/2)(â² − â†²)]`.
///
/// The ladder recursion for these elements is unstable past a few dozen
/// photons, so the generator is exponentiated in a padded space and the
/// leading block is returned. Columns whose image escapes the padding lose
/// norm, which callers detect through their loss checks.
pub fn squeezing_matrix(r: f64, dim: usize) -> DMatrix<C64> {
    if dim == 0 {
        return DMatrix::zeros(0, 0);
    }
    if r == 0.0 {
        return DMatrix::identity(dim, dim);
    }
    // couplings to level n + 2k fall off like tanh(|r|)^k; pad until that
    // is below round-off so the boundary does not reflect into the block
    let reach = (2.0 * 37.0 / -r.abs().tanh().ln()).ceil().min(4000.0) as usize;
    let padded = (3 * dim + 16).max(dim + reach + 16);
    let mut block = DMatrix::<C64>::zeros(dim, dim);
    // even and odd photon numbers decouple; exponentiate each chain alone
    for parity in 0..2 {
        let len = (padded - parity).div_ceil(2);
        // H = iG on the chain |parity + 2k⟩, G = (1/2)(â² − â†²)
        let mut h = DMatrix::<C64>::zeros(len, len);
        for k in 0..len - 1 {
            let n = (parity + 2 * k) as f64;
            let g = 0.5 * ((n + 1.0) * (n + 2.0)).sqrt();
            h[(k, k + 1)] = C64::new(0.0, g);
            h[(k + 1, k)] = C64::new(0.0, -g);
        }
        let u = unitary_exp(&h, r);
        for (i, m) in (parity..dim).step_by(2).enumerate() {
            for (j, n) in (parity..dim).step_by(2).enumerate() {
                block[(m, n)] = u[(i, j)];
            }
        }
    }
    block
}

/// Phase factor `e^{iπ n}` without rounding error.
pub fn parity_sign(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}
