//! Classical ground truth: the exact lattice cat map, double-precision ensembles with
//! injected errors, the Chirikov standard map and Lyapunov estimates.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::rng::Stream;
use crate::state::pairwise_sum;
use crate::{Error, Result};

/// Binary mask over the 2^n x (L 2^n) cat-map lattice; cell (i, j) has x = i / 2^n and
/// y = j / 2^n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeMask {
    n: usize,
    l: usize,
    cells: Vec<bool>,
}

fn check_torus(n: usize, l: usize) -> Result<()> {
    if n == 0 || n > 24 {
        return Err(Error::domain(format!(
            "lattice resolution n = {n} outside 1..=24"
        )));
    }
    if l == 0 || !l.is_power_of_two() {
        return Err(Error::domain(format!(
            "torus height L = {l} is not a power of two"
        )));
    }
    Ok(())
}

impl LatticeMask {
    pub fn empty(n: usize, l: usize) -> Result<Self> {
        check_torus(n, l)?;
        Ok(LatticeMask {
            n,
            l,
            cells: vec![false; (1 << n) * l * (1 << n)],
        })
    }

    pub fn full(n: usize, l: usize) -> Result<Self> {
        let mut m = Self::empty(n, l)?;
        m.cells.fill(true);
        Ok(m)
    }

    pub fn from_cells(
        n: usize,
        l: usize,
        cells: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut m = Self::empty(n, l)?;
        for (i, j) in cells {
            m.insert(i, j)?;
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn width(&self) -> usize {
        1 << self.n
    }

    pub fn height(&self) -> usize {
        self.l << self.n
    }

    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.width() || j >= self.height() {
            return Err(Error::domain(format!(
                "cell ({i}, {j}) outside the lattice"
            )));
        }
        let w = self.width();
        self.cells[i + j * w] = true;
        Ok(())
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.width() && j < self.height() && self.cells[i + j * self.width()]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Cells in row-major order (j outer, i inner).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width();
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(k, _)| (k % w, k / w))
    }

    /// Flat indicator, index i + j * width.
    pub fn as_slice(&self) -> &[bool] {
        &self.cells
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// One exact step of y <- y + x (mod L), x <- x + y (mod 1) on lattice indices.
pub fn cat_step_exact(i: usize, j: usize, n: usize, l: usize) -> (usize, usize) {
    let j = (j + i) & ((l << n) - 1);
    let i = (i + j) & ((1 << n) - 1);
    (i, j)
}

pub fn cat_step_exact_inverse(i: usize, j: usize, n: usize, l: usize) -> (usize, usize) {
    let hmask = (l << n) - 1;
    let i = i.wrapping_sub(j) & ((1 << n) - 1);
    let j = j.wrapping_sub(i) & hmask;
    (i, j)
}

/// Image of `mask` after `t` exact steps.
pub fn evolve_cat_exact(mask: &LatticeMask, t: usize, direction: Direction) -> LatticeMask {
    let (n, l) = (mask.n, mask.l);
    let mut out = LatticeMask {
        n,
        l,
        cells: vec![false; mask.cells.len()],
    };
    let w = mask.width();
    for (i, j) in mask.iter() {
        let (mut a, mut b) = (i, j);
        for _ in 0..t {
            (a, b) = match direction {
                Direction::Forward => cat_step_exact(a, b, n, l),
                Direction::Inverse => cat_step_exact_inverse(a, b, n, l),
            };
        }
        out.cells[a + b * w] = true;
    }
    out
}

pub fn cat_step_float(x: f64, y: f64, l: f64) -> (f64, f64) {
    let y = (y + x).rem_euclid(l);
    let x = (x + y).rem_euclid(1.0);
    (x, y)
}

pub fn cat_step_float_inverse(x: f64, y: f64, l: f64) -> (f64, f64) {
    let x = (x - y).rem_euclid(1.0);
    let y = (y - x).rem_euclid(l);
    (x, y)
}

/// Signed minimal-image displacement on a circle of circumference `period`.
pub fn wrap_signed(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

/// ⟨(y - y_c)^2⟩ with y_c the circular mean of `y` on the circle of length `l` and each
/// displacement taken as the minimal image.
pub fn torus_second_moment(y: &[f64], weights: Option<&[f64]>, l: f64) -> f64 {
    let w = |k: usize| weights.map_or(1.0, |w| w[k]);
    let idx: Vec<usize> = (0..y.len()).collect();
    let total = pairwise_sum(&idx, |&k| w(k));
    let c = pairwise_sum(&idx, |&k| w(k) * (TAU * y[k] / l).cos());
    let s = pairwise_sum(&idx, |&k| w(k) * (TAU * y[k] / l).sin());
    let center = s.atan2(c) * l / TAU;
    pairwise_sum(&idx, |&k| w(k) * wrap_signed(y[k] - center, l).powi(2)) / total
}

/// Points on the L-torus, x in [0, 1), y in [0, L).
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitEnsemble {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub l: f64,
}

impl OrbitEnsemble {
    /// `count` points with x uniform in [0, 1) and y uniform in [y_lo, y_hi).
    pub fn strip(
        count: usize,
        l: usize,
        y_lo: f64,
        y_hi: f64,
        stream: &mut Stream,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::domain("empty ensemble"));
        }
        let mut x = Vec::with_capacity(count);
        let mut y = Vec::with_capacity(count);
        for _ in 0..count {
            x.push(stream.uniform());
            y.push(stream.uniform_in(y_lo, y_hi).rem_euclid(l as f64));
        }
        Ok(OrbitEnsemble { x, y, l: l as f64 })
    }

    /// One orbit at the lower-left corner of each mask cell.
    pub fn from_mask(mask: &LatticeMask) -> Self {
        let scale = 1.0 / mask.width() as f64;
        let (x, y) = mask
            .iter()
            .map(|(i, j)| (i as f64 * scale, j as f64 * scale))
            .unzip();
        OrbitEnsemble {
            x,
            y,
            l: mask.l() as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn step(&mut self, direction: Direction) {
        let l = self.l;
        self.x
            .par_iter_mut()
            .zip(self.y.par_iter_mut())
            .for_each(|(x, y)| {
                (*x, *y) = match direction {
                    Direction::Forward => cat_step_float(*x, *y, l),
                    Direction::Inverse => cat_step_float_inverse(*x, *y, l),
                };
            });
    }

    /// Adds an independent uniform draw from [-eps, eps) to every coordinate.
    pub fn perturb(&mut self, eps: f64, stream: &mut Stream) {
        for (x, y) in self.x.iter_mut().zip(self.y.iter_mut()) {
            *x = (*x + stream.symmetric(eps)).rem_euclid(1.0);
            *y = (*y + stream.symmetric(eps)).rem_euclid(self.l);
        }
    }

    pub fn second_moment(&self) -> f64 {
        torus_second_moment(&self.y, None, self.l)
    }

    /// RMS minimal-image distance to another ensemble of the same size.
    pub fn rms_distance(&self, other: &OrbitEnsemble) -> f64 {
        let idx: Vec<usize> = (0..self.len()).collect();
        let sum = pairwise_sum(&idx, |&k| {
            wrap_signed(self.x[k] - other.x[k], 1.0).powi(2)
                + wrap_signed(self.y[k] - other.y[k], self.l).powi(2)
        });
        (sum / self.len() as f64).sqrt()
    }

    /// Fraction of points whose cell lies in `mask`.
    pub fn fraction_in(&self, mask: &LatticeMask) -> f64 {
        let w = mask.width() as f64;
        let inside = self
            .x
            .iter()
            .zip(&self.y)
            .filter(|(x, y)| mask.contains((*x * w) as usize, (*y * w) as usize))
            .count();
        inside as f64 / self.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbWhen {
    AtReversalOnly,
    EveryStep,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    pub when: PerturbWhen,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn at_reversal(epsilon: f64, seed: u64) -> Self {
        PerturbationSpec {
            epsilon,
            when: PerturbWhen::AtReversalOnly,
            seed,
        }
    }
}

/// Output of [`evolve_cat_float`], indexed by t = 0..=t_forward + t_reverse.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatRun {
    pub second_moment: Vec<f64>,
    /// RMS distance between the perturbed ensemble and an unperturbed twin.
    pub divergence: Vec<f64>,
    pub final_ensemble: OrbitEnsemble,
}

impl FloatRun {
    /// First time after `t_reversal` at which the perturbed run departs from its twin by
    /// more than `threshold` (RMS).
    pub fn breakdown_time(&self, t_reversal: usize, threshold: f64) -> Option<usize> {
        (t_reversal..self.divergence.len()).find(|&t| self.divergence[t] > threshold)
    }
}

/// Forward/inverse double-precision iteration with an injected perturbation. The
/// unperturbed twin shares every round-off, so `divergence` isolates the injected error.
pub fn evolve_cat_float(
    ensemble: &OrbitEnsemble,
    t_forward: usize,
    t_reverse: usize,
    perturbation: PerturbationSpec,
) -> Result<FloatRun> {
    if ensemble.is_empty() {
        return Err(Error::domain("empty ensemble"));
    }
    if !(perturbation.epsilon >= 0.0 && perturbation.epsilon.is_finite()) {
        return Err(Error::domain("perturbation must be >= 0"));
    }
    let mut stream = Stream::new(perturbation.seed);
    let mut run = ensemble.clone();
    let mut twin = ensemble.clone();
    let mut second_moment = vec![run.second_moment()];
    let mut divergence = vec![0.0];
    for t in 1..=t_forward + t_reverse {
        let direction = if t <= t_forward {
            Direction::Forward
        } else {
            Direction::Inverse
        };
        let kick = perturbation.epsilon > 0.0
            && match perturbation.when {
                PerturbWhen::AtReversalOnly => t == t_forward + 1,
                PerturbWhen::EveryStep => true,
            };
        if kick {
            run.perturb(perturbation.epsilon, &mut stream);
        }
        run.step(direction);
        twin.step(direction);
        second_moment.push(run.second_moment());
        divergence.push(run.rms_distance(&twin));
    }
    Ok(FloatRun {
        second_moment,
        divergence,
        final_ensemble: run,
    })
}

/// Slope of the variance of the unwrapped y coordinate, fitted over steps
/// `t_lo..=t_hi`; x uniform, y started at 0. Returns (slope, slope standard error).
pub fn diffusion_slope(count: usize, t_lo: usize, t_hi: usize, seed: u64) -> Result<(f64, f64)> {
    if count < 2 || t_hi <= t_lo {
        return Err(Error::domain(
            "diffusion fit needs >= 2 orbits and t_hi > t_lo",
        ));
    }
    let mut stream = Stream::new(seed);
    let mut x: Vec<f64> = (0..count).map(|_| stream.uniform()).collect();
    let mut y = vec![0.0f64; count];
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for t in 1..=t_hi {
        x.par_iter_mut().zip(y.par_iter_mut()).for_each(|(x, y)| {
            *y += *x;
            *x = (*x + *y).rem_euclid(1.0);
        });
        if t >= t_lo {
            let mean = pairwise_sum(&y, |v| *v) / count as f64;
            let var = pairwise_sum(&y, |v| (v - mean).powi(2)) / count as f64;
            ts.push(t as f64);
            vs.push(var);
        }
    }
    let fit = crate::fit::linear_fit(&ts, &vs)?;
    Ok((fit.slope, fit.slope_err))
}

/// ln of the largest eigenvalue of the tangent map [[1, 1], [1, 2]].
pub fn lyapunov_estimate() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

/// Finite-difference estimate: separation of two nearby float orbits, ln-distance slope
/// over `steps` steps after a short alignment transient.
pub fn lyapunov_numerical(steps: usize, seed: u64) -> Result<f64> {
    if steps < 8 {
        return Err(Error::domain("need at least 8 steps"));
    }
    let mut stream = Stream::new(seed);
    let (mut a, mut b) = ((stream.uniform(), stream.uniform()), (0.0, 0.0));
    b.0 = a.0 + 1e-13;
    b.1 = a.1;
    let mut ts = Vec::new();
    let mut ls = Vec::new();
    for t in 1..=steps {
        a = cat_step_float(a.0, a.1, 1.0);
        b = cat_step_float(b.0, b.1, 1.0);
        let d = wrap_signed(a.0 - b.0, 1.0).hypot(wrap_signed(a.1 - b.1, 1.0));
        if t >= 3 {
            ts.push(t as f64);
            ls.push(d.ln());
        }
    }
    Ok(crate::fit::linear_fit(&ts, &ls)?.slope)
}

/// Chirikov standard map I <- I + K sin(theta), theta <- theta + I (mod 2 pi) for an
/// ensemble; returns Var(I) after each step (entry 0 is the initial variance).
pub fn evolve_standard_map(
    action: &mut [f64],
    theta: &mut [f64],
    t: usize,
    k: f64,
) -> Result<Vec<f64>> {
    if action.len() != theta.len() || action.is_empty() {
        return Err(Error::domain(
            "action and angle arrays must be non-empty and equal length",
        ));
    }
    let variance = |a: &[f64]| {
        let mean = pairwise_sum(a, |v| *v) / a.len() as f64;
        pairwise_sum(a, |v| (v - mean).powi(2)) / a.len() as f64
    };
    let mut out = vec![variance(action)];
    for _ in 0..t {
        action
            .par_iter_mut()
            .zip(theta.par_iter_mut())
            .for_each(|(i, th)| {
                *i += k * th.sin();
                *th = (*th + *i).rem_euclid(TAU);
            });
        out.push(variance(action));
    }
    Ok(out)
}

/// A random point of the 2^bits x 2^bits lattice (bits <= 120) iterated exactly, against
/// the double-precision orbit started from its nearest float. Returns the minimal-image
/// distance between the two after each step (entry 0 is the initial rounding error).
pub fn roundoff_divergence(bits: u32, steps: usize, seed: u64) -> Result<Vec<f64>> {
    if !(1..=120).contains(&bits) {
        return Err(Error::domain("lattice resolution must be 1..=120 bits"));
    }
    let mask: u128 = (1u128 << bits) - 1;
    let scale = (bits as f64).exp2().recip();
    let mut stream = Stream::new(seed);
    let mut draw = || ((stream.next_u64() as u128) << 64 | stream.next_u64() as u128) & mask;
    let (mut i, mut j) = (draw(), draw());
    let to_float = |v: u128| v as f64 * scale;
    let (mut x, mut y) = (to_float(i), to_float(j));
    let dist = |i: u128, j: u128, x: f64, y: f64| {
        wrap_signed(to_float(i) - x, 1.0).hypot(wrap_signed(to_float(j) - y, 1.0))
    };
    let mut out = vec![dist(i, j, x, y)];
    for _ in 0..steps {
        j = j.wrapping_add(i) & mask;
        i = i.wrapping_add(j) & mask;
        (x, y) = cat_step_float(x, y, 1.0);
        out.push(dist(i, j, x, y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        assert_eq!(cat_step_exact(1, 2, 2, 1), (0, 3));
        assert_eq!(cat_step_exact_inverse(0, 3, 2, 1), (1, 2));
    }

    #[test]
    fn exact_map_is_bijective() {
        let mut s = Stream::new(1);
        for (n, l) in [(3, 1), (4, 4), (5, 2)] {
            let mut m = LatticeMask::empty(n, l).unwrap();
            for _ in 0..40 {
                m.insert(s.below(1 << n) as usize, s.below((l << n) as u64) as usize)
                    .unwrap();
            }
            let img = evolve_cat_exact(&m, 17, Direction::Forward);
            assert_eq!(img.count(), m.count());
            assert_eq!(evolve_cat_exact(&img, 17, Direction::Inverse), m);
            let full = LatticeMask::full(n, l).unwrap();
            assert_eq!(evolve_cat_exact(&full, 5, Direction::Forward), full);
        }
    }

    #[test]
    fn invalid_torus_rejected() {
        assert!(LatticeMask::empty(3, 3).is_err());
        assert!(LatticeMask::empty(0, 1).is_err());
        assert!(LatticeMask::from_cells(2, 1, [(4, 0)]).is_err());
    }

    #[test]
    fn float_matches_exact_on_lattice_points() {
        for (n, l) in [(6, 1), (10, 4)] {
            let mut s = Stream::new(n as u64);
            for _ in 0..50 {
                let (mut i, mut j) = (s.below(1 << n) as usize, s.below((l << n) as u64) as usize);
                let scale = (1usize << n) as f64;
                let (mut x, mut y) = (i as f64 / scale, j as f64 / scale);
                for _ in 0..30 {
                    (i, j) = cat_step_exact(i, j, n, l);
                    (x, y) = cat_step_float(x, y, l as f64);
                    assert_eq!((x * scale, y * scale), (i as f64, j as f64));
                }
            }
        }
    }

    #[test]
    fn lyapunov() {
        let h = lyapunov_estimate();
        assert!((h - 0.962_423_650_119_206_9).abs() < 1e-12);
        assert!((h - 1.0).abs() < 0.05);
        let num = lyapunov_numerical(20, 4).unwrap();
        assert!((num - h).abs() < 0.05, "numerical {num}");
    }

    #[test]
    fn unperturbed_reversal_returns() {
        let mut s = Stream::new(5);
        let e = OrbitEnsemble::strip(2000, 4, 1.9, 2.1, &mut s).unwrap();
        let run = evolve_cat_float(&e, 10, 10, PerturbationSpec::at_reversal(0.0, 1)).unwrap();
        let back = &run.final_ensemble;
        let err = back.rms_distance(&e);
        assert!(err < 1e-9, "return error {err}");
        assert!((run.second_moment[20] - run.second_moment[0]).abs() < 1e-9);
        assert!(run.divergence.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn second_moment_conventions() {
        assert_eq!(torus_second_moment(&[2.0], None, 4.0), 0.0);
        let m = torus_second_moment(&[1.7, 2.3], None, 4.0);
        assert!((m - 0.09).abs() < 1e-12);
        // Wrapped pair straddling 0.
        let m = torus_second_moment(&[3.9, 0.1], None, 4.0);
        assert!((m - 0.01).abs() < 1e-12);
    }

    #[test]
    fn standard_map_limits() {
        let mut s = Stream::new(2);
        let n = 2000;
        let mut i: Vec<f64> = (0..n).map(|_| s.uniform_in(-1.0, 1.0)).collect();
        let mut th: Vec<f64> = (0..n).map(|_| s.uniform_in(0.0, TAU)).collect();
        let start = i.clone();
        evolve_standard_map(&mut i, &mut th, 100, 0.0).unwrap();
        assert_eq!(i, start);
    }

    #[test]
    fn roundoff_catastrophe_time() {
        let d = roundoff_divergence(120, 80, 3).unwrap();
        assert!(d[0] < 1e-15);
        let t = d.iter().position(|&v| v > 0.25).expect("no divergence");
        assert!((30..=50).contains(&t), "diverged at {t}");
    }
}
