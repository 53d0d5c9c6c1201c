//! Adaptive explicit Runge–Kutta integration (Dormand–Prince 8(5,3)).
//!
//! The stepper controls the local error with the max-norm of the embedded
//! fifth order estimate and provides the seventh order continuous
//! extension, so uniformly spaced samples can be produced without forcing
//! the step size. It is generic over the vector element so the same code
//! drives the five real mean-field coordinates and the complex entries of a
//! density matrix.

use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait Component:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + AddAssign
{
    fn magnitude(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Component for f64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Component for Complex64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// A first-order system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    type Item: Component;
    fn eval(&self, t: f64, y: &[Self::Item], dydt: &mut [Self::Item]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel), ("abs_tol", self.abs)] {
            if !(v > 0.0 && v <= 1e-3) {
                return Err(Error::invalid(name, format!("must lie in (0, 1e-3], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const STAGES: usize = 12;
const STAGES_EXT: usize = 16;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 6.0;

#[rustfmt::skip]
const C: [f64; STAGES_EXT] = [
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
    1.0,
    0.1,
    0.2,
    0.777777777777777777777777777778,
];

#[rustfmt::skip]
const A: [[f64; STAGES_EXT]; STAGES_EXT] = {
    let mut a = [[0.0; STAGES_EXT]; STAGES_EXT];
    a[1][0] = 5.26001519587677318785587544488e-2;

    a[2][0] = 1.97250569845378994544595329183e-2;
    a[2][1] = 5.91751709536136983633785987549e-2;

    a[3][0] = 2.95875854768068491816892993775e-2;
    a[3][2] = 8.87627564304205475450678981324e-2;

    a[4][0] = 2.41365134159266685502369798665e-1;
    a[4][2] = -8.84549479328286085344864962717e-1;
    a[4][3] = 9.24834003261792003115737966543e-1;

    a[5][0] = 3.7037037037037037037037037037e-2;
    a[5][3] = 1.70828608729473871279604482173e-1;
    a[5][4] = 1.25467687566822425016691814123e-1;

    a[6][0] = 3.7109375e-2;
    a[6][3] = 1.70252211019544039314978060272e-1;
    a[6][4] = 6.02165389804559606850219397283e-2;
    a[6][5] = -1.7578125e-2;

    a[7][0] = 3.70920001185047927108779319836e-2;
    a[7][3] = 1.70383925712239993810214054705e-1;
    a[7][4] = 1.07262030446373284651809199168e-1;
    a[7][5] = -1.53194377486244017527936158236e-2;
    a[7][6] = 8.27378916381402288758473766002e-3;

    a[8][0] = 6.24110958716075717114429577812e-1;
    a[8][3] = -3.36089262944694129406857109825;
    a[8][4] = -8.68219346841726006818189891453e-1;
    a[8][5] = 2.75920996994467083049415600797e1;
    a[8][6] = 2.01540675504778934086186788979e1;
    a[8][7] = -4.34898841810699588477366255144e1;

    a[9][0] = 4.77662536438264365890433908527e-1;
    a[9][3] = -2.48811461997166764192642586468;
    a[9][4] = -5.90290826836842996371446475743e-1;
    a[9][5] = 2.12300514481811942347288949897e1;
    a[9][6] = 1.52792336328824235832596922938e1;
    a[9][7] = -3.32882109689848629194453265587e1;
    a[9][8] = -2.03312017085086261358222928593e-2;

    a[10][0] = -9.3714243008598732571704021658e-1;
    a[10][3] = 5.18637242884406370830023853209;
    a[10][4] = 1.09143734899672957818500254654;
    a[10][5] = -8.14978701074692612513997267357;
    a[10][6] = -1.85200656599969598641566180701e1;
    a[10][7] = 2.27394870993505042818970056734e1;
    a[10][8] = 2.49360555267965238987089396762;
    a[10][9] = -3.0467644718982195003823669022;

    a[11][0] = 2.27331014751653820792359768449;
    a[11][3] = -1.05344954667372501984066689879e1;
    a[11][4] = -2.00087205822486249909675718444;
    a[11][5] = -1.79589318631187989172765950534e1;
    a[11][6] = 2.79488845294199600508499808837e1;
    a[11][7] = -2.85899827713502369474065508674;
    a[11][8] = -8.87285693353062954433549289258;
    a[11][9] = 1.23605671757943030647266201528e1;
    a[11][10] = 6.43392746015763530355970484046e-1;

    // a[12] doubles as the weights of the eighth order solution
    a[12][0] = 5.42937341165687622380535766363e-2;
    a[12][5] = 4.45031289275240888144113950566;
    a[12][6] = 1.89151789931450038304281599044;
    a[12][7] = -5.8012039600105847814672114227;
    a[12][8] = 3.1116436695781989440891606237e-1;
    a[12][9] = -1.52160949662516078556178806805e-1;
    a[12][10] = 2.01365400804030348374776537501e-1;
    a[12][11] = 4.47106157277725905176885569043e-2;

    a[13][0] = 5.61675022830479523392909219681e-2;
    a[13][6] = 2.53500210216624811088794765333e-1;
    a[13][7] = -2.46239037470802489917441475441e-1;
    a[13][8] = -1.24191423263816360469010140626e-1;
    a[13][9] = 1.5329179827876569731206322685e-1;
    a[13][10] = 8.20105229563468988491666602057e-3;
    a[13][11] = 7.56789766054569976138603589584e-3;
    a[13][12] = -8.298e-3;

    a[14][0] = 3.18346481635021405060768473261e-2;
    a[14][5] = 2.83009096723667755288322961402e-2;
    a[14][6] = 5.35419883074385676223797384372e-2;
    a[14][7] = -5.49237485713909884646569340306e-2;
    a[14][10] = -1.08347328697249322858509316994e-4;
    a[14][11] = 3.82571090835658412954920192323e-4;
    a[14][12] = -3.40465008687404560802977114492e-4;
    a[14][13] = 1.41312443674632500278074618366e-1;

    a[15][0] = -4.28896301583791923408573538692e-1;
    a[15][5] = -4.69762141536116384314449447206;
    a[15][6] = 7.68342119606259904184240953878;
    a[15][7] = 4.06898981839711007970213554331;
    a[15][8] = 3.56727187455281109270669543021e-1;
    a[15][12] = -1.39902416515901462129418009734e-3;
    a[15][13] = 2.9475147891527723389556272149;
    a[15][14] = -9.15095847217987001081870187138;
    a
};


#[rustfmt::skip]
const E5: [f64; STAGES + 1] = [
    0.1312004499419488073250102996e-1,
    0.0, 0.0, 0.0, 0.0,
    -0.1225156446376204440720569753e+1,
    -0.4957589496572501915214079952,
    0.1664377182454986536961530415e+1,
    -0.3503288487499736816886487290,
    0.3341791187130174790297318841,
    0.8192320648511571246570742613e-1,
    -0.2235530786388629525884427845e-1,
    0.0,
];

#[rustfmt::skip]
const D: [[f64; STAGES_EXT]; 4] = [
    [-0.84289382761090128651353491142e+1, 0.0, 0.0, 0.0, 0.0,
     0.56671495351937776962531783590, -0.30689499459498916912797304727e+1,
     0.23846676565120698287728149680e+1, 0.21170345824450282767155149946e+1,
     -0.87139158377797299206789907490, 0.22404374302607882758541771650e+1,
     0.63157877876946881815570249290, -0.88990336451333310820698117400e-1,
     0.18148505520854727256656404962e+2, -0.91946323924783554000451984436e+1,
     -0.44360363875948939664310572000e+1],
    [0.10427508642579134603413151009e+2, 0.0, 0.0, 0.0, 0.0,
     0.24228349177525818288430175319e+3, 0.16520045171727028198505394887e+3,
     -0.37454675472269020279518312152e+3, -0.22113666853125306036270938578e+2,
     0.77334326684722638389603898808e+1, -0.30674084731089398182061213626e+2,
     -0.93321305264302278729567221706e+1, 0.15697238121770843886131091075e+2,
     -0.31139403219565177677282850411e+2, -0.93529243588444783865713862664e+1,
     0.35816841486394083752465898540e+2],
    [0.19985053242002433820987653617e+2, 0.0, 0.0, 0.0, 0.0,
     -0.38703730874935176555105901742e+3, -0.18917813819516756882830838328e+3,
     0.52780815920542364900561016686e+3, -0.11573902539959630126141871134e+2,
     0.68812326946963000169666922661e+1, -0.10006050966910838403183860980e+1,
     0.77771377980534432092869265740, -0.27782057523535084065932004339e+1,
     -0.60196695231264120758267380846e+2, 0.84320405506677161018159903784e+2,
     0.11992291136182789328035130030e+2],
    [-0.25693933462703749003312586129e+2, 0.0, 0.0, 0.0, 0.0,
     -0.15418974869023643374053993627e+3, -0.23152937917604549567536039109e+3,
     0.35763911791061412378285349910e+3, 0.93405324183624310003907691704e+2,
     -0.37458323136451633156875139351e+2, 0.10409964950896230045147246184e+3,
     0.29840293426660503123344363579e+2, -0.43533456590011143754432175058e+2,
     0.96324553959188282948394950600e+2, -0.39177261675615439165231486172e+2,
     -0.14972683625798562581422125276e+3],
];

/// Step-by-step DOP853 integrator with dense output over the last step.
pub struct Dop853<'s, S: OdeSystem> {
    sys: &'s S,
    tol: Tolerances,
    t: f64,
    t_old: f64,
    y: Vec<S::Item>,
    y_old: Vec<S::Item>,
    y_new: Vec<S::Item>,
    /// Stage derivatives; `k[12]` holds f(t, y) after an accepted step.
    k: Vec<Vec<S::Item>>,
    tmp: Vec<S::Item>,
    interp: Vec<Vec<S::Item>>,
    interp_ready: bool,
    h_abs: f64,
    h_prev: f64,
    stats: Stats,
}

impl<'s, S: OdeSystem> Dop853<'s, S> {
    pub fn new(sys: &'s S, t0: f64, y0: &[S::Item], t_bound: f64, tol: Tolerances) -> Self {
        let n = y0.len();
        let zero = vec![S::Item::default(); n];
        let mut solver = Dop853 {
            sys,
            tol,
            t: t0,
            t_old: t0,
            y: y0.to_vec(),
            y_old: y0.to_vec(),
            y_new: zero.clone(),
            k: vec![zero.clone(); STAGES_EXT],
            tmp: zero.clone(),
            interp: vec![zero; 7],
            interp_ready: false,
            h_abs: 0.0,
            h_prev: 0.0,
            stats: Stats::default(),
        };
        solver.sys.eval(t0, &solver.y, &mut solver.k[0]);
        solver.stats.evaluations += 1;
        solver.k[STAGES] = solver.k[0].clone();
        solver.h_abs = solver.initial_step(t_bound);
        solver
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[S::Item] {
        &self.y
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Evaluate f at `(t, tmp)` into stage `slot`.
    fn eval_stage(&mut self, t: f64, slot: usize) {
        self.sys.eval(t, &self.tmp, &mut self.k[slot]);
        self.stats.evaluations += 1;
    }

    fn rms_scaled(&self, v: &[S::Item]) -> f64 {
        let n = v.len().max(1) as f64;
        let s: f64 = v
            .iter()
            .zip(&self.y)
            .map(|(x, y)| {
                let sc = self.tol.abs + self.tol.rel * y.magnitude();
                let r = x.magnitude() / sc;
                r * r
            })
            .sum();
        (s / n).sqrt()
    }

    fn initial_step(&mut self, t_bound: f64) -> f64 {
        let span = (t_bound - self.t).abs();
        if span == 0.0 || self.y.is_empty() {
            return span;
        }
        let d0 = self.rms_scaled(&self.y);
        let d1 = self.rms_scaled(&self.k[0]);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span);
        for i in 0..self.y.len() {
            self.tmp[i] = self.y[i] + self.k[0][i] * h0;
        }
        self.eval_stage(self.t + h0, 1);
        let diff: Vec<S::Item> = self.k[1].iter().zip(&self.k[0]).map(|(a, b)| *a - *b).collect();
        let d2 = self.rms_scaled(&diff) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// Advance one accepted step, never past `t_bound`.
    pub fn step(&mut self, t_bound: f64) -> Result<()> {
        let n = self.y.len();
        let min_step = 10.0 * (next_up(self.t.abs()) - self.t.abs());
        let mut h_abs = self.h_abs.max(min_step);
        let mut rejected = false;
        let mut overflowed = false;
        // f(t, y) of the previous accepted step becomes the first stage
        let (first, rest) = self.k.split_at_mut(1);
        first[0].copy_from_slice(&rest[STAGES - 1]);

        loop {
            if h_abs < min_step {
                return Err(if overflowed {
                    Error::Divergence { t: self.t }
                } else {
                    Error::Stiffness { t: self.t, h: h_abs }
                });
            }
            let mut t_new = self.t + h_abs;
            if t_new > t_bound {
                t_new = t_bound;
            }
            let h = t_new - self.t;
            h_abs = h.abs();

            for s in 1..STAGES {
                self.combine(s, h);
                self.eval_stage(self.t + C[s] * h, s);
            }
            self.combine(STAGES, h);
            std::mem::swap(&mut self.y_new, &mut self.tmp);
            // f(t_new, y_new) into k[12]
            self.sys.eval(t_new, &self.y_new, &mut self.k[STAGES]);
            self.stats.evaluations += 1;

            // scaled max-norm of the fifth order embedded estimate
            let mut error_norm: f64 = 0.0;
            let mut finite = true;
            for i in 0..n {
                let mut err5 = S::Item::default();
                for j in 0..=STAGES {
                    if E5[j] != 0.0 {
                        err5 += self.k[j][i] * E5[j];
                    }
                }
                let sc = self.tol.abs + self.tol.rel * self.y[i].magnitude().max(self.y_new[i].magnitude());
                error_norm = error_norm.max(h_abs * err5.magnitude() / sc);
                finite &= self.y_new[i].is_finite();
            }
            // an overflowing trial is retried with a smaller step
            overflowed = !finite || !error_norm.is_finite();
            if overflowed {
                self.stats.rejected += 1;
                h_abs *= MIN_FACTOR;
                rejected = true;
                continue;
            }

            if error_norm < 1.0 {
                let mut factor = if error_norm == 0.0 {
                    MAX_FACTOR
                } else {
                    MAX_FACTOR.min(SAFETY * error_norm.powf(ERROR_EXPONENT))
                };
                if rejected {
                    factor = factor.min(1.0);
                }
                self.stats.accepted += 1;
                self.h_prev = h;
                self.h_abs = h_abs * factor;
                self.t_old = self.t;
                self.t = t_new;
                std::mem::swap(&mut self.y_old, &mut self.y);
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.interp_ready = false;
                return Ok(());
            }
            self.stats.rejected += 1;
            h_abs *= MIN_FACTOR.max(SAFETY * error_norm.powf(ERROR_EXPONENT));
            rejected = true;
        }
    }

    /// tmp = y + h Σ_j a[s][j] k[j]
    fn combine(&mut self, s: usize, h: f64) {
        let base = if s > STAGES { &self.y_old } else { &self.y };
        self.tmp.copy_from_slice(base);
        for j in 0..s {
            let a = A[s][j];
            if a == 0.0 {
                continue;
            }
            let ah = a * h;
            for (t, k) in self.tmp.iter_mut().zip(&self.k[j]) {
                *t += *k * ah;
            }
        }
    }

    fn prepare_interpolant(&mut self) {
        if self.interp_ready {
            return;
        }
        let h = self.h_prev;
        for s in (STAGES + 1)..STAGES_EXT {
            self.combine(s, h);
            self.eval_stage(self.t_old + C[s] * h, s);
        }
        let n = self.y.len();
        for i in 0..n {
            let dy = self.y[i] - self.y_old[i];
            let f_old = self.k[0][i];
            let f_new = self.k[STAGES][i];
            self.interp[0][i] = dy;
            self.interp[1][i] = f_old * h - dy;
            self.interp[2][i] = dy * 2.0 - (f_new + f_old) * h;
            for (row, d) in D.iter().enumerate() {
                let mut acc = S::Item::default();
                for (j, &c) in d.iter().enumerate() {
                    if c != 0.0 {
                        acc += self.k[j][i] * c;
                    }
                }
                self.interp[3 + row][i] = acc * h;
            }
        }
        self.interp_ready = true;
    }

    /// Continuous extension at `t` inside the last accepted step.
    pub fn dense(&mut self, t: f64, out: &mut [S::Item]) {
        if t == self.t {
            out.copy_from_slice(&self.y);
            return;
        }
        self.prepare_interpolant();
        let x = (t - self.t_old) / self.h_prev;
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = S::Item::default();
            for (r, f) in self.interp.iter().rev().enumerate() {
                acc += f[i];
                acc = if r % 2 == 0 { acc * x } else { acc * (1.0 - x) };
            }
            *o = acc + self.y_old[i];
        }
    }
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    f64::from_bits(if x == 0.0 { 1 } else { x.to_bits() + 1 })
}

/// Integrate from `t0` and report the state at `t0 + k·dt` for
/// `k = 0..n_samples` through `on_sample`.
pub fn integrate_sampled<S, F>(
    sys: &S,
    y0: &[S::Item],
    t0: f64,
    dt: f64,
    n_samples: usize,
    tol: Tolerances,
    mut on_sample: F,
) -> Result<Stats>
where
    S: OdeSystem,
    F: FnMut(usize, f64, &[S::Item]) -> Result<()>,
{
    if n_samples == 0 {
        return Ok(Stats::default());
    }
    let t_end = t0 + dt * (n_samples - 1) as f64;
    let mut solver = Dop853::new(sys, t0, y0, t_end, tol);
    let mut buf = y0.to_vec();
    on_sample(0, t0, y0)?;
    let mut k = 1;
    while k < n_samples {
        solver.step(t_end)?;
        while k < n_samples {
            let tk = if k == n_samples - 1 { t_end } else { t0 + dt * k as f64 };
            if tk > solver.t() {
                break;
            }
            solver.dense(tk, &mut buf);
            on_sample(k, tk, &buf)?;
            k += 1;
        }
    }
    Ok(solver.stats())
}
