//! Globally adaptive 21-point Gauss-Kronrod quadrature over a set of
//! user-supplied breakpoints.
//!
//! The panel with the largest error estimate is bisected until the summed
//! estimate falls below the requested tolerance. Error estimates follow the
//! QUADPACK `qk21` rescaling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 0.0,
            max_panels: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
    pub panels: usize,
}

impl QuadResult {
    pub fn rel_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.error / self.value).abs()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

/// One 21-point Kronrod panel with its embedded 10-point Gauss estimate.
pub fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = f_center.abs() * WGK[10];
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let value = res_k * half;
    let err = rescale_error((res_k - res_g) * half, res_abs * scale, res_asc * scale);
    (value, err)
}

/// Integrates `f` over `[points[0], points[last]]`, starting from one panel
/// per consecutive pair of breakpoints. Breakpoints must be sorted.
pub fn integrate<F: Fn(f64) -> f64>(f: F, points: &[f64], opts: QuadOptions) -> Result<QuadResult> {
    if points.len() < 2 {
        return Err(Error::Precondition("quadrature needs at least two breakpoints".into()));
    }
    if points.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Precondition("quadrature breakpoints must be sorted".into()));
    }
    let mut heap = BinaryHeap::new();
    // panels too narrow to split further keep contributing but leave the heap
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gauss_kronrod_21(&f, w[0], w[1]);
            heap.push(Panel {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    let mut panels = heap.len();
    let mut total_value: f64 = heap.iter().map(|p| p.value).sum();
    let mut total_error: f64 = heap.iter().map(|p| p.error).sum();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total_value.abs());
        if total_error <= tol || heap.is_empty() {
            // resum to shed the drift of the running totals
            let value = frozen_value + heap.iter().map(|p| p.value).sum::<f64>();
            let error = frozen_error + heap.iter().map(|p| p.error).sum::<f64>();
            if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
                return Ok(QuadResult {
                    value,
                    error,
                    panels,
                });
            }
            if heap.is_empty() {
                return Err(Error::Quadrature {
                    achieved: error / value.abs(),
                    intervals: panels,
                });
            }
            total_value = value;
            total_error = error;
        }
        if panels >= opts.max_panels {
            return Err(Error::Quadrature {
                achieved: total_error / total_value.abs(),
                intervals: panels,
            });
        }
        let worst = heap.pop().expect("heap checked non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 1e3 * f64::EPSILON * mid.abs() {
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        total_value -= worst.value;
        total_error -= worst.error;
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gauss_kronrod_21(&f, a, b);
            total_value += value;
            total_error += error;
            heap.push(Panel { a, b, value, error });
        }
        panels += 1;
    }
}
