//! Globally adaptive Gauss–Kronrod (10/21-point) quadrature for vector-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

// Kronrod abscissae on [-1, 1]; odd indices are the 10-point Gauss nodes.
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
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_914_525,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances for the adaptive rule. The target is `max(abs_tol, rel_tol·|I|)`
/// applied to every component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Bisections allowed on top of the initial panel layout.
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { abs_tol: 1e-10, rel_tol: 1e-8, max_subdivisions: 2000 }
    }
}

impl QuadConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        QuadConfig { abs_tol: tol, rel_tol: tol, ..Self::default() }
    }

    pub fn halved(&self) -> Self {
        QuadConfig { abs_tol: 0.5 * self.abs_tol, rel_tol: 0.5 * self.rel_tol, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    /// Largest per-component error estimate.
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFailure {
    pub estimate: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<const N: usize> Eq for Panel<N> {}

impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Panel<N> {
    // Largest error first; ties broken by position so refinement order is reproducible.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gauss_kronrod<const N: usize, F>(f: &F, a: f64, b: f64) -> Panel<N>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    for k in 0..N {
        kronrod[k] = WGK[10] * fc[k];
    }
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let lo = f(center - half * x);
        let hi = f(center + half * x);
        for k in 0..N {
            let pair = lo[k] + hi[k];
            kronrod[k] += w * pair;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * pair;
            }
        }
    }
    let mut error: f64 = 0.0;
    let mut value = [0.0; N];
    for k in 0..N {
        value[k] = half * kronrod[k];
        error = error.max((half * (kronrod[k] - gauss[k])).abs());
    }
    Panel { a, b, value, error }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, starting from one panel
/// per consecutive pair of breakpoints and bisecting the worst panel until
/// the summed error estimate meets the tolerance.
pub fn integrate<const N: usize, F>(
    f: F,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadResult<N>, QuadFailure>
where
    F: Fn(f64) -> [f64; N],
{
    assert!(breaks.len() >= 2, "need at least one panel");
    let mut heap: BinaryHeap<Panel<N>> =
        breaks.windows(2).filter(|w| w[1] > w[0]).map(|w| gauss_kronrod(&f, w[0], w[1])).collect();

    let mut subdivisions = 0;
    loop {
        let mut total = [0.0; N];
        let mut error = 0.0;
        for p in heap.iter() {
            for (acc, v) in total.iter_mut().zip(&p.value) {
                *acc += v;
            }
            error += p.error;
        }
        let magnitude = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tolerance = cfg.abs_tol.max(cfg.rel_tol * magnitude);
        if error <= tolerance || heap.is_empty() {
            return Ok(QuadResult { value: sum_in_order(&heap), error, panels: heap.len() });
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(QuadFailure { estimate: error, tolerance });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Err(QuadFailure { estimate: error, tolerance });
        }
        heap.push(gauss_kronrod(&f, worst.a, mid));
        heap.push(gauss_kronrod(&f, mid, worst.b));
        subdivisions += 1;
    }
}

/// Sum panels left to right so the result does not depend on heap layout.
fn sum_in_order<const N: usize>(heap: &BinaryHeap<Panel<N>>) -> [f64; N] {
    let mut panels: Vec<&Panel<N>> = heap.iter().collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut total = [0.0; N];
    for p in panels {
        for (acc, v) in total.iter_mut().zip(&p.value) {
            *acc += v;
        }
    }
    total
}

/// Breakpoints covering `[a, b]` with every panel at most `max_width` wide and
/// containing each of `interior` that falls strictly inside.
pub fn panel_layout(a: f64, b: f64, max_width: f64, interior: &[f64]) -> Vec<f64> {
    let mut anchors = vec![a];
    let mut inner: Vec<f64> = interior.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    anchors.extend(inner);
    anchors.push(b);

    let mut out = vec![a];
    for w in anchors.windows(2) {
        let span = w[1] - w[0];
        let pieces = if max_width.is_finite() && max_width > 0.0 {
            (span / max_width).ceil().max(1.0) as usize
        } else {
            1
        };
        let width = span / pieces as f64;
        for i in 1..pieces {
            out.push(w[0] + width * i as f64);
        }
        out.push(w[1]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| [x.powi(5) - 2.0 * x], &[0.0, 2.0], &QuadConfig::default()).unwrap();
        assert!((r.value[0] - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        assert_eq!(r.panels, 1);
    }

    #[test]
    fn oscillatory_integral() {
        // ∫_0^{10} sin(40x)/x dx = Si(400)
        let cfg = QuadConfig { abs_tol: 1e-12, rel_tol: 1e-12, max_subdivisions: 5000 };
        let f = |x: f64| [if x == 0.0 { 40.0 } else { (40.0 * x).sin() / x }];
        let r = integrate(f, &[0.0, 10.0], &cfg).unwrap();
        let si_400 = 1.572_114_869_273_811_8;
        assert!((r.value[0] - si_400).abs() < 1e-11, "{}", r.value[0]);
    }

    #[test]
    fn vector_components_share_panels() {
        let r = integrate(|x| [x.exp(), x.cos()], &[0.0, 1.0, 3.0], &QuadConfig::default()).unwrap();
        assert!((r.value[0] - (3f64.exp() - 1.0)).abs() < 1e-12);
        assert!((r.value[1] - 3f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn unreachable_tolerance_fails() {
        let cfg = QuadConfig { abs_tol: 0.0, rel_tol: 0.0, max_subdivisions: 20 };
        let err = integrate(|x| [x.sqrt()], &[0.0, 1.0], &cfg).unwrap_err();
        assert!(err.estimate > err.tolerance);
    }

    #[test]
    fn layout_respects_width_and_anchors() {
        let b = panel_layout(0.0, 10.0, 0.3, &[5.2, -1.0, 12.0]);
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 10.0);
        assert!(b.contains(&5.2));
        assert!(b.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.3 + 1e-12));
    }
}
