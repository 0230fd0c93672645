//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use speechtok::mel::MelConfig;
use speechtok::rvq::RvqStack;
use speechtok::stream::{FormatTag, InterleavedStream, Segment, SegmentKind, TokenFrame};

/// Slaney mel: linear 3 mel per 200 Hz below 1 kHz, 27 mel per ln(6.4) above.
pub fn slaney_mel(hz: f64) -> f64 {
    if hz >= 1000.0 {
        15.0 + 27.0 * (hz / 1000.0).ln() / 6.4f64.ln()
    } else {
        3.0 * hz / 200.0
    }
}

pub fn slaney_hz(mel: f64) -> f64 {
    if mel >= 15.0 {
        1000.0 * 6.4f64.powf((mel - 15.0) / 27.0)
    } else {
        200.0 * mel / 3.0
    }
}

/// Centre frequency of band `b`.
pub fn band_center(cfg: &MelConfig, b: usize) -> f64 {
    let (lo, hi) = (slaney_mel(cfg.fmin), slaney_mel(cfg.fmax));
    slaney_hz(lo + (hi - lo) * (b + 1) as f64 / (cfg.n_mels + 1) as f64)
}

/// Slaney-normalised triangular weight of band `b` at frequency `f`.
pub fn band_weight(cfg: &MelConfig, b: usize, f: f64) -> f64 {
    let (lo, hi) = (slaney_mel(cfg.fmin), slaney_mel(cfg.fmax));
    let step = (hi - lo) / (cfg.n_mels + 1) as f64;
    let l = slaney_hz(lo + step * b as f64);
    let c = slaney_hz(lo + step * (b + 1) as f64);
    let r = slaney_hz(lo + step * (b + 2) as f64);
    let tri = if f <= l || f >= r {
        0.0
    } else if f <= c {
        (f - l) / (c - l)
    } else {
        (r - f) / (r - c)
    };
    tri * 2.0 / (r - l)
}

/// Power spectrum of one frame by a direct O(n^2) DFT.
pub fn naive_power(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    // exp(-2 pi i m / n) for every m, indexed by k*t mod n.
    let table: Vec<(f64, f64)> = (0..n).map(|m| (-2.0 * PI * m as f64 / n as f64).sin_cos()).collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in frame.iter().enumerate() {
                let (sin, cos) = table[k * t % n];
                re += x * cos;
                im += x * sin;
            }
            re * re + im * im
        })
        .collect()
}

/// Log-mel spectrogram computed without any library code: explicit reflect
/// padding, periodic Hann window, direct DFT, per-band triangle weights.
pub fn oracle_log_mel(samples: &[f64], cfg: &MelConfig) -> Vec<Vec<f64>> {
    let half = cfg.n_fft / 2;
    let padded: Vec<f64> = if cfg.center {
        let n = samples.len();
        let mut p = Vec::with_capacity(n + 2 * half);
        for i in (1..=half).rev() {
            p.push(samples[i]);
        }
        p.extend_from_slice(samples);
        for i in 0..half {
            p.push(samples[n - 2 - i]);
        }
        p
    } else {
        samples.to_vec()
    };
    // Frame starts: count explicitly instead of using a formula.
    let mut starts = Vec::new();
    if cfg.center {
        let mut s = 0;
        while s < samples.len() {
            starts.push(s);
            s += cfg.hop;
        }
    } else {
        let mut s = 0;
        while s + cfg.n_fft <= samples.len() {
            starts.push(s);
            s += cfg.hop;
        }
    }
    let bin_hz = f64::from(cfg.sample_rate) / cfg.n_fft as f64;
    starts
        .iter()
        .map(|&s| {
            let frame: Vec<f64> = (0..cfg.n_fft)
                .map(|i| {
                    let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / cfg.n_fft as f64).cos();
                    w * padded[s + i]
                })
                .collect();
            let power = naive_power(&frame);
            (0..cfg.n_mels)
                .map(|b| {
                    let e: f64 = power
                        .iter()
                        .enumerate()
                        .map(|(k, p)| band_weight(cfg, b, k as f64 * bin_hz) * p)
                        .sum();
                    e.max(cfg.log_floor).ln()
                })
                .collect()
        })
        .collect()
}

/// `(mean |d|, mean d^2)` computed cell by cell.
pub fn oracle_l1_l2(a: &[Vec<f64>], b: &[Vec<f64>]) -> (f64, f64) {
    let mut n = 0usize;
    let (mut l1, mut l2) = (0.0, 0.0);
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            l1 += (x - y).abs();
            l2 += (x - y).powi(2);
            n += 1;
        }
    }
    (l1 / n as f64, l2 / n as f64)
}

/// Word error rate via the full (n+1) x (m+1) edit-distance table.
pub fn oracle_wer<T: PartialEq>(r: &[T], h: &[T]) -> f64 {
    let (n, m) = (r.len(), h.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[n][m] as f64 / n as f64
}

/// Residual cascade by exhaustive search; ties go to the lowest index.
/// Returns (indices, quantized vector).
pub fn oracle_rvq(stack: &RvqStack, x: &[f64]) -> (Vec<u32>, Vec<f64>) {
    let mut residual = x.to_vec();
    let mut q = vec![0.0; x.len()];
    let mut idx = Vec::new();
    for book in stack.layers() {
        let mut best = (f64::INFINITY, 0usize);
        for j in 0..book.size() {
            let d: f64 = book
                .codeword(j)
                .iter()
                .zip(&residual)
                .map(|(c, r)| (r - c) * (r - c))
                .sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        let c = book.codeword(best.1);
        for k in 0..x.len() {
            q[k] += c[k];
            residual[k] -= c[k];
        }
        idx.push(best.1 as u32);
    }
    (idx, q)
}

/// Plug-in Shannon entropy (nats) of a sample.
pub fn oracle_entropy(xs: &[u32]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_unstable();
    let n = xs.len() as f64;
    let mut h = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let p = (j - i) as f64 / n;
        h -= p * p.ln();
        i = j;
    }
    h
}

/// One EMA step per entry, written out from the update rule. `literal`
/// selects `(1-b)(a c + mean)` over `(1-b)(a c + (1-a) mean)`; entries with no
/// assignment get `(1-b) a c` and `(1-b) c` respectively.
pub fn ema_oracle(prev: &[Vec<f64>], assigned: &[Vec<Vec<f64>>], alpha: f64, beta: f64, literal: bool) -> Vec<Vec<f64>> {
    prev.iter()
        .zip(assigned)
        .map(|(c, xs)| {
            (0..c.len())
                .map(|k| {
                    let inner = if xs.is_empty() {
                        if literal {
                            alpha * c[k]
                        } else {
                            c[k]
                        }
                    } else {
                        let mean = xs.iter().map(|x| x[k]).sum::<f64>() / xs.len() as f64;
                        if literal {
                            alpha * c[k] + mean
                        } else {
                            alpha * c[k] + (1.0 - alpha) * mean
                        }
                    };
                    (1.0 - beta) * inner
                })
                .collect()
        })
        .collect()
}

pub fn random_frames(rng: &mut ChaCha8Rng, sizes: &[u32]) -> Vec<TokenFrame> {
    (0..rng.gen_range(1..5))
        .map(|_| TokenFrame::new(sizes.iter().map(|&k| rng.gen_range(0..k)).collect()))
        .collect()
}

/// A random stream that fits `tag`'s layout, with text ids anywhere in the code point range.
pub fn random_stream(rng: &mut ChaCha8Rng, tag: FormatTag, sizes: &[u32]) -> InterleavedStream {
    let t = |rng: &mut ChaCha8Rng| Segment::Text((0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..0x11_0000)).collect());
    let a = |rng: &mut ChaCha8Rng| Segment::Audio(random_frames(rng, sizes));
    let segments = match tag {
        FormatTag::Asr | FormatTag::Aqa | FormatTag::S2tt => vec![t(rng), a(rng), t(rng)],
        FormatTag::Tts => vec![t(rng), a(rng)],
        FormatTag::PureAudio => {
            if rng.gen_bool(0.8) {
                vec![a(rng)]
            } else {
                vec![]
            }
        }
        FormatTag::Intlv | FormatTag::Itts => {
            let n = rng.gen_range(0..7);
            let mut audio_next = tag == FormatTag::Intlv && rng.gen_bool(0.5);
            (0..n)
                .map(|_| {
                    audio_next = !audio_next;
                    if audio_next {
                        t(rng)
                    } else {
                        a(rng)
                    }
                })
                .collect()
        }
    };
    InterleavedStream::new(tag, segments).unwrap()
}

/// Loss flag of segment `i`, from the rules table.
pub fn expected_flag(tag: FormatTag, kinds: &[SegmentKind], i: usize) -> bool {
    match tag {
        FormatTag::Intlv => kinds[i] == SegmentKind::Text,
        FormatTag::Itts => i != 0,
        FormatTag::Asr | FormatTag::Aqa | FormatTag::S2tt => i == 2,
        FormatTag::Tts => i == 1,
        FormatTag::PureAudio => true,
    }
}

/// Expected mask over the wire: a switch before every segment but the first
/// (and before the first too with edge switches) carries the flag of the
/// segment it opens, each audio run ends with an EOA frame, and a trailing
/// edge switch carries the flag of the last segment.
pub fn expected_mask(tag: FormatTag, segs: &[Segment], edge: bool) -> Vec<bool> {
    let kinds: Vec<SegmentKind> = segs.iter().map(Segment::kind).collect();
    let mut expect = Vec::new();
    for (i, s) in segs.iter().enumerate() {
        let flag = expected_flag(tag, &kinds, i);
        if i > 0 || edge {
            expect.push(flag);
        }
        let body = match s {
            Segment::Text(t) => t.len(),
            Segment::Audio(f) => f.len() + 1,
        };
        expect.extend(std::iter::repeat_n(flag, body));
    }
    if edge && !segs.is_empty() {
        expect.push(expected_flag(tag, &kinds, segs.len() - 1));
    }
    expect
}

/// Every alternating layout of up to `max_segments` segments of length 1 or
/// 2 that `tag` accepts.
pub fn small_layouts(tag: FormatTag, max_segments: usize, sizes: &[u32]) -> Vec<InterleavedStream> {
    let mut out = Vec::new();
    for n in 0..=max_segments {
        for first_audio in [false, true] {
            for lens in 0..(1usize << n) {
                let segs: Vec<Segment> = (0..n)
                    .map(|i| {
                        let len = 1 + (lens >> i & 1);
                        if (i % 2 == 0) == first_audio {
                            Segment::Audio((0..len).map(|t| TokenFrame::new(sizes.iter().map(|&k| t as u32 % k).collect())).collect())
                        } else {
                            Segment::Text((0..len as u32).collect())
                        }
                    })
                    .collect();
                if let Ok(s) = InterleavedStream::new(tag, segs) {
                    out.push(s);
                }
            }
        }
    }
    out
}
