//! Overlapping frame segmentation and Hamming windowing.

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Hamming center/edge coefficients.
pub const HAMMING_ALPHA: f64 = 0.54;
pub const HAMMING_BETA: f64 = 0.46;

/// Frame rows stored contiguously: `n_frames x frame_len`, trailing partial
/// frame discarded.
#[derive(Debug, Clone)]
pub struct FrameMatrix {
    data: Vec<f64>,
    frame_len: usize,
    hop: usize,
    n_frames: usize,
}

impl FrameMatrix {
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.frame_len..(k + 1) * self.frame_len]
    }
}

/// `w[n] = 0.54 - 0.46*cos(2*pi*n/(N-1))`; a single-point window is `[1.0]`.
/// The upper half mirrors the lower so `w[n] == w[N-1-n]` holds exactly.
pub fn hamming_window(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::ZeroLength);
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let denom = (n - 1) as f64;
    let mut window = vec![0.0; n];
    for i in 0..=(n - 1) / 2 {
        let w = HAMMING_ALPHA
            - HAMMING_BETA * (2.0 * std::f64::consts::PI * i as f64 / denom).cos();
        window[i] = w;
        window[n - 1 - i] = w;
    }
    Ok(window)
}

/// Slice the signal into `frame_len`-sample rows advancing by `hop`,
/// optionally multiplying each row by the Hamming window.
pub fn frame_signal(
    buf: &AudioBuffer,
    frame_len: usize,
    hop: usize,
    windowed: bool,
) -> Result<FrameMatrix> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::ZeroLength);
    }
    let signal = buf.samples();
    if signal.len() < frame_len {
        return Err(Error::SignalTooShort {
            signal_len: signal.len(),
            frame_len,
        });
    }
    let n_frames = (signal.len() - frame_len) / hop + 1;
    let window = hamming_window(frame_len)?;
    let mut data = Vec::with_capacity(n_frames * frame_len);
    for k in 0..n_frames {
        let start = k * hop;
        let frame = &signal[start..start + frame_len];
        if windowed {
            data.extend(frame.iter().zip(&window).map(|(s, w)| s * w));
        } else {
            data.extend_from_slice(frame);
        }
    }
    Ok(FrameMatrix {
        data,
        frame_len,
        hop,
        n_frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_buffer(value: f64, len: usize) -> AudioBuffer {
        AudioBuffer::new(vec![value; len], 16_000).unwrap()
    }

    #[test]
    fn hamming_small_windows() {
        let w3 = hamming_window(3).unwrap();
        let expected = [0.08, 1.0, 0.08];
        for (a, e) in w3.iter().zip(expected) {
            assert!((a - e).abs() < 1e-9, "{a} vs {e}");
        }
        let w5 = hamming_window(5).unwrap();
        assert!((w5[1] - 0.54).abs() < 1e-9);
        assert_eq!(hamming_window(1).unwrap(), vec![1.0]);
        assert_eq!(hamming_window(0).unwrap_err().category(), "ZeroLength");
    }

    #[test]
    fn hamming_is_symmetric() {
        for n in [2, 3, 8, 129, 2048] {
            let w = hamming_window(n).unwrap();
            for i in 0..n {
                assert_eq!(w[i], w[n - 1 - i], "n={n}, i={i}");
            }
        }
    }

    #[test]
    fn windowed_constant_signal_reproduces_window() {
        let frames = frame_signal(&constant_buffer(1.0, 4096), 2048, 512, true).unwrap();
        let window = hamming_window(2048).unwrap();
        for k in 0..frames.n_frames() {
            for (a, e) in frames.row(k).iter().zip(&window) {
                assert!((a - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn frame_count_boundaries() {
        let exact = frame_signal(&constant_buffer(0.5, 2048), 2048, 512, false).unwrap();
        assert_eq!(exact.n_frames(), 1);

        // length 3072: frames start at 0, 512, 1024; 1536 would overrun.
        let buf = AudioBuffer::new((0..3072).map(|i| i as f64).collect(), 16_000).unwrap();
        let frames = frame_signal(&buf, 2048, 512, false).unwrap();
        assert_eq!(frames.n_frames(), 3);
        assert_eq!(frames.row(1)[0], 512.0);
        assert_eq!(frames.row(2)[0], 1024.0);

        let short = frame_signal(&constant_buffer(0.5, 2047), 2048, 512, false).unwrap_err();
        assert_eq!(short.category(), "SignalTooShort");
    }

    #[test]
    fn unwindowed_rows_reconstruct_source_samples() {
        let samples: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let buf = AudioBuffer::new(samples.clone(), 16_000).unwrap();
        let frames = frame_signal(&buf, 16, 4, false).unwrap();
        for k in 0..frames.n_frames() {
            assert_eq!(frames.row(k), &samples[k * 4..k * 4 + 16]);
        }
    }

    proptest! {
        #[test]
        fn windowing_never_raises_frame_energy(
            len in 64usize..512,
            frame_len in 8usize..64,
            hop in 1usize..32,
        ) {
            prop_assume!(len >= frame_len);
            let samples: Vec<f64> = (0..len).map(|i| ((i * 13 % 29) as f64 / 14.5) - 1.0).collect();
            let buf = AudioBuffer::new(samples, 16_000).unwrap();
            let raw = frame_signal(&buf, frame_len, hop, false).unwrap();
            let win = frame_signal(&buf, frame_len, hop, true).unwrap();
            for k in 0..raw.n_frames() {
                let raw_e: f64 = raw.row(k).iter().map(|s| s * s).sum();
                let win_e: f64 = win.row(k).iter().map(|s| s * s).sum();
                prop_assert!(win_e <= raw_e + 1e-12);
            }
        }
    }
}
