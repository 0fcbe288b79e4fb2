//! Iterative radix-2 FFT over power-of-two lengths, plus the real-input
//! helpers the spectral stages build on.

/// In-place complex FFT (decimation in time). Both slices must share a
/// power-of-two length.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert_eq!(n, im.len(), "real/imag length mismatch");
    assert!(n.is_power_of_two(), "FFT length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let ang = -2.0 * std::f64::consts::PI / len as f64;
        let (w_re, w_im) = (ang.cos(), ang.sin());
        let mut start = 0;
        while start < n {
            let (mut cur_re, mut cur_im) = (1.0, 0.0);
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let t_re = re[b] * cur_re - im[b] * cur_im;
                let t_im = re[b] * cur_im + im[b] * cur_re;
                re[b] = re[a] - t_re;
                im[b] = im[a] - t_im;
                re[a] += t_re;
                im[a] += t_im;
                let next_re = cur_re * w_re - cur_im * w_im;
                cur_im = cur_re * w_im + cur_im * w_re;
                cur_re = next_re;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// Squared DFT magnitudes of a real frame over bins `0..=n/2`.
pub fn real_power_spectrum(frame: &[f64]) -> Vec<f64> {
    let mut re = frame.to_vec();
    let mut im = vec![0.0; frame.len()];
    fft_in_place(&mut re, &mut im);
    (0..=frame.len() / 2)
        .map(|k| re[k] * re[k] + im[k] * im[k])
        .collect()
}

/// DFT magnitudes of a real frame over bins `0..=n/2`.
pub fn real_magnitudes(frame: &[f64]) -> Vec<f64> {
    real_power_spectrum(frame).iter().map(|p| p.sqrt()).collect()
}
