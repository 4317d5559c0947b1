use hipgest::audio_io::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn stft_frames_satisfy_parseval(samples in prop::collection::vec(-1.0f64..1.0, 256..600), hop in 1usize..200) {
        let frame_len = 256;
        let buffer = AudioBuffer::new(samples.clone(), 16000.0).unwrap();
        let spectra = stft(&buffer, frame_len, hop).unwrap();
        prop_assert_eq!(spectra.len(), (samples.len() - frame_len) / hop + 1);
        let window = hann(frame_len);
        for (i, s) in spectra.iter().enumerate() {
            let windowed: f64 = (0..frame_len).map(|k| (samples[i * hop + k] * window[k]).powi(2)).sum();
            let spectral = s.two_sided_energy() / frame_len as f64;
            prop_assert!((windowed - spectral).abs() <= 1e-6 * windowed.max(1.0));
        }
    }

    #[test]
    fn beat_picking_ignores_envelope_scale(
        env in prop::collection::vec(0.0f64..10.0, 1..80),
        c in 0.01f64..100.0,
        ratio in 0.05f64..1.0,
    ) {
        let scaled: Vec<f64> = env.iter().map(|v| v * c).collect();
        prop_assert_eq!(pick_beats(&env, 0.032, ratio).unwrap(), pick_beats(&scaled, 0.032, ratio).unwrap());
    }

    #[test]
    fn wav_round_trip_within_quantization(samples in prop::collection::vec(-0.99f64..0.99, 1..400)) {
        let bytes = write_wav(std::slice::from_ref(&samples), 16000);
        let back = parse_wav(&bytes).unwrap();
        prop_assert_eq!(back.samples().len(), samples.len());
        for (a, b) in back.samples().iter().zip(&samples) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }
}

#[test]
fn single_spike_beat_time() {
    let mut env = vec![0.0; 30];
    env[10] = 3.0;
    assert_eq!(pick_beats(&env, 0.01, 0.5).unwrap().times(), &[10.0 * 0.01]);
}

#[test]
fn beat_and_feature_csv_formats() {
    let beats = read_beats_csv("time_s\n0.25\n1.5\n".as_bytes()).unwrap();
    assert_eq!(beats.times(), &[0.25, 1.5]);
    let track = read_feature_csv("0.1,0.2\n0.3,0.4\n".as_bytes()).unwrap();
    assert_eq!((track.rows(), track.cols()), (2, 2));
}
