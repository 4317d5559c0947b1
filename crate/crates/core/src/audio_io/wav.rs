use super::{AudioBuffer, AudioError};

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decodes a RIFF/WAVE file holding 16-bit PCM.
///
/// Stereo (or wider) input is downmixed by averaging the channels; samples
/// are scaled by `1 / 32768`.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::Wav("missing RIFF/WAVE header".into()));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                AudioError::Wav(format!(
                    "truncated `{}` chunk: declares {size} bytes, {} available",
                    String::from_utf8_lossy(id),
                    bytes.len() - body
                ))
            })?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(AudioError::Wav("fmt chunk shorter than 16 bytes".into()));
                }
                let tag = u16_at(bytes, body);
                let pcm = match tag {
                    FORMAT_PCM => true,
                    // Sub-format GUID starts with the plain format tag.
                    FORMAT_EXTENSIBLE if size >= 40 => u16_at(bytes, body + 24) == FORMAT_PCM,
                    _ => false,
                };
                if !pcm {
                    return Err(AudioError::Unsupported(format!(
                        "format tag {tag:#06x} is not PCM"
                    )));
                }
                format = Some(Format {
                    channels: u16_at(bytes, body + 2),
                    sample_rate: u32_at(bytes, body + 4),
                    bits: u16_at(bytes, body + 14),
                });
            }
            b"data" => {
                let f = format
                    .as_ref()
                    .ok_or_else(|| AudioError::Wav("data chunk before fmt chunk".into()))?;
                return decode(f, &bytes[body..end]);
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = end + (size & 1);
    }
    Err(AudioError::Wav("no data chunk".into()))
}

fn decode(f: &Format, data: &[u8]) -> Result<AudioBuffer, AudioError> {
    if f.bits != 16 {
        return Err(AudioError::Unsupported(format!("{}-bit PCM", f.bits)));
    }
    if f.channels == 0 || f.sample_rate == 0 {
        return Err(AudioError::Wav("zero channels or sample rate".into()));
    }
    let block = 2 * f.channels as usize;
    if !data.len().is_multiple_of(block) {
        return Err(AudioError::Wav(format!(
            "data length {} is not a multiple of the {block}-byte frame",
            data.len()
        )));
    }
    let samples = data
        .chunks_exact(block)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|s| i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0)
                .sum();
            sum / f.channels as f64
        })
        .collect();
    AudioBuffer::new(samples, f.sample_rate as f64)
}

/// Encodes interleaved 16-bit PCM. Values are clamped to `[-1, 1)`.
pub fn write_wav(channels: &[Vec<f64>], sample_rate: u32) -> Vec<u8> {
    let n_ch = channels.len().max(1) as u16;
    let frames = channels.first().map_or(0, Vec::len);
    let data_len = frames as u32 * n_ch as u32 * 2;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&n_ch.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * n_ch as u32 * 2).to_le_bytes());
    out.extend_from_slice(&(n_ch * 2).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for i in 0..frames {
        for ch in channels {
            let v = (ch[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_of_silence() {
        let bytes = write_wav(&[vec![0.0; 16000]], 16000);
        let buf = parse_wav(&bytes).unwrap();
        assert_eq!(buf.samples().len(), 16000);
        assert_eq!(buf.sample_rate(), 16000.0);
        assert!(buf.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_downmix_cancels() {
        let bytes = write_wav(&[vec![0.5; 100], vec![-0.5; 100]], 8000);
        let buf = parse_wav(&bytes).unwrap();
        assert!(buf.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn most_negative_sample_is_minus_one() {
        let bytes = write_wav(&[vec![-1.0, 0.5]], 8000);
        let buf = parse_wav(&bytes).unwrap();
        assert_eq!(buf.samples(), &[-1.0, 0.5]);
    }

    #[test]
    fn rejects_float_and_truncation() {
        let mut bytes = write_wav(&[vec![0.1; 10]], 8000);
        let mut float = bytes.clone();
        float[20] = 3;
        assert!(matches!(parse_wav(&float), Err(AudioError::Unsupported(_))));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(parse_wav(&bytes), Err(AudioError::Wav(_))));
        assert!(matches!(parse_wav(b"RIFF"), Err(AudioError::Wav(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let plain = write_wav(&[vec![0.25; 4]], 8000);
        let mut bytes = plain[..12].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]);
        bytes.extend_from_slice(&plain[12..]);
        assert_eq!(parse_wav(&bytes).unwrap().samples(), &[0.25; 4]);
    }
}
