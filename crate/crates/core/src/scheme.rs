//! Segment-length schemes partitioning `T` frames into contiguous runs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Segment lengths `(s_1, ..., s_T')` with `1 <= s_i <= U` summing to `T`.
///
/// Serialized as `{"T": int, "U": int, "segments": [int, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SchemeRepr", into = "SchemeRepr")]
pub struct Scheme {
    segments: Vec<usize>,
    max_seg: usize,
    frames: usize,
}

#[derive(Serialize, Deserialize)]
struct SchemeRepr {
    #[serde(rename = "T")]
    frames: usize,
    #[serde(rename = "U")]
    max_seg: usize,
    segments: Vec<usize>,
}

impl TryFrom<SchemeRepr> for Scheme {
    type Error = Error;

    fn try_from(r: SchemeRepr) -> Result<Self> {
        let scheme = Scheme::new(r.segments, r.max_seg)?;
        scheme.check_frames(r.frames)?;
        Ok(scheme)
    }
}

impl From<Scheme> for SchemeRepr {
    fn from(s: Scheme) -> Self {
        SchemeRepr {
            frames: s.frames,
            max_seg: s.max_seg,
            segments: s.segments,
        }
    }
}

impl Scheme {
    pub fn new(segments: Vec<usize>, max_seg: usize) -> Result<Self> {
        if max_seg == 0 {
            return Err(invalid!("segment cap U must be at least 1"));
        }
        if segments.is_empty() {
            return Err(invalid!("scheme must contain at least one segment"));
        }
        if let Some((i, &s)) = segments
            .iter()
            .enumerate()
            .find(|(_, &s)| s == 0 || s > max_seg)
        {
            return Err(invalid!(
                "segment {i} has length {s}, allowed 1..={max_seg}"
            ));
        }
        let frames = segments.iter().sum();
        Ok(Self {
            segments,
            max_seg,
            frames,
        })
    }

    /// The identity scheme: every frame is its own segment.
    pub fn ones(frames: usize, max_seg: usize) -> Result<Self> {
        Self::new(vec![1; frames], max_seg)
    }

    /// Fixed-width segmentation: runs of `width` frames with a shorter tail.
    pub fn uniform(frames: usize, width: usize, max_seg: usize) -> Result<Self> {
        if width == 0 {
            return Err(invalid!("uniform width must be at least 1"));
        }
        let mut segments = vec![width; frames / width];
        if !frames.is_multiple_of(width) {
            segments.push(frames % width);
        }
        Self::new(segments, max_seg)
    }

    /// Joins schemes end to end, as used when batching utterances along time.
    pub fn concat(parts: &[Scheme]) -> Result<Self> {
        let max_seg = parts.iter().map(|s| s.max_seg).max().unwrap_or(0);
        let segments = parts
            .iter()
            .flat_map(|s| s.segments.iter().copied())
            .collect();
        Self::new(segments, max_seg)
    }

    pub fn segments(&self) -> &[usize] {
        &self.segments
    }

    pub fn into_segments(self) -> Vec<usize> {
        self.segments
    }

    /// `T'`, the number of segments.
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// `T`, the number of frames covered.
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn max_seg(&self) -> usize {
        self.max_seg
    }

    /// `(start, len)` for each segment, with 0-based start frames.
    pub fn spans(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.segments.iter().scan(0usize, |start, &len| {
            let span = (*start, len);
            *start += len;
            Some(span)
        })
    }

    /// Segment index of every frame (`repeat_interleave` of `0..T'`).
    pub fn segment_ids(&self) -> Vec<usize> {
        let mut ids = Vec::with_capacity(self.frames);
        for (i, &len) in self.segments.iter().enumerate() {
            ids.extend(std::iter::repeat_n(i, len));
        }
        ids
    }

    /// Histogram of segment lengths, index `k - 1` counting length `k`.
    pub fn length_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.max_seg];
        for &s in &self.segments {
            hist[s - 1] += 1;
        }
        hist
    }

    pub fn check_frames(&self, frames: usize) -> Result<()> {
        if self.frames != frames {
            return Err(invalid!(
                "scheme covers {} frames, sequence has {frames}",
                self.frames
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scheme serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid!("scheme JSON: {e}"))
    }
}
