//! Raw planar YUV 4:2:0 8-bit video input/output and 4-frame chunking.
//!
//! Only this one format is supported: per frame, a full-resolution Y plane
//! followed by quarter-resolution U and V planes, frames concatenated.
//! Dimensions are never inferred from file names; callers supply them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One decoded picture: 8-bit luma plus subsampled chroma.
///
/// Planes are stored without padding, row-major. Frames are immutable in
/// practice once read and are safe to share across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    luma: Vec<u8>,
    chroma_u: Vec<u8>,
    chroma_v: Vec<u8>,
}

impl Frame {
    /// Builds a frame from raw planes, validating plane lengths against the
    /// declared dimensions. Dimensions must be even and non-zero.
    pub fn from_planes(
        width: usize,
        height: usize,
        luma: Vec<u8>,
        chroma_u: Vec<u8>,
        chroma_v: Vec<u8>,
    ) -> Result<Self> {
        check_dimensions(width, height)?;
        let c = (width / 2) * (height / 2);
        if luma.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "luma plane has {} bytes, expected {}",
                luma.len(),
                width * height
            )));
        }
        if chroma_u.len() != c || chroma_v.len() != c {
            return Err(Error::DimensionMismatch(format!(
                "chroma planes have {}/{} bytes, expected {}",
                chroma_u.len(),
                chroma_v.len(),
                c
            )));
        }
        Ok(Frame {
            width,
            height,
            luma,
            chroma_u,
            chroma_v,
        })
    }

    /// A frame with every luma sample set to `luma` and neutral chroma.
    pub fn flat(width: usize, height: usize, luma: u8) -> Result<Self> {
        check_dimensions(width, height)?;
        let c = (width / 2) * (height / 2);
        Ok(Frame {
            width,
            height,
            luma: vec![luma; width * height],
            chroma_u: vec![128; c],
            chroma_v: vec![128; c],
        })
    }

    /// Builds a frame from a luma plane with neutral chroma.
    pub fn from_luma(width: usize, height: usize, luma: Vec<u8>) -> Result<Self> {
        check_dimensions(width, height)?;
        if luma.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "luma plane has {} bytes, expected {}",
                luma.len(),
                width * height
            )));
        }
        let c = (width / 2) * (height / 2);
        Ok(Frame {
            width,
            height,
            luma,
            chroma_u: vec![128; c],
            chroma_v: vec![128; c],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    pub fn chroma_u(&self) -> &[u8] {
        &self.chroma_u
    }

    pub fn chroma_v(&self) -> &[u8] {
        &self.chroma_v
    }

    /// Luma sample at (x, y); panics out of bounds.
    #[inline]
    pub fn luma_at(&self, x: usize, y: usize) -> u8 {
        self.luma[y * self.width + x]
    }

    pub fn same_dimensions(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Bytes one frame occupies on disk in planar 4:2:0.
    pub fn footprint(width: usize, height: usize) -> usize {
        width * height * 3 / 2
    }
}

fn check_dimensions(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "frame dimensions must be even and non-zero, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Frames per decision chunk.
pub const CHUNK_FRAMES: usize = 4;

/// Four consecutive frames, the atomic frame-rate decision unit.
///
/// `prev_last` is the last frame of the preceding chunk; it is present for
/// every chunk except the first and supplies the temporal reference for the
/// chunk's first frame.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub index: usize,
    pub frames: [Frame; CHUNK_FRAMES],
    pub prev_last: Option<Frame>,
}

impl Chunk {
    pub fn new(index: usize, frames: [Frame; 4], prev_last: Option<Frame>) -> Result<Self> {
        if (index == 0) != prev_last.is_none() {
            return Err(Error::InvalidConfig(format!(
                "chunk {index}: prev_last must be present iff index > 0"
            )));
        }
        Ok(Chunk {
            index,
            frames,
            prev_last,
        })
    }
}

/// Streaming reader over a raw YUV420p file.
///
/// The file size is validated against the frame footprint up front, so the
/// number of frames is known before decoding starts.
pub struct FrameReader {
    inner: BufReader<File>,
    path: std::path::PathBuf,
    width: usize,
    height: usize,
    n_frames: usize,
    next: usize,
}

impl FrameReader {
    pub fn open(path: &Path, width: usize, height: usize) -> Result<Self> {
        check_dimensions(width, height)?;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let size = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let footprint = Frame::footprint(width, height);
        if size % footprint as u64 != 0 {
            return Err(Error::SizeMismatch {
                size,
                width,
                height,
                footprint,
            });
        }
        Ok(FrameReader {
            inner: BufReader::new(file),
            path: path.to_path_buf(),
            width,
            height,
            n_frames: (size / footprint as u64) as usize,
            next: 0,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    fn read_frame(&mut self) -> Result<Frame> {
        let (w, h) = (self.width, self.height);
        let mut luma = vec![0u8; w * h];
        let mut u = vec![0u8; (w / 2) * (h / 2)];
        let mut v = vec![0u8; (w / 2) * (h / 2)];
        self.inner
            .read_exact(&mut luma)
            .and_then(|_| self.inner.read_exact(&mut u))
            .and_then(|_| self.inner.read_exact(&mut v))
            .map_err(|e| Error::io(&self.path, e))?;
        Frame::from_planes(w, h, luma, u, v)
    }
}

impl Iterator for FrameReader {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.n_frames {
            return None;
        }
        self.next += 1;
        Some(self.read_frame())
    }
}

/// Reads a whole raw YUV420p file into memory.
///
/// Errors if the file size is not a multiple of the frame footprint. For long
/// sequences prefer [`FrameReader`], which streams.
pub fn read_yuv(path: &Path, width: usize, height: usize) -> Result<Vec<Frame>> {
    FrameReader::open(path, width, height)?.collect()
}

/// Incremental writer; counterpart of [`FrameReader`].
pub struct FrameWriter {
    inner: BufWriter<File>,
    path: std::path::PathBuf,
    dims: Option<(usize, usize)>,
    bytes: u64,
}

impl FrameWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(FrameWriter {
            inner: BufWriter::new(file),
            path: path.to_path_buf(),
            dims: None,
            bytes: 0,
        })
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<()> {
        match self.dims {
            None => self.dims = Some((frame.width, frame.height)),
            Some((w, h)) if (w, h) != (frame.width, frame.height) => {
                return Err(Error::DimensionMismatch(format!(
                    "frame is {}x{} but stream started at {w}x{h}",
                    frame.width, frame.height
                )));
            }
            _ => {}
        }
        for plane in [&frame.luma, &frame.chroma_u, &frame.chroma_v] {
            self.inner
                .write_all(plane)
                .map_err(|e| Error::io(&self.path, e))?;
            self.bytes += plane.len() as u64;
        }
        Ok(())
    }

    /// Flushes and returns the total byte count written.
    pub fn finish(mut self) -> Result<u64> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.bytes)
    }
}

/// Writes frames as a raw YUV420p file and returns the byte count.
///
/// All frames must share dimensions; the output re-read with [`read_yuv`]
/// yields bit-identical frames.
pub fn write_yuv(path: &Path, frames: &[Frame]) -> Result<u64> {
    let mut writer = FrameWriter::create(path)?;
    for frame in frames {
        writer.write_frame(frame)?;
    }
    writer.finish()
}

/// Splits a frame sequence into 4-frame chunks plus a pass-through tail.
///
/// The tail holds the trailing `N mod 4` frames; it is never classified and
/// is always kept at the source frame-rate. Chunk `i` carries frame `4i - 1`
/// as `prev_last` for `i > 0`.
pub fn chunk_frames(frames: &[Frame]) -> (Vec<Chunk>, Vec<Frame>) {
    let n_chunks = frames.len() / 4;
    let mut chunks = Vec::with_capacity(n_chunks);
    for i in 0..n_chunks {
        let base = i * 4;
        let group: [Frame; 4] = [
            frames[base].clone(),
            frames[base + 1].clone(),
            frames[base + 2].clone(),
            frames[base + 3].clone(),
        ];
        let prev_last = if i > 0 {
            Some(frames[base - 1].clone())
        } else {
            None
        };
        chunks.push(Chunk {
            index: i,
            frames: group,
            prev_last,
        });
    }
    let tail = frames[n_chunks * 4..].to_vec();
    (chunks, tail)
}

/// Streaming chunker over any fallible frame source.
///
/// Call [`ChunkStream::next_chunk`] until it returns `None`, then collect the
/// remaining partial group with [`ChunkStream::into_tail`].
pub struct ChunkStream<I> {
    source: I,
    index: usize,
    prev_last: Option<Frame>,
    tail: Vec<Frame>,
    done: bool,
}

impl<I: Iterator<Item = Result<Frame>>> ChunkStream<I> {
    pub fn new(source: I) -> Self {
        ChunkStream {
            source,
            index: 0,
            prev_last: None,
            tail: Vec::new(),
            done: false,
        }
    }

    pub fn next_chunk(&mut self) -> Result<Option<Chunk>> {
        if self.done {
            return Ok(None);
        }
        let mut group = Vec::with_capacity(4);
        while group.len() < 4 {
            match self.source.next() {
                Some(frame) => group.push(frame?),
                None => {
                    self.done = true;
                    self.tail = group;
                    return Ok(None);
                }
            }
        }
        let frames: [Frame; 4] = group.try_into().expect("exactly 4 frames");
        let chunk = Chunk {
            index: self.index,
            frames: frames.clone(),
            prev_last: self.prev_last.take(),
        };
        self.prev_last = Some(frames[3].clone());
        self.index += 1;
        Ok(Some(chunk))
    }

    /// Frames left over after the last full chunk. Valid once `next_chunk`
    /// has returned `None`.
    pub fn into_tail(self) -> Vec<Frame> {
        self.tail
    }
}
