//! On-disk and wire formats.
//!
//! `GMRW` waveform files and streams share one layout: a header (magic,
//! version byte, u16 channel count, u32 sample rate, per-channel name, unit
//! and role) followed by frames of `u32` remainder length, `u64` starting
//! sample index and interleaved `f32` samples, all little-endian.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::current_inverse::ChannelError;
use crate::error::{Error, Result};
use crate::fault_detector::{Corpus, Detection};
use crate::waveform::{ChannelInfo, ChannelRole, WaveformRecord};

pub const WAVEFORM_MAGIC: &[u8; 4] = b"GMRW";
pub const WAVEFORM_VERSION: u8 = 1;
/// Upper bound on the size of one frame, prefix included.
pub const MAX_FRAME_BYTES: usize = 1 << 20;
const FRAME_PREFIX: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveformFormat {
    Binary,
    Csv,
}

impl FromStr for WaveformFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "gmrw" => Ok(Self::Binary),
            "csv" => Ok(Self::Csv),
            other => Err(Error::param("format", format!("unknown waveform format `{other}` (expected binary or csv)"))),
        }
    }
}

impl WaveformFormat {
    /// `.csv` means CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformHeader {
    pub sample_rate: u32,
    pub channels: Vec<ChannelInfo>,
}

impl WaveformHeader {
    pub fn for_record(record: &WaveformRecord) -> Result<Self> {
        let rate = record.sample_rate();
        if rate.fract() != 0.0 || rate < 1.0 || rate > u32::MAX as f64 {
            return Err(Error::Format(format!("sample rate {rate} Hz is not a 32-bit integer")));
        }
        Ok(Self {
            sample_rate: rate as u32,
            channels: record.channels().to_vec(),
        })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.channels.is_empty() || self.channels.len() > u16::MAX as usize {
            return Err(Error::Format(format!("channel count {} out of range", self.channels.len())));
        }
        let mut out = Vec::new();
        out.extend_from_slice(WAVEFORM_MAGIC);
        out.push(WAVEFORM_VERSION);
        out.extend_from_slice(&(self.channels.len() as u16).to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        for c in &self.channels {
            for s in [&c.name, &c.unit] {
                let len = u8::try_from(s.len()).map_err(|_| Error::Format(format!("`{s}` exceeds 255 bytes")))?;
                out.push(len);
                out.extend_from_slice(s.as_bytes());
            }
            out.push(c.role.to_byte());
        }
        Ok(out)
    }
}

/// One frame covering `len` samples of `record` from `start`.
pub fn encode_frame(record: &WaveformRecord, start: usize, len: usize, index: u64) -> Vec<u8> {
    let nch = record.channel_count();
    let payload = len * nch * 4;
    let mut out = Vec::with_capacity(FRAME_PREFIX + payload);
    out.extend_from_slice(&((8 + payload) as u32).to_le_bytes());
    out.extend_from_slice(&index.to_le_bytes());
    for k in start..start + len {
        for c in 0..nch {
            out.extend_from_slice(&(record.data(c)[k] as f32).to_le_bytes());
        }
    }
    out
}

/// Samples per frame so that a frame stays within [`MAX_FRAME_BYTES`].
pub fn frame_capacity(channels: usize) -> usize {
    ((MAX_FRAME_BYTES - FRAME_PREFIX) / (4 * channels.max(1))).max(1)
}

fn start_index(record: &WaveformRecord) -> Result<u64> {
    let idx = record.start_time() * record.sample_rate();
    let r = idx.round();
    if r < 0.0 || (idx - r).abs() > 1e-6 {
        return Err(Error::Format(format!(
            "start time {} s is not a whole sample index",
            record.start_time()
        )));
    }
    Ok(r as u64)
}

/// Header plus frames of at most 1 MiB. Samples are stored as `f32`.
pub fn write_binary<W: Write>(mut w: W, record: &WaveformRecord) -> Result<()> {
    w.write_all(&WaveformHeader::for_record(record)?.encode()?)?;
    let first = start_index(record)?;
    let cap = frame_capacity(record.channel_count());
    let mut start = 0;
    loop {
        let len = cap.min(record.len() - start);
        w.write_all(&encode_frame(record, start, len, first + start as u64))?;
        start += len;
        if start >= record.len() {
            break;
        }
    }
    w.flush()?;
    Ok(())
}

/// `# sample_rate=<hz>` line, then `time,<name>[unit],...` and one row per
/// sample.
pub fn write_csv<W: Write>(mut w: W, record: &WaveformRecord) -> Result<()> {
    writeln!(w, "# sample_rate={}", record.sample_rate())?;
    write!(w, "time")?;
    for c in record.channels() {
        write!(w, ",{}[{}]", c.name, c.unit)?;
    }
    writeln!(w)?;
    let rate = record.sample_rate();
    for k in 0..record.len() {
        write!(w, "{}", record.start_time() + k as f64 / rate)?;
        for c in 0..record.channel_count() {
            write!(w, ",{}", record.data(c)[k])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write never leaves a partial file behind.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w).map_err(|e| match e {
            Error::Stream(source) => Error::Io {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })?;
        w.flush().map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

pub fn write_waveform(record: &WaveformRecord, path: &Path, format: WaveformFormat) -> Result<()> {
    write_atomic(path, |w| match format {
        WaveformFormat::Binary => write_binary(w, record),
        WaveformFormat::Csv => write_csv(w, record),
    })
}

/// Reads a binary or CSV waveform file, chosen by content. Gaps in a binary
/// file are an error here; use [`read_stream`] to observe them.
pub fn read_waveform(path: &Path) -> Result<WaveformRecord> {
    let mut r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let head = r.fill_buf().map_err(io_err(path))?;
    let wrap = |e: Error| match e {
        Error::Stream(source) => io_err(path)(source),
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    };
    if head.starts_with(WAVEFORM_MAGIC) || head.len() >= 4 && head[..4].iter().any(|b| !b.is_ascii()) {
        read_binary(r).map_err(wrap)
    } else {
        read_csv(r).map_err(wrap)
    }
}

/// Whole binary stream into one record; fails on gaps.
pub fn read_binary<R: Read>(r: R) -> Result<WaveformRecord> {
    let mut stream = read_stream(r)?;
    let header = stream.header().clone();
    let n = header.channels.len();
    let mut samples = vec![Vec::new(); n];
    let mut first = None;
    for ev in &mut stream {
        match ev? {
            StreamEvent::Chunk(c) => {
                first.get_or_insert(c.start_time());
                for (dst, src) in samples.iter_mut().zip(c.samples()) {
                    dst.extend_from_slice(src);
                }
            }
            StreamEvent::Gap { expected, found } => {
                return Err(Error::Format(format!(
                    "gap of {} samples (expected index {expected}, found {found})",
                    found - expected
                )))
            }
        }
    }
    WaveformRecord::new(header.sample_rate as f64, first.unwrap_or(0.0), header.channels, samples)
}

pub fn read_csv<R: BufRead>(r: R) -> Result<WaveformRecord> {
    let bad = |line: usize, m: String| Error::Format(format!("CSV line {line}: {m}"));
    let mut lines = r.lines().enumerate();
    let mut rate_hint = None;
    let header = loop {
        let Some((i, line)) = lines.next() else {
            return Err(bad(1, "missing header row".into()));
        };
        let line = line?;
        if let Some(c) = line.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("sample_rate=") {
                rate_hint = Some(v.trim().parse::<f64>().map_err(|e| bad(i + 1, format!("sample rate: {e}")))?);
            }
            continue;
        }
        break (i, line);
    };
    let mut cols = header.1.split(',');
    if cols.next().map(str::trim) != Some("time") {
        return Err(bad(header.0 + 1, "first column must be `time`".into()));
    }
    let mut channels = Vec::new();
    for col in cols {
        let col = col.trim();
        let (name, unit) = match col.split_once('[') {
            Some((n, u)) => (n, u.strip_suffix(']').ok_or_else(|| bad(header.0 + 1, format!("bad column `{col}`")))?),
            None => (col, ""),
        };
        channels.push(ChannelInfo::new(name, unit, ChannelRole::infer(name)));
    }
    let mut times = Vec::new();
    let mut samples = vec![Vec::new(); channels.len()];
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut num = |what: &str| -> Result<f64> {
            fields
                .next()
                .ok_or_else(|| bad(i + 1, format!("missing {what}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(i + 1, format!("{what}: {e}")))
        };
        times.push(num("time")?);
        for (c, s) in channels.iter().zip(samples.iter_mut()) {
            s.push(num(&c.name)?);
        }
        if fields.next().is_some() {
            return Err(bad(i + 1, "too many fields".into()));
        }
    }
    let rate = match rate_hint {
        Some(r) => r,
        None if times.len() >= 2 => {
            let r = (times.len() - 1) as f64 / (times[times.len() - 1] - times[0]);
            if (r - r.round()).abs() < 1e-6 * r {
                r.round()
            } else {
                r
            }
        }
        None => return Err(Error::Format("CSV with fewer than 2 rows needs a `# sample_rate=` line".into())),
    };
    WaveformRecord::new(rate, times.first().copied().unwrap_or(0.0), channels, samples)
}

/// Item of a decoded stream.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamEvent {
    Chunk(WaveformRecord),
    /// Samples `expected..found` never arrived.
    Gap { expected: u64, found: u64 },
}

pub struct StreamReader<R> {
    reader: R,
    header: WaveformHeader,
    offset: u64,
    next_index: Option<u64>,
    pending: Option<WaveformRecord>,
    done: bool,
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: u64, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::Format(format!("stream truncated in {what} at byte offset {offset}"))
        } else {
            Error::Stream(e)
        }
    })
}

/// Parses the header and returns an iterator over chunks and gap events.
pub fn read_stream<R: Read>(mut reader: R) -> Result<StreamReader<R>> {
    let mut fixed = [0u8; 11];
    read_exact_at(&mut reader, &mut fixed, 0, "header")?;
    if &fixed[..4] != WAVEFORM_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"GMRW\"",
            String::from_utf8_lossy(&fixed[..4])
        )));
    }
    if fixed[4] != WAVEFORM_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {} (expected {WAVEFORM_VERSION})",
            fixed[4]
        )));
    }
    let n = u16::from_le_bytes([fixed[5], fixed[6]]) as usize;
    if n == 0 {
        return Err(Error::Format("header declares zero channels".into()));
    }
    let rate = u32::from_le_bytes(fixed[7..11].try_into().unwrap());
    if rate == 0 {
        return Err(Error::Format("header declares a zero sample rate".into()));
    }
    let mut offset = 11u64;
    let text = |reader: &mut R, offset: &mut u64| -> Result<String> {
        let mut len = [0u8; 1];
        read_exact_at(reader, &mut len, *offset, "channel table")?;
        let mut buf = vec![0u8; len[0] as usize];
        read_exact_at(reader, &mut buf, *offset + 1, "channel table")?;
        *offset += 1 + buf.len() as u64;
        String::from_utf8(buf).map_err(|_| Error::Format(format!("channel text is not UTF-8 near byte {offset}")))
    };
    let mut channels = Vec::with_capacity(n);
    for _ in 0..n {
        let name = text(&mut reader, &mut offset)?;
        let unit = text(&mut reader, &mut offset)?;
        let mut role = [0u8; 1];
        read_exact_at(&mut reader, &mut role, offset, "channel table")?;
        let role = ChannelRole::from_byte(role[0])
            .ok_or_else(|| Error::Format(format!("unknown channel role {} at byte offset {offset}", role[0])))?;
        offset += 1;
        channels.push(ChannelInfo::new(name, unit, role));
    }
    Ok(StreamReader {
        reader,
        header: WaveformHeader {
            sample_rate: rate,
            channels,
        },
        offset,
        next_index: None,
        pending: None,
        done: false,
    })
}

impl<R: Read> StreamReader<R> {
    pub fn header(&self) -> &WaveformHeader {
        &self.header
    }

    fn next_frame(&mut self) -> Result<Option<(u64, WaveformRecord)>> {
        let start = self.offset;
        let mut len = [0u8; 4];
        let mut got = 0;
        while got < 4 {
            match self.reader.read(&mut len[got..]) {
                Ok(0) if got == 0 => return Ok(None),
                Ok(0) => return Err(Error::Format(format!("stream truncated in frame length at byte offset {start}"))),
                Ok(k) => got += k,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let len = u32::from_le_bytes(len) as usize;
        let nch = self.header.channels.len();
        if len < 8 || (len - 8) % (4 * nch) != 0 || len + 4 > MAX_FRAME_BYTES.max(FRAME_PREFIX + 4 * nch) {
            return Err(Error::Format(format!(
                "invalid frame length {len} at byte offset {start} ({nch} channels)"
            )));
        }
        let mut body = vec![0u8; len];
        read_exact_at(&mut self.reader, &mut body, start + 4, "frame body")?;
        self.offset += 4 + len as u64;
        let index = u64::from_le_bytes(body[..8].try_into().unwrap());
        let count = (len - 8) / (4 * nch);
        let mut samples = vec![Vec::with_capacity(count); nch];
        for (k, v) in body[8..].chunks_exact(4).enumerate() {
            samples[k % nch].push(f32::from_le_bytes(v.try_into().unwrap()) as f64);
        }
        let rate = self.header.sample_rate as f64;
        let rec = WaveformRecord::new(rate, index as f64 / rate, self.header.channels.clone(), samples)?;
        Ok(Some((index, rec)))
    }
}

impl<R: Read> Iterator for StreamReader<R> {
    type Item = Result<StreamEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(c) = self.pending.take() {
            return Some(Ok(StreamEvent::Chunk(c)));
        }
        if self.done {
            return None;
        }
        let frame_offset = self.offset;
        let (index, chunk) = match self.next_frame() {
            Ok(Some(f)) => f,
            Ok(None) => {
                self.done = true;
                return None;
            }
            Err(e) => {
                self.done = true;
                return Some(Err(e));
            }
        };
        let expected = self.next_index;
        self.next_index = Some(index + chunk.len() as u64);
        match expected {
            Some(e) if index < e => {
                self.done = true;
                Some(Err(Error::Format(format!(
                    "sample index regression at byte offset {frame_offset}: frame starts at {index}, expected {e}"
                ))))
            }
            Some(e) if index > e => {
                self.pending = Some(chunk);
                Some(Ok(StreamEvent::Gap { expected: e, found: index }))
            }
            _ => Some(Ok(StreamEvent::Chunk(chunk))),
        }
    }
}

pub fn write_error_report<W: Write>(mut w: W, rows: &[ChannelError]) -> Result<()> {
    writeln!(w, "channel,rms_error_pct,max_abs_error")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.channel, r.rms_error_pct, r.max_abs_error)?;
    }
    Ok(())
}

pub fn write_features<W: Write>(mut w: W, names: &[String], rows: &[(f64, Vec<f64>)]) -> Result<()> {
    write!(w, "start_time")?;
    for n in names {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for (t, row) in rows {
        write!(w, "{t}")?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_detections<W: Write>(mut w: W, rows: &[Detection]) -> Result<()> {
    writeln!(w, "start_time,label,score_normal,score_lif,score_non_arcing_hif,score_arcing_hif")?;
    for d in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            d.start_time, d.label, d.scores[0], d.scores[1], d.scores[2], d.scores[3]
        )?;
    }
    Ok(())
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(corpus.to_csv().as_bytes())?))
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Corpus::from_csv(&text)
}
