use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AnnotatedFrame, RenderError};
use crate::imaging::save_frame;

pub fn frame_file_name(index: u64) -> String {
    format!("{index:06}.png")
}

/// Contents of `index.json` next to the `frames/` directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceIndex {
    pub stream_id: String,
    pub fps: f64,
    pub frame_count: u64,
    pub width: u32,
    pub height: u32,
    /// Paths relative to the output directory, in playback order.
    pub frames: Vec<String>,
}

/// Writes numbered PNG frames in order, then the index on `finish`.
pub struct SequenceWriter {
    out_dir: PathBuf,
    index: SequenceIndex,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RenderError + '_ {
    move |source| RenderError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl SequenceWriter {
    pub fn create(out_dir: &Path, stream_id: &str, fps: f64) -> Result<Self, RenderError> {
        let frames = out_dir.join("frames");
        fs::create_dir_all(&frames).map_err(io_err(&frames))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            index: SequenceIndex {
                stream_id: stream_id.to_string(),
                fps,
                frame_count: 0,
                width: 0,
                height: 0,
                frames: Vec::new(),
            },
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn write(&mut self, f: &AnnotatedFrame) -> Result<PathBuf, RenderError> {
        let expected = self.index.frame_count;
        if f.frame_index != expected {
            return Err(RenderError::OutOfOrder {
                expected,
                got: f.frame_index,
            });
        }
        let rel = format!("frames/{}", frame_file_name(f.frame_index));
        let path = self.out_dir.join(&rel);
        save_frame(&f.frame, &path)?;
        if expected == 0 {
            (self.index.width, self.index.height) = f.frame.dims();
        }
        self.index.frames.push(rel);
        self.index.frame_count += 1;
        Ok(path)
    }

    pub fn set_fps(&mut self, fps: f64) {
        self.index.fps = fps;
    }

    pub fn frame_count(&self) -> u64 {
        self.index.frame_count
    }

    pub fn finish(self) -> Result<SequenceIndex, RenderError> {
        if self.index.frame_count == 0 {
            return Err(RenderError::EmptySequence);
        }
        self.close()
    }

    /// Writes the index even when no frame was written.
    pub fn close(self) -> Result<SequenceIndex, RenderError> {
        let path = self.out_dir.join("index.json");
        let mut text = serde_json::to_string_pretty(&self.index).expect("index serializes");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(self.index)
    }
}

pub fn encode_sequence(
    frames: &[AnnotatedFrame],
    out_dir: &Path,
    stream_id: &str,
    fps: f64,
) -> Result<SequenceIndex, RenderError> {
    if frames.is_empty() {
        return Err(RenderError::EmptySequence);
    }
    let mut w = SequenceWriter::create(out_dir, stream_id, fps)?;
    for f in frames {
        w.write(f)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Frame;

    fn frames(n: u64) -> Vec<AnnotatedFrame> {
        (0..n)
            .map(|i| AnnotatedFrame {
                frame: Frame::filled(8, 6, [i as u8 * 40, 7, 200]),
                frame_index: i,
                stream_id: "s".into(),
            })
            .collect()
    }

    #[test]
    fn three_frames() {
        let dir = tempfile::tempdir().unwrap();
        let idx = encode_sequence(&frames(3), dir.path(), "s", 35.0).unwrap();
        assert_eq!(idx.frame_count, 3);
        let mut names: Vec<String> = fs::read_dir(dir.path().join("frames"))
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        assert_eq!(names, vec!["000000.png", "000001.png", "000002.png"]);
        let back: SequenceIndex =
            serde_json::from_str(&fs::read_to_string(dir.path().join("index.json")).unwrap()).unwrap();
        assert_eq!(back, idx);
    }

    #[test]
    fn reencoding_is_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        encode_sequence(&frames(3), a.path(), "s", 35.0).unwrap();
        encode_sequence(&frames(3), b.path(), "s", 35.0).unwrap();
        for rel in ["frames/000000.png", "frames/000002.png", "index.json"] {
            assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap());
        }
    }

    #[test]
    fn errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            encode_sequence(&[], dir.path(), "s", 35.0),
            Err(RenderError::EmptySequence)
        ));
        let mut w = SequenceWriter::create(dir.path(), "s", 35.0).unwrap();
        assert!(matches!(w.write(&frames(2)[1]), Err(RenderError::OutOfOrder { .. })));
        let file = dir.path().join("blocker");
        fs::write(&file, "x").unwrap();
        let err = SequenceWriter::create(&file, "s", 35.0).err().unwrap();
        assert!(err.to_string().contains("blocker"));
    }
}
