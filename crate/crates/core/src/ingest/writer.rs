//! Writes a [`SessionBundle`] in the corpus layout read by
//! [`load_session`](super::load_session).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{
    frames_file_name, FrameRecord, Role, SessionBundle, ANNOTATION_HEADER, FRAME_HEADER,
    SESSION_FILE, TRANSCRIPT_FILE,
};

fn to_io(e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> io::Error {
    io::Error::other(e)
}

pub fn write_session(dir: &Path, bundle: &SessionBundle) -> io::Result<()> {
    fs::create_dir_all(dir)?;

    let meta = serde_json::to_string(&bundle.meta).map_err(to_io)?;
    fs::write(dir.join(SESSION_FILE), meta + "\n")?;

    let mut transcript = String::new();
    for seg in &bundle.segments {
        transcript.push_str(&serde_json::to_string(seg).map_err(to_io)?);
        transcript.push('\n');
    }
    fs::write(dir.join(TRANSCRIPT_FILE), transcript)?;

    for role in Role::ALL {
        write_frames(&dir.join(frames_file_name(role)), bundle.frames.get(role))?;
    }

    for tier in &bundle.tiers {
        let mut w = csv::Writer::from_path(dir.join(tier.file_name()))?;
        w.write_record(ANNOTATION_HEADER)?;
        for span in &tier.spans {
            w.write_record([
                span.start_s.to_string(),
                span.end_s.to_string(),
                span.label.name(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_frames(path: &Path, frames: &[FrameRecord]) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", FRAME_HEADER.join(","))?;
    for f in frames {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            f.frame_idx,
            f.gaze_x,
            f.gaze_y,
            f.smile_p,
            f.happy_p,
            f.sad_p,
            f.anger_p,
            f.other_p,
            f.pitch_hz,
            f.loudness,
            if f.face_detected { 1 } else { 0 }
        )?;
    }
    out.flush()
}
