//! A session whose teacher features reproduce a known student A feature row:
//! 693.96 s session, 8.34 s segments, 22.19 words per segment, word length
//! 5.02, speaking rate 2.92, statements 0.88, questions 0.11, sentiment
//! -0.03, pitch 226.84, loudness 1.58, gaze 0.78, mutual gaze 0.66, smile
//! 0.04, mutual smile 0.01, happiness 0.54, no sadness or anger.
//!
//! All times are multiples of the 40 ms frame, so spoken frames can be
//! enumerated by hand: 64 segments, 57 of 20 words over 6.52 s and 7 of 40
//! words over 23.16 s, separated by 37 gaps of 2.56 s and 26 of 2.52 s. The
//! last segment ends at 694.00 s, making frame 17349 the last spoken one.

#![allow(dead_code)]

use counsel_core::ingest::{FrameRecord, Role, RoleFrames, Segment, SessionBundle, SessionMeta};

pub const N_FRAMES: usize = 17_400;

fn words(n: usize, word: &str) -> String {
    vec![word; n].join(" ")
}

pub fn student_a_segments() -> Vec<Segment> {
    let mut segs = Vec::new();
    let mut frame = 0usize;
    let mut long_left = 7;
    for i in 0..64 {
        let long = i % 9 == 4 && long_left > 0;
        if long {
            long_left -= 1;
        }
        let (n_words, frames) = if long { (40, 579) } else { (20, 163) };
        // one segment uses six-letter words; seven ask, one trails off
        let word = if i == 10 { "Morgen" } else { "Hallo" };
        let mut text = words(n_words, word);
        match i {
            _ if i % 9 == 1 && i < 63 => text.push('?'),
            63 => {}
            _ => text.push('.'),
        }
        segs.push(Segment {
            start_s: frame as f64 / 25.0,
            end_s: (frame + frames) as f64 / 25.0,
            role: Role::Teacher,
            text,
            sentiment: -0.03,
        });
        frame += frames;
        if i < 63 {
            frame += if i < 37 { 64 } else { 63 };
        }
    }
    assert_eq!(long_left, 0);
    assert_eq!(frame, 17_350);
    segs
}

pub fn student_a_frames() -> RoleFrames {
    let frame = |i: usize, main: bool, smile: bool| {
        let m = i % 100;
        FrameRecord {
            gaze_x: if main { 0.0 } else { 0.5 },
            gaze_y: if main { 0.0 } else { 0.5 },
            smile_p: if smile { 0.9 } else { 0.1 },
            happy_p: if m < 54 { 0.7 } else { 0.1 },
            sad_p: 0.1,
            anger_p: 0.1,
            other_p: if m < 54 { 0.1 } else { 0.7 },
            pitch_hz: 226.84,
            loudness: 1.58,
            face_detected: true,
            ..FrameRecord::blank(i as u64)
        }
    };
    RoleFrames {
        teacher: (0..N_FRAMES).map(|i| frame(i, i % 100 < 78, i % 100 < 4)).collect(),
        parent: (0..N_FRAMES)
            .map(|i| {
                let m = i % 100;
                frame(i, m < 66 || m >= 90, m == 0)
            })
            .collect(),
    }
}

pub fn student_a() -> SessionBundle {
    SessionBundle {
        meta: SessionMeta::new("A", Some(4)),
        segments: student_a_segments(),
        frames: student_a_frames(),
        tiers: Vec::new(),
    }
}

/// 50 teacher segments, three of which hold two sentences.
pub fn multi_sentence() -> SessionBundle {
    let segments = (0..50)
        .map(|i| Segment {
            start_s: i as f64 * 2.0,
            end_s: i as f64 * 2.0 + 1.6,
            role: Role::Teacher,
            text: if i % 17 == 3 {
                "Ja. Das machen wir so.".to_string()
            } else {
                "Das machen wir so.".to_string()
            },
            sentiment: 0.0,
        })
        .collect();
    let n = 2500;
    let frames = (0..n)
        .map(|i| FrameRecord {
            gaze_x: if i % 3 == 0 { 0.4 } else { 0.0 },
            smile_p: 0.2,
            other_p: 0.9,
            pitch_hz: 180.0,
            loudness: 1.0,
            face_detected: true,
            ..FrameRecord::blank(i as u64)
        })
        .collect();
    SessionBundle {
        meta: SessionMeta::new("M", Some(3)),
        segments,
        frames: RoleFrames {
            teacher: frames,
            parent: Vec::new(),
        },
        tiers: Vec::new(),
    }
}
