//! Deterministic synthetic videos for tests and benchmarks.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::video::{Frame, Rational, VideoSequence};

#[derive(Debug, Clone, Copy)]
struct Rect {
    x: i32,
    y: i32,
    w: i32,
    h: i32,
    dx: i32,
    dy: i32,
    color: [u8; 3],
}

fn below(rng: &mut ChaCha8Rng, n: u32) -> u32 {
    rng.next_u32() % n.max(1)
}

/// Solid rectangles bouncing over a soft gradient. Same arguments, same
/// pixels.
pub fn moving_rectangles(
    frames: usize,
    width: u32,
    height: u32,
    count: usize,
    seed: u64,
) -> VideoSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as i32, height as i32);
    let mut rects: Vec<Rect> = (0..count)
        .map(|_| {
            let rw = (w / 6).max(2) + below(&mut rng, (w / 4).max(1) as u32) as i32;
            let rh = (h / 6).max(2) + below(&mut rng, (h / 4).max(1) as u32) as i32;
            Rect {
                x: below(&mut rng, (w - rw).max(1) as u32) as i32,
                y: below(&mut rng, (h - rh).max(1) as u32) as i32,
                w: rw,
                h: rh,
                dx: below(&mut rng, 5) as i32 - 2,
                dy: below(&mut rng, 3) as i32 - 1,
                color: [
                    below(&mut rng, 256) as u8,
                    below(&mut rng, 256) as u8,
                    below(&mut rng, 256) as u8,
                ],
            }
        })
        .collect();
    let tint = below(&mut rng, 64);
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        let frame = Frame::from_fn(width, height, |x, y| {
            let (xi, yi) = (x as i32, y as i32);
            for r in rects.iter().rev() {
                if xi >= r.x && xi < r.x + r.w && yi >= r.y && yi < r.y + r.h {
                    return r.color;
                }
            }
            [
                (32 + x * 64 / width) as u8,
                (48 + tint) as u8,
                (40 + y * 80 / height) as u8,
            ]
        });
        out.push(frame);
        for r in &mut rects {
            if r.x + r.dx < 0 || r.x + r.w + r.dx > w {
                r.dx = -r.dx;
            }
            if r.y + r.dy < 0 || r.y + r.h + r.dy > h {
                r.dy = -r.dy;
            }
            r.x += r.dx;
            r.y += r.dy;
        }
    }
    VideoSequence::new(out, Rational { num: 25, den: 1 }).expect("non-empty synthetic video")
}
