use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{DataError, Image, TrainingPair};
use crate::tensor::{Element, Shape, Tensor};

/// One of the 8 symmetries of the square: `code % 4` clockwise quarter turns,
/// preceded by a horizontal flip when `code >= 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Augment(u8);

impl Augment {
    pub const IDENTITY: Augment = Augment(0);
    pub const ROT180: Augment = Augment(2);

    pub fn new(code: u8) -> Option<Self> {
        (code < 8).then_some(Augment(code))
    }

    pub fn all() -> impl Iterator<Item = Augment> {
        (0..8).map(Augment)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn quarter_turns(self) -> u8 {
        self.0 % 4
    }

    pub fn flipped(self) -> bool {
        self.0 >= 4
    }

    /// Where source pixel `(x, y)` of an `n x n` patch lands.
    pub fn map(self, x: usize, y: usize, n: usize) -> (usize, usize) {
        let (mut x, mut y) = if self.flipped() { (n - 1 - x, y) } else { (x, y) };
        for _ in 0..self.quarter_turns() {
            (x, y) = (n - 1 - y, x);
        }
        (x, y)
    }

    /// Applies the transform to a square image.
    pub fn apply(self, img: &Image) -> Image {
        let n = img.width();
        debug_assert_eq!(n, img.height());
        let c = img.channels();
        let mut out = vec![0u8; img.samples().len()];
        for y in 0..n {
            for x in 0..n {
                let (tx, ty) = self.map(x, y, n);
                let d = (ty * n + tx) * c;
                out[d..d + c].copy_from_slice(img.pixel(x, y));
            }
        }
        Image::new(n, n, c, out).expect("same dimensions")
    }
}

/// Where a patch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchOrigin {
    pub image: usize,
    /// Offset of the LR crop; the HR crop starts at `scale` times this.
    pub x: usize,
    pub y: usize,
    pub augment: Augment,
}

/// Aligned LR/HR patches in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBatch<T> {
    pub lr: Tensor<T>,
    pub hr: Tensor<T>,
    pub origins: Vec<PatchOrigin>,
}

fn check_pairs(pairs: &[TrainingPair], patch: usize) -> Result<usize, DataError> {
    let first = pairs.first().ok_or_else(|| DataError::Empty("no training pairs".into()))?;
    let scale = first.scale();
    for (i, p) in pairs.iter().enumerate() {
        if p.lr.width() < patch || p.lr.height() < patch {
            return Err(DataError::TooSmall(format!(
                "LR image {i} is {}x{}, smaller than the {patch}x{patch} patch",
                p.lr.width(),
                p.lr.height()
            )));
        }
        if p.hr.width() != p.lr.width() * scale || p.hr.height() != p.lr.height() * scale {
            return Err(DataError::Format(format!("pair {i} is not aligned at scale {scale}")));
        }
    }
    Ok(scale)
}

/// Draws `batch` patches: uniform image, uniform offset, uniform augmentation.
pub fn sample_batch<T: Element, R: Rng + ?Sized>(
    pairs: &[TrainingPair],
    rng: &mut R,
    patch: usize,
    batch: usize,
) -> Result<PatchBatch<T>, DataError> {
    let s = check_pairs(pairs, patch)?;
    let hp = patch * s;
    let mut lr = Vec::with_capacity(batch * 3 * patch * patch);
    let mut hr = Vec::with_capacity(batch * 3 * hp * hp);
    let mut origins = Vec::with_capacity(batch);
    for _ in 0..batch {
        let image = rng.gen_range(0..pairs.len());
        let pair = &pairs[image];
        let x = rng.gen_range(0..=pair.lr.width() - patch);
        let y = rng.gen_range(0..=pair.lr.height() - patch);
        let augment = Augment(rng.gen_range(0..8));
        let lp = augment.apply(&pair.lr.crop(x, y, patch, patch)?);
        let hpimg = augment.apply(&pair.hr.crop(x * s, y * s, hp, hp)?);
        lr.extend(lp.to_tensor::<T>().into_data());
        hr.extend(hpimg.to_tensor::<T>().into_data());
        origins.push(PatchOrigin { image, x, y, augment });
    }
    let to_t = |data, side| Tensor::new(Shape::new(batch, 3, side, side), data).map_err(|e| DataError::Format(e.to_string()));
    Ok(PatchBatch { lr: to_t(lr, patch)?, hr: to_t(hr, hp)?, origins })
}

/// Deterministic batch source, either inline or fed by worker threads.
///
/// Worker `i` owns a generator on stream `i` of the seeded ChaCha generator and
/// batches are taken round-robin, so the sequence depends only on `(seed, workers)`.
/// Zero and one worker yield the same sequence.
pub struct BatchLoader<T: Element> {
    inline: Option<(Arc<Vec<TrainingPair>>, ChaCha8Rng)>,
    receivers: Vec<Receiver<Result<PatchBatch<T>, DataError>>>,
    handles: Vec<JoinHandle<()>>,
    next: usize,
    patch: usize,
    batch: usize,
}

const QUEUE_DEPTH: usize = 4;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl<T: Element> BatchLoader<T> {
    pub fn new(
        pairs: Arc<Vec<TrainingPair>>,
        seed: u64,
        patch: usize,
        batch: usize,
        workers: usize,
    ) -> Result<Self, DataError> {
        check_pairs(&pairs, patch)?;
        if workers == 0 {
            return Ok(BatchLoader {
                inline: Some((pairs, stream_rng(seed, 0))),
                receivers: Vec::new(),
                handles: Vec::new(),
                next: 0,
                patch,
                batch,
            });
        }
        let mut receivers = Vec::with_capacity(workers);
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let (tx, rx) = sync_channel(QUEUE_DEPTH);
            let pairs = Arc::clone(&pairs);
            handles.push(std::thread::spawn(move || {
                let mut rng = stream_rng(seed, w as u64);
                loop {
                    let b = sample_batch::<T, _>(&pairs, &mut rng, patch, batch);
                    if tx.send(b).is_err() {
                        break;
                    }
                }
            }));
            receivers.push(rx);
        }
        Ok(BatchLoader { inline: None, receivers, handles, next: 0, patch, batch })
    }

    pub fn next_batch(&mut self) -> Result<PatchBatch<T>, DataError> {
        if let Some((pairs, rng)) = &mut self.inline {
            return sample_batch(pairs, rng, self.patch, self.batch);
        }
        let i = self.next % self.receivers.len();
        self.next += 1;
        self.receivers[i].recv().map_err(|_| DataError::Io("batch worker exited".into()))?
    }
}

impl<T: Element> Drop for BatchLoader<T> {
    fn drop(&mut self) {
        self.receivers.clear();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}
