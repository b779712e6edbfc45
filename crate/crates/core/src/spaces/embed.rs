use serde::{Deserialize, Serialize};

use super::Space;
use crate::error::{Error, Result};
use crate::numeric::{FastCauchy, Rat};
use crate::urysohn::{lock, realize_approx, SharedBuilder, UReal, ANCHOR_LOOKAHEAD};

/// Images of the first dense points of a space in U, built in index order.
#[derive(Debug)]
pub struct EmbeddingIntoU {
    space: Space,
    builder: SharedBuilder,
    images: Vec<UReal>,
    capacity: usize,
    precision: u32,
}

impl EmbeddingIntoU {
    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn builder(&self) -> &SharedBuilder {
        &self.builder
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn images(&self) -> &[UReal] {
        &self.images
    }

    /// The image of `r_i`, building earlier images first if needed.
    pub fn image(&mut self, i: usize) -> Result<&UReal> {
        while self.images.len() <= i {
            self.push_next()?;
        }
        Ok(&self.images[i])
    }

    /// Stage depth of image `i` for inexact spaces. Later images read
    /// earlier ones `ANCHOR_LOOKAHEAD` stages ahead, so depth shrinks with
    /// the index down to `precision + 2` for the last planned image.
    fn depth_for(&self, i: usize) -> u32 {
        let later = self.capacity.saturating_sub(i + 1) as u32;
        self.precision + 2 + ANCHOR_LOOKAHEAD * later
    }

    fn push_next(&mut self) -> Result<()> {
        let n = self.images.len();
        if !self.space.is_exact() && n >= self.capacity {
            return Err(Error::TooLarge(format!(
                "embedding planned for {} points of an inexact space",
                self.capacity
            )));
        }
        self.space.check_index(n)?;
        if n == 0 {
            let seed = lock(&self.builder).seed();
            self.images.push(UReal::exact(seed));
            return Ok(());
        }
        let mut targets = Vec::with_capacity(n);
        if self.space.is_exact() {
            for i in 0..n {
                let d = self.space.dense_dist(n, i, 0)?;
                if d.is_zero() {
                    // A repeated dense point shares its earlier image.
                    let img = self.images[i].clone();
                    self.images.push(img);
                    return Ok(());
                }
                targets.push(FastCauchy::rational(d));
            }
        } else {
            for i in 0..n {
                self.space.dense_dist(n, i, 0)?;
                let space = self.space.clone();
                targets.push(FastCauchy::real(move |p| {
                    space.dense_dist(n, i, p).expect("index checked")
                }));
            }
        }
        let depth = self.depth_for(n);
        let mut b = lock(&self.builder);
        let img = realize_approx(&mut b, &self.images, &targets, depth)?;
        drop(b);
        self.images.push(img);
        Ok(())
    }
}

/// Embeds `r_0, ..., r_{upto-1}` into the builder's space. Image 0 is the
/// builder's first point; image `n` realizes the distances `d(r_n, r_i)` to
/// the earlier images. `precision` fixes how many stages inexact images
/// carry.
pub fn embed_into_u(
    space: Space,
    builder: SharedBuilder,
    upto: usize,
    precision: u32,
) -> Result<EmbeddingIntoU> {
    if upto == 0 {
        return Err(Error::InvalidRequest(
            "embedding needs at least one point".into(),
        ));
    }
    let mut e = EmbeddingIntoU {
        space,
        builder,
        images: Vec::new(),
        capacity: upto,
        precision,
    };
    e.image(upto - 1)?;
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsometryEntry {
    pub i: usize,
    pub j: usize,
    pub u_dist: Rat,
    pub x_dist: Rat,
    pub discrepancy: Rat,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub precision: u32,
    pub bound: Rat,
    pub entries: Vec<IsometryEntry>,
}

impl IsometryReport {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.ok)
    }

    pub fn max_discrepancy(&self) -> Rat {
        self.entries
            .iter()
            .map(|e| e.discrepancy.clone())
            .max()
            .unwrap_or(Rat::ZERO)
    }
}

/// Compares stage-`p` distances in U with the space's distances, which are
/// read at precision `p + 4`. Every discrepancy must be at most `2^-(p-2)`.
pub fn verify_isometry(
    e: &EmbeddingIntoU,
    pairs: &[(usize, usize)],
    p: u32,
) -> Result<IsometryReport> {
    let bound = Rat::pow2_neg(p.saturating_sub(2));
    let b = lock(&e.builder);
    let mut entries = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        let len = e.images.len();
        let (xi, xj) = match (e.images.get(i), e.images.get(j)) {
            (Some(a), Some(c)) => (a, c),
            _ => {
                return Err(Error::DenseOutOfRange {
                    index: i.max(j),
                    len,
                })
            }
        };
        let u_dist = b.d(xi.stage_clamped(p), xj.stage_clamped(p)).clone();
        let x_dist = e.space.dense_dist(i, j, p + 4)?;
        let discrepancy = (&u_dist - &x_dist).abs();
        let ok = discrepancy <= bound;
        entries.push(IsometryEntry {
            i,
            j,
            u_dist,
            x_dist,
            discrepancy,
            ok,
        });
    }
    Ok(IsometryReport {
        precision: p,
        bound,
        entries,
    })
}

/// All pairs `i <= j` below `n`.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}
