//! Windowed farthest-first image selection and batch construction.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{PairVerdict, RejectReason, Transform2D};

#[derive(Debug, Clone)]
pub struct ChainLink {
    pub from: usize,
    pub to: usize,
    pub verdict: PairVerdict,
}

impl ChainLink {
    /// Transform mapping `to` into `from`.
    pub fn transform(&self) -> Transform2D {
        self.verdict.transform.expect("accepted link carries a transform")
    }
}

#[derive(Debug, Clone, Default)]
pub struct StitchChain {
    pub used_indices: Vec<usize>,
    pub links: Vec<ChainLink>,
}

/// One gate invocation, in call order.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub from: usize,
    pub to: usize,
    pub verdict: PairVerdict,
}

/// Focal index at which no window candidate was accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub break_at: usize,
    pub tried: Vec<(usize, RejectReason)>,
}

impl fmt::Display for GapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tried: Vec<String> = self.tried.iter().map(|(j, r)| format!("{j}:{r}")).collect();
        write!(f, "break_at={} tried={}", self.break_at, tried.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChainMode {
    Strict,
    #[default]
    Partial,
}

#[derive(Debug, Clone)]
pub struct ChainOutcome {
    pub chain: StitchChain,
    pub attempts: Vec<Attempt>,
    pub gap: Option<GapReport>,
    /// Rejections at the last focal image when every remaining image was
    /// tried; the chain simply ends there.
    pub tail: Option<GapReport>,
}

impl ChainOutcome {
    pub fn is_complete(&self) -> bool {
        self.gap.is_none()
    }
}

/// Greedy farthest-first chaining over `n` ordered images. `matcher(i, j)` gates
/// the ordered pair (earlier `i`, later `j`); results are memoized per pair.
pub fn build_chain(
    n: usize,
    window: usize,
    mode: ChainMode,
    mut matcher: impl FnMut(usize, usize) -> PairVerdict,
) -> Result<ChainOutcome> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 images, got {n}")));
    }
    if window < 1 {
        return Err(Error::InvalidParameter("window must be >= 1".into()));
    }
    let mut memo: HashMap<(usize, usize), PairVerdict> = HashMap::new();
    let mut attempts = Vec::new();
    let mut chain = StitchChain {
        used_indices: vec![0],
        links: Vec::new(),
    };
    let last = n - 1;
    let mut i = 0;
    while i < last {
        let mut tried = Vec::new();
        let mut next = None;
        for j in (i + 1..=(i + window).min(last)).rev() {
            let v = match memo.get(&(i, j)) {
                Some(v) => v.clone(),
                None => {
                    let v = matcher(i, j);
                    attempts.push(Attempt {
                        from: i,
                        to: j,
                        verdict: v.clone(),
                    });
                    memo.insert((i, j), v.clone());
                    v
                }
            };
            if v.accepted {
                next = Some((j, v));
                break;
            }
            tried.push((j, v.reject_reason));
        }
        match next {
            Some((j, verdict)) => {
                chain.links.push(ChainLink { from: i, to: j, verdict });
                chain.used_indices.push(j);
                i = j;
            }
            None => {
                let gap = GapReport { break_at: i, tried };
                if i > 0 && i + window >= last {
                    return Ok(ChainOutcome {
                        chain,
                        attempts,
                        gap: None,
                        tail: Some(gap),
                    });
                }
                if mode == ChainMode::Strict {
                    return Err(Error::ChainBreak(gap.to_string()));
                }
                return Ok(ChainOutcome {
                    chain,
                    attempts,
                    gap: Some(gap),
                    tail: None,
                });
            }
        }
    }
    Ok(ChainOutcome {
        chain,
        attempts,
        gap: None,
        tail: None,
    })
}

/// Contiguous run of used images stitched together.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Image indices in chain order.
    pub images: Vec<usize>,
    /// `links[k]` maps `images[k + 1]` into `images[k]`.
    pub links: Vec<Transform2D>,
}

impl Batch {
    pub fn first(&self) -> usize {
        self.images[0]
    }

    pub fn last(&self) -> usize {
        *self.images.last().unwrap()
    }
}

/// Slices the chain into batches of `batch_size` images; neighbours share one image.
pub fn build_batches(chain: &StitchChain, batch_size: usize) -> Vec<Batch> {
    let n = chain.used_indices.len();
    if n < 2 || batch_size < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + batch_size - 1).min(n - 1);
        out.push(Batch {
            images: chain.used_indices[start..=end].to_vec(),
            links: chain.links[start..end].iter().map(ChainLink::transform).collect(),
        });
        if end == n - 1 {
            break;
        }
        start = end;
    }
    out
}
