//! Farthest-first chaining with a stub gate, then batching.

use rowstitch::features::MatchSet;
use rowstitch::model::{PairVerdict, RejectReason, Transform2D};
use rowstitch::sequencer::{build_batches, build_chain, ChainMode};

/// Accepts pairs at most `reach` apart, except across `broken`.
fn stub(i: usize, j: usize, reach: usize, broken: Option<usize>) -> PairVerdict {
    let crosses = broken.is_some_and(|b| i < b && j >= b);
    if j - i <= reach && !crosses {
        PairVerdict {
            accepted: true,
            transform: Some(Transform2D::translation(100.0 * (j - i) as f64, 0.0)),
            matches: MatchSet::default(),
            rms_px: 0.5,
            reject_reason: RejectReason::None,
            inliers: 40,
            motion: None,
        }
    } else {
        PairVerdict::rejected(RejectReason::TooFewInliers, MatchSet::default())
    }
}

fn main() -> rowstitch::Result<()> {
    let out = build_chain(20, 4, ChainMode::Strict, |i, j| stub(i, j, 3, None))?;
    println!("used {:?}", out.chain.used_indices);
    for a in out.attempts.iter().take(6) {
        println!("  {} -> {}: {}", a.from, a.to, a.verdict.reject_reason);
    }
    for b in build_batches(&out.chain, 4) {
        println!("batch {:?}", b.images);
    }

    let cut = build_chain(20, 4, ChainMode::Partial, |i, j| stub(i, j, 3, Some(8)))?;
    println!("with a break: used {:?}", cut.chain.used_indices);
    if let Some(g) = &cut.gap {
        println!("gap {g}");
    }
    Ok(())
}
