//! Process exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | invalid command-line arguments |
//! | 2 | manifest could not be loaded or is invalid |
//! | 3 | evidence missing or unreadable |
//! | 4 | inputs disagree in shape (vertex counts, image sizes) |
//! | 5 | anything else |

use std::fmt;

use labelfuse4d::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage,
    Manifest,
    Evidence,
    Shape,
    Internal,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Usage => 1,
            ExitKind::Manifest => 2,
            ExitKind::Evidence => 3,
            ExitKind::Shape => 4,
            ExitKind::Internal => 5,
        }
    }
}

impl fmt::Display for ExitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExitKind::Usage => "invalid arguments",
            ExitKind::Manifest => "manifest error",
            ExitKind::Evidence => "evidence error",
            ExitKind::Shape => "shape mismatch",
            ExitKind::Internal => "internal error",
        };
        f.write_str(s)
    }
}

/// Explicit tags win; otherwise the first library error in the chain decides.
pub fn classify(err: &anyhow::Error) -> ExitKind {
    if let Some(kind) = err.downcast_ref::<ExitKind>() {
        return *kind;
    }
    let core = err
        .downcast_ref::<Error>()
        .or_else(|| err.chain().find_map(|e| e.downcast_ref::<Error>()));
    match core {
        Some(Error::InvalidWeights(_)) => ExitKind::Usage,
        Some(Error::Manifest(_)) => ExitKind::Manifest,
        Some(Error::MissingEvidence { .. } | Error::UnmappedClass(_) | Error::PixelOutOfBounds { .. }) => {
            ExitKind::Evidence
        }
        Some(Error::LengthMismatch { .. } | Error::DimensionMismatch { .. }) => ExitKind::Shape,
        _ => ExitKind::Internal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn tags_and_library_errors_map_to_codes() {
        let tagged = Err::<(), _>(Error::Invalid("x".into()))
            .context(ExitKind::Manifest)
            .unwrap_err();
        assert_eq!(classify(&tagged).code(), 2);
        let shape = anyhow::Error::new(Error::LengthMismatch { expected: 1, found: 2 }).context("loading");
        assert_eq!(classify(&shape).code(), 4);
        let missing = anyhow::Error::new(Error::MissingEvidence {
            frame: 1,
            view: 2,
            source_kind: "flow",
            path: "f".into(),
        });
        assert_eq!(classify(&missing).code(), 3);
        assert_eq!(classify(&anyhow::anyhow!("boom")).code(), 5);
    }
}
