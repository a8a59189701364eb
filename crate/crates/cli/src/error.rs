use std::fmt;

/// Failure of a subcommand. Usage errors exit with 2, the rest with 1.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", message)
    }

    pub fn exit_code(&self) -> i32 {
        if self.kind == "usage" {
            2
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

macro_rules! kind {
    ($($ty:path => $name:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::new($name, e.to_string())
            }
        })*
    };
}

kind! {
    beautykit::imgcore::ImageError => "image",
    beautykit::geom::GeomError => "geometry",
    beautykit::layers::LayerError => "layer",
    beautykit::verifier::VerifierError => "verifier",
    beautykit::rewards::RewardError => "reward",
    beautykit::bench::BenchError => "bench",
    beautykit::flowlab::FlowError => "flow",
    serde_json::Error => "json",
    std::io::Error => "io",
}
