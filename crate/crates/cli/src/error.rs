use std::fmt;
use std::io::ErrorKind;

/// Failure category; doubles as the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage = 2,
    Input = 3,
    Runtime = 4,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Input => "input",
            Category::Runtime => "runtime",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            category: Category::Usage,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            category: Category::Input,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            category: Category::Runtime,
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        let category = match e.kind() {
            ErrorKind::NotFound | ErrorKind::PermissionDenied | ErrorKind::InvalidData => Category::Input,
            _ => Category::Runtime,
        };
        CliError {
            category,
            message: format!("i/o error on {}: {e}", path.display()),
        }
    }

    /// The single stderr line reported on failure.
    pub fn to_line(&self) -> String {
        serde_json::json!({
            "error": self.category.as_str(),
            "code": self.category as i32,
            "message": self.message,
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category.as_str(), self.message)
    }
}

impl From<qscan_core::Error> for CliError {
    fn from(e: qscan_core::Error) -> Self {
        use qscan_core::Error as E;
        let category = match &e {
            // A missing or unreadable input is the caller's problem, a full
            // disk is not.
            E::Io { source, .. } => match source.kind() {
                ErrorKind::NotFound | ErrorKind::PermissionDenied | ErrorKind::InvalidData => Category::Input,
                _ => Category::Runtime,
            },
            E::UndefinedStatistic(_) => Category::Runtime,
            _ => Category::Input,
        };
        CliError {
            category,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
