use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Speaker class. Class index 0 is child, 1 is adult.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Speaker {
    Child,
    Adult,
}

impl Speaker {
    pub const ALL: [Speaker; 2] = [Speaker::Child, Speaker::Adult];

    pub fn index(self) -> usize {
        match self {
            Speaker::Child => 0,
            Speaker::Adult => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Speaker::Child),
            1 => Some(Speaker::Adult),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::Child => "child",
            Speaker::Adult => "adult",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Speaker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "child" => Ok(Speaker::Child),
            "adult" => Ok(Speaker::Adult),
            other => Err(Error::Label(format!("unknown speaker label '{}'", other))),
        }
    }
}

/// Domain membership. Class index 0 is source, 1 is target; the domain
/// discriminator's first output is the source posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn index(self) -> usize {
        match self {
            Domain::Source => 0,
            Domain::Target => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Domain::Source => Domain::Target,
            Domain::Target => Domain::Source,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "source" => Ok(Domain::Source),
            "target" => Ok(Domain::Target),
            other => Err(Error::Label(format!("unknown domain '{}'", other))),
        }
    }
}
