use core::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident, $prefix:literal) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// Dense index into a [`Catalog`](crate::trace::Catalog).
    ObjectId,
    "obj"
);
id_type!(
    /// Dense index into a trace's user table.
    UserId,
    "u"
);
id_type!(
    /// Data transfer node; `DtnId(0)` is the server DTN in the default topology.
    DtnId,
    "dtn"
);
