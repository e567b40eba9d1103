//! Attribute and relation vocabulary (CLEVR value sets).
//!
//! All value lists live here; everything else iterates the `ALL` tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $tok:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $tok),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($tok => Ok($name::$variant),)+
                    _ => Err(format!("unknown {} `{}`", stringify!($name), s)),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

token_enum!(Color {
    Gray => "gray",
    Red => "red",
    Blue => "blue",
    Green => "green",
    Brown => "brown",
    Purple => "purple",
    Cyan => "cyan",
    Yellow => "yellow",
});

token_enum!(Size {
    Small => "small",
    Large => "large",
});

token_enum!(Shape {
    Cube => "cube",
    Sphere => "sphere",
    Cylinder => "cylinder",
});

token_enum!(Material {
    Rubber => "rubber",
    Metal => "metal",
});

token_enum!(
    /// Attribute types, declared in canonical filter order.
    AttrType {
        Size => "Size",
        Color => "Color",
        Material => "Material",
        Shape => "Shape",
    }
);

token_enum!(Relation {
    Left => "left",
    Right => "right",
    Front => "front",
    Behind => "behind",
});

impl AttrType {
    /// Lowercase noun used in question text ("the same size as").
    pub fn noun(self) -> &'static str {
        match self {
            AttrType::Size => "size",
            AttrType::Color => "color",
            AttrType::Material => "material",
            AttrType::Shape => "shape",
        }
    }

    pub fn values(self) -> Vec<AttrValue> {
        match self {
            AttrType::Size => Size::ALL.iter().map(|&v| AttrValue::Size(v)).collect(),
            AttrType::Color => Color::ALL.iter().map(|&v| AttrValue::Color(v)).collect(),
            AttrType::Material => Material::ALL.iter().map(|&v| AttrValue::Material(v)).collect(),
            AttrType::Shape => Shape::ALL.iter().map(|&v| AttrValue::Shape(v)).collect(),
        }
    }
}

impl Relation {
    pub fn inverse(self) -> Relation {
        match self {
            Relation::Left => Relation::Right,
            Relation::Right => Relation::Left,
            Relation::Front => Relation::Behind,
            Relation::Behind => Relation::Front,
        }
    }
}

/// A concrete attribute value tagged with its type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttrValue {
    Size(Size),
    Color(Color),
    Material(Material),
    Shape(Shape),
}

impl AttrValue {
    pub fn attr_type(self) -> AttrType {
        match self {
            AttrValue::Size(_) => AttrType::Size,
            AttrValue::Color(_) => AttrType::Color,
            AttrValue::Material(_) => AttrType::Material,
            AttrValue::Shape(_) => AttrType::Shape,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttrValue::Size(v) => v.as_str(),
            AttrValue::Color(v) => v.as_str(),
            AttrValue::Material(v) => v.as_str(),
            AttrValue::Shape(v) => v.as_str(),
        }
    }

    /// Parses a value token of a known type.
    pub fn parse_typed(ty: AttrType, s: &str) -> Result<AttrValue, String> {
        Ok(match ty {
            AttrType::Size => AttrValue::Size(s.parse()?),
            AttrType::Color => AttrValue::Color(s.parse()?),
            AttrType::Material => AttrValue::Material(s.parse()?),
            AttrType::Shape => AttrValue::Shape(s.parse()?),
        })
    }

    /// Parses a value token of any type. Value tokens are unique across types.
    pub fn parse_any(s: &str) -> Option<AttrValue> {
        AttrType::ALL.iter().find_map(|&ty| AttrValue::parse_typed(ty, s).ok())
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_tokens_are_unique_across_types() {
        let mut seen = std::collections::BTreeSet::new();
        for ty in AttrType::ALL {
            for v in ty.values() {
                assert!(seen.insert(v.as_str()), "duplicate token {v}");
                assert_eq!(AttrValue::parse_any(v.as_str()), Some(v));
            }
        }
        assert_eq!(seen.len(), 8 + 2 + 3 + 2);
    }

    #[test]
    fn inverses() {
        for r in Relation::ALL {
            assert_eq!(r.inverse().inverse(), *r);
            assert_ne!(r.inverse(), *r);
        }
    }
}
