//! Arithmetic in the groups `G(q) = (Z/2Z)^p`, `q = 2^p`.
//!
//! An element is identified with its binary map: index `i` *is* the bit
//! vector whose coordinate `t` is bit `t` (least-significant first) of `i`.
//! Group addition is XOR.

use crate::{Error, Result, MAX_WIDTH};

/// An element of `(Z/2Z)^width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupSymbol {
    value: u8,
    width: u8,
}

/// Checks that `width` is a supported group width.
pub fn check_width(width: u8) -> Result<()> {
    if width == 0 || width > MAX_WIDTH {
        Err(Error::InvalidWidth(width))
    } else {
        Ok(())
    }
}

/// Group order `2^width`.
#[inline]
pub fn order(width: u8) -> usize {
    1usize << width
}

impl GroupSymbol {
    pub fn new(value: u16, width: u8) -> Result<Self> {
        check_width(width)?;
        if value >= (1u16 << width) {
            return Err(Error::ValueOutOfRange { value, width });
        }
        Ok(Self {
            value: value as u8,
            width,
        })
    }

    /// The identity element of `G(2^width)`.
    pub fn zero(width: u8) -> Result<Self> {
        Self::new(0, width)
    }

    #[inline]
    pub fn value(self) -> u8 {
        self.value
    }

    #[inline]
    pub fn width(self) -> u8 {
        self.width
    }

    #[inline]
    pub fn index(self) -> usize {
        self.value as usize
    }

    /// Bit `t` of the binary map.
    #[inline]
    pub fn bit(self, t: u8) -> u8 {
        (self.value >> t) & 1
    }

    pub fn add(self, other: GroupSymbol) -> Result<GroupSymbol> {
        if self.width != other.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                found: other.width,
            });
        }
        Ok(GroupSymbol {
            value: self.value ^ other.value,
            width: self.width,
        })
    }

    /// Number of ones in the binary map.
    #[inline]
    pub fn hamming_weight(self) -> u32 {
        self.value.count_ones()
    }

    /// All `2^width` elements in natural binary order.
    pub fn all(width: u8) -> Result<impl Iterator<Item = GroupSymbol>> {
        check_width(width)?;
        Ok((0..order(width)).map(move |v| GroupSymbol {
            value: v as u8,
            width,
        }))
    }
}

impl std::fmt::Display for GroupSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/G({})", self.value, order(self.width))
    }
}

/// Hamming weight of a raw symbol index.
#[inline]
pub fn hamming_weight(value: usize) -> u32 {
    value.count_ones()
}
