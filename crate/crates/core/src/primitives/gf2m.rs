//! Arithmetic in GF(2^m) through log/antilog tables.

#[derive(Clone, Debug)]
pub struct Gf2m {
    m: u32,
    order: usize,
    exp: Vec<u16>,
    log: Vec<u16>,
}

/// Primitive polynomials (including the x^m term) for m = 3..=12.
const PRIMITIVE: [u32; 10] = [
    0b1011,
    0b10011,
    0b100101,
    0b1000011,
    0b10001001,
    0b100011101,
    0b1000010001,
    0b10000001001,
    0b100000000101,
    0b1000001010011,
];

impl Gf2m {
    pub fn new(m: u32) -> Option<Self> {
        if !(3..=12).contains(&m) {
            return None;
        }
        let poly = PRIMITIVE[(m - 3) as usize];
        let order = (1usize << m) - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; order + 1];
        let mut v: u32 = 1;
        for i in 0..order {
            exp[i] = v as u16;
            log[v as usize] = i as u16;
            v <<= 1;
            if v & (1 << m) != 0 {
                v ^= poly;
            }
        }
        debug_assert_eq!(v, 1, "polynomial is not primitive");
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Some(Gf2m { m, order, exp, log })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Multiplicative group order 2^m - 1.
    pub fn order(&self) -> usize {
        self.order
    }

    /// alpha^e for any integer exponent.
    #[inline]
    pub fn alpha_pow(&self, e: i64) -> u16 {
        self.exp[e.rem_euclid(self.order as i64) as usize]
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    #[inline]
    pub fn div(&self, a: u16, b: u16) -> u16 {
        assert!(b != 0, "division by zero in GF(2^m)");
        if a == 0 {
            0
        } else {
            let e = self.log[a as usize] as usize + self.order - self.log[b as usize] as usize;
            self.exp[e % self.order]
        }
    }

    #[inline]
    pub fn log(&self, a: u16) -> Option<usize> {
        (a != 0).then(|| self.log[a as usize] as usize)
    }
}
