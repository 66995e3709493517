use crate::observable::MultiPolynomial;
use crate::process::ProcessSpec;
use crate::rational::{pow, to_f64, Rational};

/// Largest dense lookup table built for an observable.
pub const MAX_TABLE: usize = 1 << 16;

/// An observable evaluated on alphabet indices at a fixed list of positions.
///
/// Small arities use a table of exactly evaluated values; larger ones fall
/// back to evaluating the terms in double precision.
#[derive(Clone, Debug)]
pub struct CompiledFn {
    positions: usize,
    radix: usize,
    table: Option<Vec<f64>>,
    terms: Vec<(f64, Vec<(usize, usize, i32)>)>,
    alphabet: Vec<Vec<f64>>,
}

impl CompiledFn {
    /// `locate(slot, coord)` maps a variable to `(position, process coordinate)`.
    pub fn new<L>(f: &MultiPolynomial, positions: usize, spec: &ProcessSpec, locate: L) -> Self
    where
        L: Fn(usize, usize) -> (usize, usize),
    {
        let exact_terms: Vec<(Rational, Vec<(usize, usize, u32)>)> = f
            .to_terms()
            .into_iter()
            .map(|(c, vars)| {
                let placed = vars
                    .into_iter()
                    .map(|(slot, coord, e)| {
                        let (p, c) = locate(slot, coord);
                        (p, c, e)
                    })
                    .collect();
                (c, placed)
            })
            .collect();
        let radix = spec.alphabet().len();
        let size = (radix as u128).checked_pow(positions as u32).unwrap_or(u128::MAX);
        let table = (size <= MAX_TABLE as u128).then(|| {
            let alphabet = spec.alphabet();
            (0..size as usize)
                .map(|code| {
                    let mut letters = Vec::with_capacity(positions);
                    let mut rem = code;
                    for _ in 0..positions {
                        letters.push(rem % radix);
                        rem /= radix;
                    }
                    let value: Rational = exact_terms
                        .iter()
                        .map(|(c, vars)| {
                            vars.iter()
                                .fold(c.clone(), |acc, &(p, k, e)| acc * pow(&alphabet[letters[p]][k], e))
                        })
                        .sum();
                    to_f64(&value)
                })
                .collect()
        });
        let terms = exact_terms
            .iter()
            .map(|(c, vars)| (to_f64(c), vars.iter().map(|&(p, k, e)| (p, k, e as i32)).collect()))
            .collect();
        CompiledFn {
            positions,
            radix,
            table,
            terms,
            alphabet: spec.alphabet_f64().to_vec(),
        }
    }

    pub fn is_tabulated(&self) -> bool {
        self.table.is_some()
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    /// `letter(p)` returns the alphabet index at position `p`.
    #[inline]
    pub fn eval<G: Fn(usize) -> u32>(&self, letter: G) -> f64 {
        match &self.table {
            Some(t) => {
                let mut code = 0usize;
                for p in (0..self.positions).rev() {
                    code = code * self.radix + letter(p) as usize;
                }
                t[code]
            }
            None => self
                .terms
                .iter()
                .map(|(c, vars)| {
                    vars.iter()
                        .fold(*c, |acc, &(p, k, e)| acc * self.alphabet[letter(p) as usize][k].powi(e))
                })
                .sum(),
        }
    }
}
