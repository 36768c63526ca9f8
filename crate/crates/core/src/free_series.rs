//! Truncated noncommutative power series over ℚ.
//!
//! A [`TruncSeries`] is a finite map from words of length at most the degree
//! bound to nonzero rationals. All arithmetic is exact modulo words longer
//! than the bound, so two truncations are equal iff their term maps are.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use thiserror::Error;

use crate::exact_arith::{fmt_rational, Rational};

/// Default truncation degree.
pub const DEFAULT_BOUND: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("series have different alphabets or degree bounds")]
    DegreeMismatch,
    #[error("star of a series with nonzero constant term")]
    NonzeroConstantTerm,
    #[error("inverse of a series with zero constant term")]
    ZeroConstantTerm,
    #[error("substitution image of `{0}` has degree > 1")]
    DegreeRaisingSubstitution(String),
    #[error("unknown letter `{0}`")]
    UnknownLetter(String),
}

/// A letter of an alphabet, identified by its name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(Arc<str>);

impl Letter {
    pub fn new(name: &str) -> Self {
        Letter(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered finite set of letters; words refer to letters by position.
#[derive(Clone, PartialEq, Eq)]
pub struct Alphabet {
    letters: Vec<Letter>,
    index: HashMap<Letter, u16>,
}

impl Alphabet {
    /// Panics on duplicate names.
    pub fn new<I, S>(names: I) -> Arc<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let letters: Vec<Letter> = names.into_iter().map(|s| Letter::new(s.as_ref())).collect();
        let mut index = HashMap::new();
        for (i, l) in letters.iter().enumerate() {
            let fresh = index.insert(l.clone(), i as u16).is_none();
            assert!(fresh, "duplicate letter `{l}` in alphabet");
        }
        Arc::new(Alphabet { letters, index })
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn letter(&self, i: u16) -> &Letter {
        &self.letters[i as usize]
    }

    pub fn index_of(&self, l: &Letter) -> Option<u16> {
        self.index.get(l).copied()
    }

    pub fn index_of_name(&self, name: &str) -> Option<u16> {
        self.index.get(&Letter::new(name)).copied()
    }

    /// Parses a word written as letter names separated by `.`; the empty
    /// string and `"1"` denote the empty word.
    pub fn word(&self, text: &str) -> Result<Word, SeriesError> {
        let text = text.trim();
        if text.is_empty() || text == "1" {
            return Ok(Word::empty());
        }
        text.split('.')
            .map(|n| self.index_of_name(n.trim()).ok_or_else(|| SeriesError::UnknownLetter(n.to_string())))
            .collect::<Result<SmallVec<_>, _>>()
            .map(Word)
    }

    pub fn render_word(&self, w: &Word) -> String {
        if w.is_empty() {
            return "1".to_string();
        }
        w.0.iter().map(|&i| self.letter(i).name()).collect::<Vec<_>>().join(".")
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.letters).finish()
    }
}

/// Element of the free monoid, as letter indices.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Word(pub SmallVec<[u16; 8]>);

impl Word {
    pub fn empty() -> Self {
        Word(SmallVec::new())
    }

    pub fn from_indices(ix: &[u16]) -> Self {
        Word(SmallVec::from_slice(ix))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut w = self.0.clone();
        w.extend_from_slice(&other.0);
        Word(w)
    }

    pub fn is_proper_prefix_of(&self, other: &Word) -> bool {
        self.len() < other.len() && other.0.starts_with(&self.0)
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortlex: by length, then lexicographically by letter index.
impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }
}

/// Noncommutative power series truncated at `bound`.
#[derive(Clone)]
pub struct TruncSeries {
    alphabet: Arc<Alphabet>,
    bound: usize,
    terms: FxHashMap<Word, Rational>,
}

impl PartialEq for TruncSeries {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.alphabet == other.alphabet && self.terms == other.terms
    }
}

impl TruncSeries {
    pub fn zero(alphabet: &Arc<Alphabet>, bound: usize) -> Self {
        TruncSeries { alphabet: alphabet.clone(), bound, terms: FxHashMap::default() }
    }

    pub fn constant(alphabet: &Arc<Alphabet>, bound: usize, c: Rational) -> Self {
        let mut s = Self::zero(alphabet, bound);
        s.add_term(Word::empty(), c);
        s
    }

    pub fn one(alphabet: &Arc<Alphabet>, bound: usize) -> Self {
        Self::constant(alphabet, bound, Rational::one())
    }

    pub fn letter(alphabet: &Arc<Alphabet>, bound: usize, l: &Letter) -> Result<Self, SeriesError> {
        let i = alphabet.index_of(l).ok_or_else(|| SeriesError::UnknownLetter(l.to_string()))?;
        let mut s = Self::zero(alphabet, bound);
        s.add_term(Word::from_indices(&[i]), Rational::one());
        Ok(s)
    }

    /// Builds a series from `(word, coefficient)` pairs, words written as in
    /// [`Alphabet::word`]. Words beyond the bound are dropped.
    pub fn from_terms(alphabet: &Arc<Alphabet>, bound: usize, terms: &[(&str, Rational)]) -> Result<Self, SeriesError> {
        let mut s = Self::zero(alphabet, bound);
        for (w, c) in terms {
            let w = alphabet.word(w)?;
            s.add_term(w, c.clone());
        }
        Ok(s)
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, w: &Word) -> Rational {
        self.terms.get(w).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&Word::empty())
    }

    /// Largest word length with a nonzero coefficient.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(Word::len).max()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Rational)> {
        self.terms.iter()
    }

    /// Terms in shortlex order.
    pub fn sorted_terms(&self) -> Vec<(&Word, &Rational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    /// The shortlex-least word with a nonzero coefficient.
    pub fn first_term(&self) -> Option<(&Word, &Rational)> {
        self.terms.iter().min_by(|a, b| a.0.cmp(b.0))
    }

    pub fn support(&self) -> impl Iterator<Item = &Word> {
        self.terms.keys()
    }

    fn add_term(&mut self, w: Word, c: Rational) {
        if w.len() > self.bound || c.is_zero() {
            return;
        }
        match self.terms.entry(w) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<(), SeriesError> {
        let same_alphabet = Arc::ptr_eq(&self.alphabet, &other.alphabet) || self.alphabet == other.alphabet;
        if self.bound != other.bound || !same_alphabet {
            return Err(SeriesError::DegreeMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other)?;
        let (mut big, small) = if self.len() >= other.len() { (self.clone(), other) } else { (other.clone(), self) };
        for (w, c) in &small.terms {
            big.add_term(w.clone(), c.clone());
        }
        Ok(big)
    }

    pub fn neg(&self) -> Self {
        TruncSeries {
            alphabet: self.alphabet.clone(),
            bound: self.bound,
            terms: self.terms.iter().map(|(w, c)| (w.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(&self.alphabet, self.bound);
        }
        TruncSeries {
            alphabet: self.alphabet.clone(),
            bound: self.bound,
            terms: self.terms.iter().map(|(w, x)| (w.clone(), x * c)).collect(),
        }
    }

    fn by_degree(&self) -> Vec<Vec<(&Word, &Rational)>> {
        let mut layers = vec![Vec::new(); self.bound + 1];
        for (w, c) in &self.terms {
            layers[w.len()].push((w, c));
        }
        layers
    }

    /// Cauchy product truncated at the bound.
    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other)?;
        let mut out = Self::zero(&self.alphabet, self.bound);
        if self.is_zero() || other.is_zero() {
            return Ok(out);
        }
        let right = other.by_degree();
        for (u, cu) in &self.terms {
            for layer in &right[..=self.bound - u.len()] {
                for (v, cv) in layer {
                    out.add_term(u.concat(v), cu * *cv);
                }
            }
        }
        Ok(out)
    }

    /// `Σ_{k ≥ 0} s^k`, defined when the constant term is zero.
    pub fn star(&self) -> Result<Self, SeriesError> {
        if !self.constant_term().is_zero() {
            return Err(SeriesError::NonzeroConstantTerm);
        }
        // Degree layers of X = 1 + s·X, each computed from lower ones.
        let s_layers = self.by_degree();
        let mut x_layers: Vec<FxHashMap<Word, Rational>> = Vec::with_capacity(self.bound + 1);
        let mut first = FxHashMap::default();
        first.insert(Word::empty(), Rational::one());
        x_layers.push(first);
        for d in 1..=self.bound {
            let mut layer: FxHashMap<Word, Rational> = FxHashMap::default();
            for (j, s_layer) in s_layers.iter().enumerate().take(d + 1).skip(1) {
                for (u, cu) in s_layer {
                    for (v, cv) in &x_layers[d - j] {
                        let w = u.concat(v);
                        let e = layer.entry(w).or_insert_with(Rational::zero);
                        *e += *cu * cv;
                    }
                }
            }
            layer.retain(|_, c| !c.is_zero());
            x_layers.push(layer);
        }
        Ok(TruncSeries {
            alphabet: self.alphabet.clone(),
            bound: self.bound,
            terms: x_layers.into_iter().flatten().collect(),
        })
    }

    /// Inverse of `s = c(1 - u)` as `star(u)·c⁻¹`, defined when `c != 0`.
    pub fn inverse(&self) -> Result<Self, SeriesError> {
        let c = self.constant_term();
        if c.is_zero() {
            return Err(SeriesError::ZeroConstantTerm);
        }
        let c_inv = c.recip();
        let mut u = self.scale(&-c_inv.clone());
        u.terms.remove(&Word::empty());
        Ok(u.star()?.scale(&c_inv))
    }

    /// The derivation sending each word `w` to `|w|·w`.
    pub fn lambda(&self) -> Self {
        let mut out = Self::zero(&self.alphabet, self.bound);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), c * Rational::from_integer(w.len().into()));
        }
        out
    }

    /// Homomorphic image under `sigma`, word by word.
    ///
    /// Exact when every image has zero constant term, or when `self` is a
    /// polynomial of degree at most the bound. Images with a nonzero constant
    /// term send long words to low degrees, which the truncation has lost.
    pub fn substitute(&self, sigma: &Substitution) -> Result<Self, SeriesError> {
        if !Arc::ptr_eq(&self.alphabet, &sigma.source) && *self.alphabet != *sigma.source {
            return Err(SeriesError::DegreeMismatch);
        }
        let images: Vec<TruncSeries> =
            sigma.images.iter().map(|im| im.rebound(self.bound)).collect();
        let mut out = Self::zero(&sigma.target, self.bound);
        let mut memo: FxHashMap<Word, TruncSeries> = FxHashMap::default();
        for (w, c) in &self.terms {
            let img = word_image(w, &images, &sigma.target, self.bound, &mut memo)?;
            for (v, cv) in &img.terms {
                out.add_term(v.clone(), c * cv);
            }
        }
        Ok(out)
    }

    /// Same series with a different truncation degree.
    pub fn rebound(&self, bound: usize) -> Self {
        TruncSeries {
            alphabet: self.alphabet.clone(),
            bound,
            terms: self.terms.iter().filter(|(w, _)| w.len() <= bound).map(|(w, c)| (w.clone(), c.clone())).collect(),
        }
    }

    /// Plain-text rendering, terms in shortlex order: `1 + a + 2*a.b`.
    pub fn render(&self) -> String {
        let terms = self.sorted_terms();
        if terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (w, c)) in terms.into_iter().enumerate() {
            let neg = c < &Rational::zero();
            let mag = if neg { -c.clone() } else { c.clone() };
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let word = self.alphabet.render_word(w);
            if w.is_empty() {
                out.push_str(&fmt_rational(&mag));
            } else if mag.is_one() {
                out.push_str(&word);
            } else {
                out.push_str(&format!("{}*{}", fmt_rational(&mag), word));
            }
        }
        out
    }
}

fn word_image(
    w: &Word,
    images: &[TruncSeries],
    target: &Arc<Alphabet>,
    bound: usize,
    memo: &mut FxHashMap<Word, TruncSeries>,
) -> Result<TruncSeries, SeriesError> {
    if w.is_empty() {
        return Ok(TruncSeries::one(target, bound));
    }
    if let Some(s) = memo.get(w) {
        return Ok(s.clone());
    }
    let prefix = Word(SmallVec::from_slice(&w.0[..w.len() - 1]));
    let head = word_image(&prefix, images, target, bound, memo)?;
    let img = head.mul(&images[*w.0.last().expect("nonempty word") as usize])?;
    memo.insert(w.clone(), img.clone());
    Ok(img)
}

impl fmt::Debug for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (deg ≤ {})", self.render(), self.bound)
    }
}

impl fmt::Display for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Algebra morphism given on letters; every image has degree at most 1.
#[derive(Clone, Debug)]
pub struct Substitution {
    source: Arc<Alphabet>,
    target: Arc<Alphabet>,
    images: Vec<TruncSeries>,
}

impl Substitution {
    /// Starts from the identity on letters shared by both alphabets; letters
    /// missing from the target must be assigned with [`Substitution::set`].
    pub fn new(source: &Arc<Alphabet>, target: &Arc<Alphabet>) -> Self {
        let images = source
            .letters()
            .iter()
            .map(|l| {
                TruncSeries::letter(target, 1, l).unwrap_or_else(|_| TruncSeries::zero(target, 1))
            })
            .collect();
        Substitution { source: source.clone(), target: target.clone(), images }
    }

    /// Sets the image of `letter` to the affine polynomial `constant + Σ cᵢ·xᵢ`.
    pub fn set(&mut self, letter: &str, constant: Rational, linear: &[(&str, Rational)]) -> Result<(), SeriesError> {
        let i = self.source.index_of_name(letter).ok_or_else(|| SeriesError::UnknownLetter(letter.to_string()))?;
        let mut img = TruncSeries::constant(&self.target, 1, constant);
        for (name, c) in linear {
            let l = self.target.index_of_name(name).ok_or_else(|| SeriesError::UnknownLetter(name.to_string()))?;
            img.add_term(Word::from_indices(&[l]), c.clone());
        }
        self.images[i as usize] = img;
        Ok(())
    }

    /// Sets an arbitrary image; rejects images of degree > 1.
    pub fn set_image(&mut self, letter: &str, image: &TruncSeries) -> Result<(), SeriesError> {
        let i = self.source.index_of_name(letter).ok_or_else(|| SeriesError::UnknownLetter(letter.to_string()))?;
        if image.degree().unwrap_or(0) > 1 {
            return Err(SeriesError::DegreeRaisingSubstitution(letter.to_string()));
        }
        if *image.alphabet != *self.target {
            return Err(SeriesError::DegreeMismatch);
        }
        self.images[i as usize] = image.rebound(1);
        Ok(())
    }

    pub fn source(&self) -> &Arc<Alphabet> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Alphabet> {
        &self.target
    }

    /// Image of a letter, truncated at `bound`.
    pub fn image(&self, l: &Letter, bound: usize) -> Result<TruncSeries, SeriesError> {
        let i = self.source.index_of(l).ok_or_else(|| SeriesError::UnknownLetter(l.to_string()))?;
        Ok(self.images[i as usize].rebound(bound))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::{int, q};

    fn ab(bound: usize) -> (Arc<Alphabet>, impl Fn(&[(&str, i64)]) -> TruncSeries) {
        let alpha = Alphabet::new(["a", "b", "c", "d"]);
        let a2 = alpha.clone();
        let mk = move |terms: &[(&str, i64)]| {
            let t: Vec<(&str, Rational)> = terms.iter().map(|(w, c)| (*w, int(*c))).collect();
            TruncSeries::from_terms(&a2, bound, &t).unwrap()
        };
        (alpha, mk)
    }

    #[test]
    fn products() {
        let (_, s) = ab(2);
        assert_eq!(s(&[("a", 1)]).mul(&s(&[("b", 1)])).unwrap(), s(&[("a.b", 1)]));
        assert_eq!(
            s(&[("1", 1), ("a", 1)]).mul(&s(&[("1", 1), ("a", -1)])).unwrap(),
            s(&[("1", 1), ("a.a", -1)])
        );
        let sum = s(&[("a", 1), ("b", 1)]);
        assert_eq!(sum.mul(&sum).unwrap(), s(&[("a.a", 1), ("a.b", 1), ("b.a", 1), ("b.b", 1)]));
    }

    #[test]
    fn star_examples() {
        let (alpha, s) = ab(3);
        assert_eq!(TruncSeries::zero(&alpha, 3).star().unwrap(), s(&[("1", 1)]));
        assert_eq!(s(&[("a", 1)]).star().unwrap(), s(&[("1", 1), ("a", 1), ("a.a", 1), ("a.a.a", 1)]));
        assert_eq!(s(&[("1", 1)]).star(), Err(SeriesError::NonzeroConstantTerm));
        let (_, s2) = ab(2);
        assert_eq!(
            s2(&[("a", 1), ("b", 1)]).star().unwrap(),
            s2(&[("1", 1), ("a", 1), ("b", 1), ("a.a", 1), ("a.b", 1), ("b.a", 1), ("b.b", 1)])
        );
    }

    #[test]
    fn inverse_examples() {
        let (alpha, s) = ab(3);
        assert_eq!(s(&[("1", 1), ("a", -1)]).inverse().unwrap(), s(&[("a", 1)]).star().unwrap());
        assert_eq!(
            TruncSeries::constant(&alpha, 3, int(2)).inverse().unwrap(),
            TruncSeries::constant(&alpha, 3, q(1, 2))
        );
        let (_, s2) = ab(2);
        let x = s2(&[("1", 1), ("b", 1)]);
        let inv = x.inverse().unwrap();
        assert_eq!(inv, s2(&[("1", 1), ("b", -1), ("b.b", 1)]));
        assert_eq!(x.mul(&inv).unwrap(), s2(&[("1", 1)]));
        assert_eq!(s(&[("a", 1)]).inverse(), Err(SeriesError::ZeroConstantTerm));
    }

    #[test]
    fn lambda_examples() {
        let (alpha, s) = ab(3);
        assert!(TruncSeries::one(&alpha, 3).lambda().is_zero());
        assert_eq!(s(&[("a.b", 1)]).lambda(), s(&[("a.b", 2)]));
        assert_eq!(s(&[("a", 1), ("a.b.c", 3)]).lambda(), s(&[("a", 1), ("a.b.c", 9)]));
    }

    #[test]
    fn substitution_of_polynomials() {
        let (alpha, s) = ab(4);
        let mut sigma = Substitution::new(&alpha, &alpha);
        sigma.set("a", int(1), &[("b", int(-1))]).unwrap();
        sigma.set("d", int(1), &[("c", int(-1))]).unwrap();
        assert_eq!(s(&[("a", 1)]).substitute(&sigma).unwrap(), s(&[("1", 1), ("b", -1)]));
        assert_eq!(
            s(&[("a.d", 1)]).substitute(&sigma).unwrap(),
            s(&[("1", 1), ("b", -1), ("c", -1), ("b.c", 1)])
        );
        // (1 + a)(a + b + c - 1)(1 + b) vanishes under a ↦ 1 - b - c.
        let p = s(&[("1", 1), ("a", 1)])
            .mul(&s(&[("a", 1), ("b", 1), ("c", 1), ("1", -1)]))
            .unwrap()
            .mul(&s(&[("1", 1), ("b", 1)]))
            .unwrap();
        let mut sigma = Substitution::new(&alpha, &alpha);
        sigma.set("a", int(1), &[("b", int(-1)), ("c", int(-1))]).unwrap();
        assert!(p.substitute(&sigma).unwrap().is_zero());
    }

    #[test]
    fn degree_raising_images_rejected() {
        let (alpha, s) = ab(4);
        let mut sigma = Substitution::new(&alpha, &alpha);
        assert_eq!(
            sigma.set_image("a", &s(&[("b.c", 1)])),
            Err(SeriesError::DegreeRaisingSubstitution("a".into()))
        );
    }

    #[test]
    fn rendering_is_shortlex() {
        let (_, s) = ab(3);
        let x = s(&[("a.b", 2), ("1", 1), ("a", 1), ("b", -1)]);
        assert_eq!(x.render(), "1 + a - b + 2*a.b");
        let (alpha, _) = ab(3);
        assert_eq!(TruncSeries::zero(&alpha, 3).render(), "0");
    }

    #[test]
    fn mismatched_bounds() {
        let (alpha, _) = ab(3);
        let x = TruncSeries::one(&alpha, 3);
        let y = TruncSeries::one(&alpha, 2);
        assert_eq!(x.add(&y), Err(SeriesError::DegreeMismatch));
        assert_eq!(x.mul(&y), Err(SeriesError::DegreeMismatch));
    }
}
